"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set FDAKIT_PURE_PYTHON=1
to force the fallback (used by the benchmark and the equivalence tests).
Both backends are bit-identical on float64 input.
"""

import os

if os.environ.get("FDAKIT_PURE_PYTHON"):
    from fdakit._kernels import pure as _impl
else:
    try:
        from fdakit._kernels import _fastcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        from fdakit._kernels import pure as _impl

BACKEND = _impl.BACKEND
select_swap = _impl.select_swap
fog_blend = _impl.fog_blend
blend_capsule = _impl.blend_capsule
