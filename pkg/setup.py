"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-numpy backend is selected at
import time), so the extension is marked optional: a missing compiler degrades
to the fallback instead of failing the install.
"""

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "fdakit._kernels._fastcore",
                ["src/fdakit/_kernels/_fastcore.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps the compiled kernels bit-identical
                # to the numpy fallback (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
