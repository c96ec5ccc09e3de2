"""Pure-numpy implementations of the hot per-pixel kernels.

These are the reference semantics; the compiled backend in ``_fastcore.pyx``
mirrors each expression operation-for-operation so the two backends produce
bit-identical float64 output.
"""

import numpy as np

BACKEND = "pure"


def select_swap(source: np.ndarray, target: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Elementwise select: target where mask is set, source elsewhere."""
    return np.where(mask, target, source)


def fog_blend(image: np.ndarray, transmission: np.ndarray, airlight: float) -> np.ndarray:
    """Scattering blend v*t + A*(1-t), per pixel; transmission is H x W."""
    t = transmission[:, :, None]
    return image * t + airlight * (1.0 - t)


def blend_capsule(
    image: np.ndarray,
    ax: float,
    ay: float,
    bx: float,
    by: float,
    radius: float,
    color: np.ndarray,
    alpha: float,
) -> None:
    """Alpha-blend `color` onto pixels within `radius` of segment (a, b), in place.

    Pixel (x, y) is covered when its squared distance to the segment is
    <= radius**2. Only the segment's bounding box is visited.
    """
    h, w = image.shape[:2]
    x0 = max(0, int(np.floor(min(ax, bx) - radius)))
    x1 = min(w - 1, int(np.ceil(max(ax, bx) + radius)))
    y0 = max(0, int(np.floor(min(ay, by) - radius)))
    y1 = min(h - 1, int(np.ceil(max(ay, by) + radius)))
    if x0 > x1 or y0 > y1:
        return

    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    px = xs[None, :] - ax
    py = ys[:, None] - ay
    vx = bx - ax
    vy = by - ay
    vv = vx * vx + vy * vy
    if vv > 0.0:
        t = np.clip((px * vx + py * vy) / vv, 0.0, 1.0)
    else:
        t = np.zeros((ys.size, xs.size))
    dx = px - t * vx
    dy = py - t * vy
    covered = dx * dx + dy * dy <= radius * radius

    sub = image[y0 : y1 + 1, x0 : x1 + 1]
    blended = sub * (1.0 - alpha) + color[None, None, :] * alpha
    sub[covered] = blended[covered]
