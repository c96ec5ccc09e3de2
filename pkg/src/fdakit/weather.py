"""Synthetic fog and rain for building the adverse-weather target domain.

Fog uses the atmospheric-scattering blend out = in*t + A*(1-t) with
transmission t = exp(-lambda * depth). Rain renders seeded random streaks
(integer length/angle samples) as thickened line segments alpha-blended onto
the image. Both are pure per-image functions: same inputs, same seed,
bit-identical output.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from fdakit import _kernels
from fdakit.errors import ParameterError
from fdakit.imageio import validate_image

DEPTH_UNIFORM = "uniform"
DEPTH_VERTICAL_GRADIENT = "vertical_gradient"

#: Default weather profile baked into the CLI.
DEFAULT_FOG_LAMBDA = 1.0
DEFAULT_FOG_AIRLIGHT = 150.0
DEFAULT_RAIN_NOISE = 500
DEFAULT_RAIN_LENGTH_RANGE = (50, 60)
DEFAULT_RAIN_ANGLE_RANGE = (-50, 51)
DEFAULT_RAIN_THICKNESS = 3
DEFAULT_RAIN_ALPHA = 0.7
DEFAULT_STREAK_INTENSITY = 200.0 / 255.0


@dataclass(frozen=True)
class FogParams:
    lam: float = DEFAULT_FOG_LAMBDA            # extinction strength, >= 0
    airlight: float = DEFAULT_FOG_AIRLIGHT     # ambient intensity, 8-bit scale [0, 255]
    depth_model: str = DEPTH_UNIFORM

    def validate(self) -> None:
        if self.lam < 0:
            raise ParameterError(f"fog lambda must be >= 0, got {self.lam}")
        if not 0 <= self.airlight <= 255:
            raise ParameterError(f"airlight must be in [0, 255], got {self.airlight}")
        if self.depth_model not in (DEPTH_UNIFORM, DEPTH_VERTICAL_GRADIENT):
            raise ParameterError(f"unknown depth model {self.depth_model!r}")


@dataclass(frozen=True)
class RainParams:
    noise: int = DEFAULT_RAIN_NOISE            # streak count
    length_range: tuple = DEFAULT_RAIN_LENGTH_RANGE   # [lo, hi], inclusive pixels
    angle_range: tuple = DEFAULT_RAIN_ANGLE_RANGE     # [lo, hi) degrees from vertical
    thickness: int = DEFAULT_RAIN_THICKNESS
    alpha: float = DEFAULT_RAIN_ALPHA
    seed: int = 0
    streak_intensity: float = DEFAULT_STREAK_INTENSITY

    def validate(self) -> None:
        if self.noise < 0:
            raise ParameterError(f"noise must be >= 0, got {self.noise}")
        lo, hi = self.length_range
        if lo > hi:
            raise ParameterError(f"empty length range [{lo}, {hi}]")
        alo, ahi = self.angle_range
        if alo >= ahi:
            raise ParameterError(f"empty angle range [{alo}, {ahi})")
        if self.thickness < 1:
            raise ParameterError(f"thickness must be >= 1, got {self.thickness}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.streak_intensity <= 1.0:
            raise ParameterError("streak intensity must be in [0, 1]")


@dataclass(frozen=True)
class Streak:
    """One rain streak: segment endpoints plus half-thickness."""

    ax: float
    ay: float
    bx: float
    by: float
    radius: float
    angle_deg: int = 0
    length: int = 0


def depth_map(height: int, width: int, depth_model: str) -> np.ndarray:
    """Per-pixel depth proxy: 1 everywhere, or 0 at the bottom row rising to 1
    at the top row (distant road scenery is foggier)."""
    if depth_model == DEPTH_UNIFORM:
        return np.ones((height, width))
    rows = np.linspace(1.0, 0.0, height) if height > 1 else np.ones(1)
    return np.repeat(rows[:, None], width, axis=1)


def apply_fog(image: np.ndarray, params: FogParams) -> np.ndarray:
    validate_image(image)
    params.validate()
    if params.lam == 0.0:
        return image.copy()
    h, w = image.shape[:2]
    transmission = np.exp(-params.lam * depth_map(h, w, params.depth_model))
    out = _kernels.fog_blend(
        np.ascontiguousarray(image, dtype=np.float64),
        transmission,
        params.airlight / 255.0,
    )
    return np.clip(out, 0.0, 1.0)


def sample_streaks(height: int, width: int, params: RainParams) -> list:
    """Draw streak geometry from the seeded RNG.

    Exposed separately so tests can re-rasterize exactly what apply_rain drew.
    """
    rng = np.random.default_rng(params.seed)
    lo, hi = params.length_range
    alo, ahi = params.angle_range
    streaks = []
    for _ in range(params.noise):
        x0 = int(rng.integers(0, width))
        y0 = int(rng.integers(0, height))
        length = int(rng.integers(lo, hi + 1))
        angle = int(rng.integers(alo, ahi))
        theta = math.radians(angle)
        x1 = x0 + round(length * math.sin(theta))
        y1 = y0 + round(length * math.cos(theta))
        streaks.append(
            Streak(ax=float(x0), ay=float(y0), bx=float(x1), by=float(y1),
                   radius=params.thickness / 2.0, angle_deg=angle, length=length)
        )
    return streaks


def apply_rain(image: np.ndarray, params: RainParams) -> np.ndarray:
    validate_image(image)
    params.validate()
    out = np.ascontiguousarray(image, dtype=np.float64).copy()
    if params.noise == 0 or params.alpha == 0.0:
        return out
    color = np.full(3, params.streak_intensity)
    for s in sample_streaks(image.shape[0], image.shape[1], params):
        _kernels.blend_capsule(out, s.ax, s.ay, s.bx, s.by, s.radius, color, params.alpha)
    return np.clip(out, 0.0, 1.0)


def derive_seed(global_seed: int, identifier: str) -> int:
    """Stable per-image seed so parallel scheduling cannot change results."""
    digest = hashlib.blake2b(
        f"{global_seed}:{identifier}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")
