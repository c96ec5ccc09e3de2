"""Frequency-domain style transfer core.

A channel's spectrum is stored center-origin: after the forward transform the
coefficients are shifted so the zero-frequency term sits at (H//2, W//2). The
centered low-frequency mask and the amplitude swap both operate on that
layout; the shift is undone before inversion.
"""

import logging
from dataclasses import dataclass

import numpy as np

from fdakit import _kernels
from fdakit.errors import DimensionError, ParameterError
from fdakit.imageio import resize_bicubic

log = logging.getLogger(__name__)

#: Swap-region ratio used for dataset production.
DEFAULT_BETA = 0.15


@dataclass(frozen=True)
class ChannelSpectrum:
    """Complex coefficients of one channel, zero frequency at the center."""

    coefficients: np.ndarray

    @property
    def height(self) -> int:
        return self.coefficients.shape[0]

    @property
    def width(self) -> int:
        return self.coefficients.shape[1]


@dataclass(frozen=True)
class AmplitudePhase:
    amplitude: np.ndarray  # |F|, non-negative
    phase: np.ndarray      # arg F, in (-pi, pi]


@dataclass(frozen=True)
class FrequencyMask:
    """Centered binary selector of the low-frequency block."""

    beta: float
    selected: np.ndarray  # bool grid

    @property
    def height(self) -> int:
        return self.selected.shape[0]

    @property
    def width(self) -> int:
        return self.selected.shape[1]

    @property
    def selected_count(self) -> int:
        return int(self.selected.sum())


def forward_dft(channel: np.ndarray) -> ChannelSpectrum:
    """2-D DFT of a real channel, re-indexed center-origin."""
    arr = np.asarray(channel, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected 2-D channel, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError("channel must be at least 1 x 1")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("channel contains non-finite values")
    return ChannelSpectrum(np.fft.fftshift(np.fft.fft2(arr)))


def inverse_dft(spectrum: ChannelSpectrum) -> np.ndarray:
    """Real part of the inverse DFT.

    After an amplitude swap the spectrum is generally not Hermitian, so the
    inverse carries a nonzero imaginary residue; it is discarded here and its
    maximum magnitude logged for diagnostics.
    """
    full = np.fft.ifft2(np.fft.ifftshift(spectrum.coefficients))
    residual = float(np.abs(full.imag).max()) if full.size else 0.0
    log.debug("inverse_dft max imaginary residual: %.3e", residual)
    return np.ascontiguousarray(full.real)


def decompose(spectrum: ChannelSpectrum) -> AmplitudePhase:
    coeff = spectrum.coefficients
    return AmplitudePhase(amplitude=np.abs(coeff), phase=np.angle(coeff))


def recombine(components: AmplitudePhase) -> ChannelSpectrum:
    coeff = components.amplitude * np.exp(1j * components.phase)
    return ChannelSpectrum(coeff)


def build_low_freq_mask(height: int, width: int, beta: float) -> FrequencyMask:
    """Mask selecting centered offsets |m| <= floor(beta*H), |n| <= floor(beta*W).

    beta = 0 selects nothing ("unchanged source"), so the selected-cell count
    is (2*floor(beta*H)+1) * (2*floor(beta*W)+1) for beta > 0 and 0 otherwise.
    """
    if height < 1 or width < 1:
        raise DimensionError("mask dimensions must be >= 1")
    if not 0.0 <= beta < 1.0:
        raise ParameterError(f"beta must be in [0, 1), got {beta}")
    if beta == 0.0:
        return FrequencyMask(beta=beta, selected=np.zeros((height, width), dtype=bool))
    m = np.arange(height) - height // 2
    n = np.arange(width) - width // 2
    bh = int(np.floor(beta * height))
    bw = int(np.floor(beta * width))
    selected = (np.abs(m)[:, None] <= bh) & (np.abs(n)[None, :] <= bw)
    return FrequencyMask(beta=beta, selected=selected)


def swap_low_frequencies(
    source_amp: np.ndarray, target_amp: np.ndarray, mask: FrequencyMask
) -> np.ndarray:
    """Target amplitude inside the mask, source amplitude outside. Exact select."""
    if source_amp.shape != target_amp.shape or source_amp.shape != mask.selected.shape:
        raise DimensionError(
            f"shape mismatch: source {source_amp.shape}, target {target_amp.shape}, "
            f"mask {mask.selected.shape}"
        )
    return _kernels.select_swap(source_amp, target_amp, mask.selected.astype(np.uint8))


def adapt_channel_spectrum(
    source: ChannelSpectrum, target: ChannelSpectrum, mask: FrequencyMask
) -> AmplitudePhase:
    """The adapted spectrum before inversion: swapped amplitude, source phase."""
    src = decompose(source)
    tgt = decompose(target)
    swapped = swap_low_frequencies(src.amplitude, tgt.amplitude, mask)
    return AmplitudePhase(amplitude=swapped, phase=src.phase)


def fda_transfer(source: np.ndarray, target: np.ndarray, beta: float) -> np.ndarray:
    """Transfer the target's low-frequency amplitude onto the source image.

    Channels are processed independently; the source phase is kept everywhere,
    so image content is preserved while the target's low-level appearance is
    adopted. A target with different dimensions is first resized (bicubic) to
    the source grid. Output is clamped to [0, 1].
    """
    if not 0.0 <= beta < 1.0:
        raise ParameterError(f"beta must be in [0, 1), got {beta}")
    if source.ndim != 3 or source.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 source, got shape {source.shape}")
    if target.ndim != 3 or target.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 target, got shape {target.shape}")

    h, w = source.shape[:2]
    if target.shape[:2] != (h, w):
        target = resize_bicubic(target, h, w)

    mask = build_low_freq_mask(h, w, beta)
    out = np.empty_like(source, dtype=np.float64)
    for c in range(3):
        spec_s = forward_dft(source[:, :, c])
        spec_t = forward_dft(target[:, :, c])
        adapted = adapt_channel_spectrum(spec_s, spec_t, mask)
        out[:, :, c] = inverse_dft(recombine(adapted))
    return np.clip(out, 0.0, 1.0)
