"""Reconstruction quality metrics and transmitted-volume accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import SymbolFrame
from .filtering import DimensionMismatchError, Mask
from .scene import Image

PEAK = 255.0

# Side information is billed against bandwidth at a fixed conversion rate of
# 4 bits per channel-symbol equivalent.
SIDE_BITS_PER_SYMBOL = 4


class EmptyMaskError(ValueError):
    """Masked MSE is undefined over an all-zero mask."""


@dataclass(frozen=True)
class TrialResult:
    """Rate and distortion record for one end-to-end pipeline run."""

    image_id: str
    scheme: str
    eta: float
    snr_db: float
    seed: int
    payload_symbols: int
    side_symbol_equiv: int
    cbr: float
    psnr_db: float
    tc_psnr_db: float
    tc_pixel_count: int


def _check_dims(a: Image, b: Image) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(f"images differ: {a.pixels.shape} vs {b.pixels.shape}")


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB over all pixels and channels.

    Returns +inf when the images are identical.
    """
    _check_dims(a, b)
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def mse_tc(a: Image, b: Image, m: Mask) -> float:
    """Mean squared error restricted to masked pixels.

    Every channel sample at a masked pixel enters the sum, so the denominator
    is popcount(m) * channels; with a single channel this is the plain masked
    MSE.
    """
    _check_dims(a, b)
    if (m.width, m.height) != (a.width, a.height):
        raise DimensionMismatchError(
            f"mask {m.width}x{m.height} vs image {a.width}x{a.height}"
        )
    count = m.popcount
    if count == 0:
        raise EmptyMaskError("masked MSE undefined: mask selects no pixels")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    total = float((diff * diff)[m.bits].sum())
    return total / (count * a.channels)


def tc_psnr(a: Image, b: Image, m: Mask) -> float:
    """PSNR restricted to task-critical pixels; +inf when they match exactly."""
    err = mse_tc(a, b, m)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


def account(
    frame: SymbolFrame, img_dims: tuple[int, int, int]
) -> tuple[int, int, float]:
    """Payload symbols, side-info symbol equivalents, and channel bandwidth ratio."""
    width, height, channels = img_dims
    payload = int(frame.symbols.size)
    side_equiv = math.ceil(frame.side_bits / SIDE_BITS_PER_SYMBOL)
    cbr = (payload + side_equiv) / (width * height * channels)
    return payload, side_equiv, cbr
