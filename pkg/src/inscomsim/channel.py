"""Seedable additive white Gaussian noise channel over real symbol frames."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .codec import SymbolFrame


@dataclasses.dataclass(frozen=True)
class ChannelConfig:
    snr_db: float
    seed: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))


def noise_sigma(snr_db: float) -> float:
    """Noise standard deviation for unit signal power: sqrt(10^(-snr_db/10))."""
    return math.sqrt(10.0 ** (-snr_db / 10.0))


def transmit(frame: SymbolFrame, cfg: ChannelConfig) -> SymbolFrame:
    """Add i.i.d. Gaussian noise to every symbol; side info is error-free.

    The noise stream is fully determined by cfg.seed via a counter-based
    generator, so identical (frame, cfg) pairs produce bit-identical output
    and parallel trials can derive independent streams from distinct seeds.
    """
    if frame.symbols.size == 0:
        return frame
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    noisy = frame.symbols + noise_sigma(cfg.snr_db) * rng.standard_normal(frame.symbols.size)
    return dataclasses.replace(frame, symbols=noisy)


def equalize(frame: SymbolFrame, snr_db: float) -> SymbolFrame:
    """Receiver-side linear MMSE scaling for unit-power symbols in white noise.

    Shrinks received symbols by 1 / (1 + sigma^2); without it, spending more
    bandwidth at SNR below 0 dB adds more noise energy than signal energy and
    reconstruction quality degrades as the rate grows.
    """
    if frame.symbols.size == 0:
        return frame
    weight = 1.0 / (1.0 + noise_sigma(snr_db) ** 2)
    return dataclasses.replace(frame, symbols=weight * frame.symbols)
