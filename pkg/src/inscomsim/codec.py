"""Deterministic block-transform reference codec.

Analysis splits the image into 8x8 blocks and applies the orthonormal 2-D
type-II cosine transform to centered samples. An activity proxy per block
drives coefficient-count allocation under the bandwidth budget eta, the kept
coefficients are emitted in zig-zag order as power-normalized analog symbols,
and synthesis inverts the chain. Blocks untouched by the task mask are never
transmitted and decode to zero-valued pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft as spfft

from .filtering import Mask
from .scene import Image

BLOCK_SIZE = 8
COEFFS_PER_BLOCK = BLOCK_SIZE * BLOCK_SIZE
CENTER_OFFSET = 128.0

VARIABLE = "variable"
UNIFORM = "uniform"
SCHEMES = (VARIABLE, UNIFORM)

# Side-information layout: one coded flag per block, a coefficient count per
# coded block, and the normalization gain.
FLAG_BITS_PER_BLOCK = 1
K_BITS_PER_CODED_BLOCK = 6
GAIN_BITS = 32


class NoCodedBlocksError(ValueError):
    """Variable-rate allocation requires at least one coded block."""


class MalformedSideInfoError(ValueError):
    """Symbol count or side metadata inconsistent with the frame layout."""


def _zigzag_flat_indices(n: int = BLOCK_SIZE) -> np.ndarray:
    """Row-major flat index of each scan position, low to high frequency."""
    order = []
    for s in range(2 * n - 1):
        diag = [(i, s - i) for i in range(max(0, s - n + 1), min(s, n - 1) + 1)]
        if s % 2 == 0:
            diag.reverse()  # even diagonals run bottom-left to top-right
        order.extend(diag)
    return np.array([i * n + j for i, j in order], dtype=np.intp)


ZIGZAG = _zigzag_flat_indices()


@dataclass(frozen=True)
class RateConfig:
    """Rate-control settings for one trial."""

    eta: float
    block_size: int = BLOCK_SIZE
    k_min: int = 1
    scheme: str = VARIABLE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be a positive finite real, got {self.eta}")
        if self.block_size != BLOCK_SIZE:
            raise ValueError(f"block_size is fixed at {BLOCK_SIZE}")
        if not (1 <= self.k_min <= COEFFS_PER_BLOCK):
            raise ValueError(f"k_min must lie in [1, {COEFFS_PER_BLOCK}], got {self.k_min}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BlockLatents:
    """Per-channel 8x8 transform coefficients plus per-block coded flags."""

    coeffs: np.ndarray  # (channels, blocks_y, blocks_x, 8, 8) float64
    coded: np.ndarray  # (blocks_y, blocks_x) bool
    original_size: tuple[int, int]  # (width, height) before padding

    def __post_init__(self) -> None:
        if self.coeffs.ndim != 5 or self.coeffs.shape[-2:] != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(f"coeffs must be (C, by, bx, 8, 8), got {self.coeffs.shape}")
        if self.coded.shape != self.coeffs.shape[1:3]:
            raise ValueError("coded flags must match the block grid")
        object.__setattr__(self, "coeffs", _frozen(np.asarray(self.coeffs, dtype=np.float64)))
        object.__setattr__(self, "coded", _frozen(np.asarray(self.coded, dtype=bool)))

    @property
    def channels(self) -> int:
        return self.coeffs.shape[0]

    @property
    def blocks_y(self) -> int:
        return self.coeffs.shape[1]

    @property
    def blocks_x(self) -> int:
        return self.coeffs.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.channels, self.blocks_y, self.blocks_x)

    @property
    def coded_count(self) -> int:
        return int(self.coded.sum())


@dataclass(frozen=True, eq=False)
class RateAllocation:
    """Coefficients to transmit per block; zero where a block is not coded."""

    k: np.ndarray  # (blocks_y, blocks_x) int64
    entropy: np.ndarray  # (blocks_y, blocks_x) float64 activity proxy
    coded: np.ndarray  # (blocks_y, blocks_x) bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", _frozen(np.asarray(self.k, dtype=np.int64)))
        object.__setattr__(self, "entropy", _frozen(np.asarray(self.entropy, dtype=np.float64)))
        object.__setattr__(self, "coded", _frozen(np.asarray(self.coded, dtype=bool)))

    @classmethod
    def empty(cls, grid_shape: tuple[int, int]) -> "RateAllocation":
        return cls(
            k=np.zeros(grid_shape, dtype=np.int64),
            entropy=np.zeros(grid_shape, dtype=np.float64),
            coded=np.zeros(grid_shape, dtype=bool),
        )


@dataclass(frozen=True, eq=False)
class SideInfo:
    """Error-free receiver metadata: coded flags, per-block counts, gain."""

    coded: np.ndarray
    k: np.ndarray
    gain: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "coded", _frozen(np.asarray(self.coded, dtype=bool)))
        object.__setattr__(self, "k", _frozen(np.asarray(self.k, dtype=np.int64)))


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    """Power-normalized real channel symbols plus side information."""

    symbols: np.ndarray
    gain: float
    side_info: SideInfo
    side_bits: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "symbols", _frozen(np.asarray(self.symbols, dtype=np.float64).ravel())
        )


def _pad_to_blocks(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape[:2]
    pad_h = (-h) % BLOCK_SIZE
    pad_w = (-w) % BLOCK_SIZE
    if pad_h == 0 and pad_w == 0:
        return arr
    pad_spec = ((0, pad_h), (0, pad_w)) + ((0, 0),) * (arr.ndim - 2)
    return np.pad(arr, pad_spec, mode="edge")


def _to_blocks(planes: np.ndarray) -> np.ndarray:
    """(H, W, C) -> (C, by, bx, 8, 8), H and W multiples of the block size."""
    h, w, c = planes.shape
    by, bx = h // BLOCK_SIZE, w // BLOCK_SIZE
    return (
        planes.transpose(2, 0, 1)
        .reshape(c, by, BLOCK_SIZE, bx, BLOCK_SIZE)
        .swapaxes(2, 3)
    )


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    """(C, by, bx, 8, 8) -> (H, W, C)."""
    c, by, bx = blocks.shape[:3]
    return (
        blocks.swapaxes(2, 3)
        .reshape(c, by * BLOCK_SIZE, bx * BLOCK_SIZE)
        .transpose(1, 2, 0)
    )


def analysis(img: Image, mask: Optional[Mask] = None) -> BlockLatents:
    """Blockwise orthonormal cosine transform of the centered image.

    A block is flagged coded when no mask is given or the mask sets at least
    one bit inside it. Dimensions are padded up to block multiples by edge
    replication; the original size is recorded for synthesis-side cropping.
    """
    if mask is not None and (mask.width, mask.height) != (img.width, img.height):
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not cover image {img.width}x{img.height}"
        )
    planes = _pad_to_blocks(img.pixels).astype(np.float64) - CENTER_OFFSET
    blocks = _to_blocks(planes)
    coeffs = spfft.dctn(blocks, type=2, norm="ortho", axes=(-2, -1))
    by, bx = blocks.shape[1:3]
    if mask is None:
        coded = np.ones((by, bx), dtype=bool)
    else:
        padded_bits = _pad_to_blocks(mask.bits)
        coded = (
            padded_bits.reshape(by, BLOCK_SIZE, bx, BLOCK_SIZE).any(axis=(1, 3))
        )
    return BlockLatents(coeffs=coeffs, coded=coded, original_size=(img.width, img.height))


def allocate(lat: BlockLatents, cfg: RateConfig) -> RateAllocation:
    """Choose per-block coefficient counts under the bandwidth budget.

    variable: k_b = clamp(round(eta * 64 * H_b / H_max), k_min, 64) with
    H_b = log2(1 + AC energy of block b summed over channels) and H_max the
    maximum over coded blocks (all-k_min when H_max is zero).
    uniform: every block coded at clamp(round(eta * 64), k_min, 64), mask
    ignored.
    """
    sq = lat.coeffs**2
    ac_energy = sq.sum(axis=(0, 3, 4)) - sq[:, :, :, 0, 0].sum(axis=0)
    entropy = np.log2(1.0 + ac_energy)

    full = float(COEFFS_PER_BLOCK)
    if cfg.scheme == UNIFORM:
        k_all = int(np.clip(np.rint(cfg.eta * full), cfg.k_min, COEFFS_PER_BLOCK))
        grid = np.full(lat.coded.shape, k_all, dtype=np.int64)
        return RateAllocation(k=grid, entropy=entropy, coded=np.ones_like(lat.coded))

    coded = lat.coded
    if not coded.any():
        raise NoCodedBlocksError("variable-rate allocation needs at least one coded block")
    h_max = float(entropy[coded].max())
    if h_max <= 0.0:
        k = np.full(coded.shape, cfg.k_min, dtype=np.int64)
    else:
        k = np.clip(
            np.rint(cfg.eta * full * entropy / h_max), cfg.k_min, COEFFS_PER_BLOCK
        ).astype(np.int64)
    k = np.where(coded, k, 0)
    return RateAllocation(k=k, entropy=entropy, coded=coded.copy())


def _zigzag_cube(coeffs: np.ndarray) -> np.ndarray:
    """(C, by, bx, 8, 8) -> (by, bx, C, 64) in scan order."""
    c, by, bx = coeffs.shape[:3]
    flat = coeffs.reshape(c, by, bx, COEFFS_PER_BLOCK)[..., ZIGZAG]
    return np.moveaxis(flat, 0, 2)


def _take_mask(ks: np.ndarray, channels: int) -> np.ndarray:
    """Selection mask over (n_coded, channels, 64): first k_b scan positions."""
    per_block = np.arange(COEFFS_PER_BLOCK) < ks[:, None]
    return np.broadcast_to(per_block[:, None, :], (ks.size, channels, COEFFS_PER_BLOCK))


def encode(lat: BlockLatents, alloc: RateAllocation) -> SymbolFrame:
    """Emit the kept coefficients as power-normalized analog symbols.

    Emission order is fixed: blocks row-major over the grid, channels within a
    block, zig-zag positions within a channel. The gain g satisfies
    mean(symbols^2) = 1 for any frame with nonzero energy; g = 1 otherwise.
    """
    zz = _zigzag_cube(np.asarray(lat.coeffs))
    coded_blocks = zz[alloc.coded]  # (n_coded, C, 64), row-major grid order
    ks = alloc.k[alloc.coded]
    u_raw = coded_blocks[_take_mask(ks, lat.channels)]
    energy = float(np.dot(u_raw, u_raw)) if u_raw.size else 0.0
    gain = math.sqrt(u_raw.size / energy) if energy > 0.0 else 1.0
    n_blocks = alloc.coded.size
    n_coded = int(alloc.coded.sum())
    side_bits = (
        n_blocks * FLAG_BITS_PER_BLOCK + n_coded * K_BITS_PER_CODED_BLOCK + GAIN_BITS
    )
    side = SideInfo(coded=alloc.coded.copy(), k=alloc.k.copy(), gain=gain)
    return SymbolFrame(symbols=gain * u_raw, gain=gain, side_info=side, side_bits=side_bits)


def synthesize(
    frame: SymbolFrame,
    lat_dims: tuple[int, int, int],
    cfg: RateConfig,
    original_size: tuple[int, int],
) -> np.ndarray:
    """Invert the symbol mapping to unclamped float pixels (H, W, C).

    Untransmitted coefficients are zero; uncoded blocks yield zero-valued
    pixels (they carry no content, not mid-gray). Kept separate from decode so
    distortion accounting is not polluted by 8-bit rounding.
    """
    channels, by, bx = lat_dims
    side = frame.side_info
    if side.coded.shape != (by, bx) or side.k.shape != (by, bx):
        raise MalformedSideInfoError(
            f"side info grid {side.coded.shape} does not match latents {(by, bx)}"
        )
    if frame.gain <= 0.0 or not math.isfinite(frame.gain):
        raise MalformedSideInfoError(f"gain must be a positive finite real, got {frame.gain}")
    ks = side.k[side.coded]
    expected = int(ks.sum()) * channels
    if frame.symbols.size != expected:
        raise MalformedSideInfoError(
            f"frame holds {frame.symbols.size} symbols, side info implies {expected}"
        )
    u = frame.symbols / frame.gain
    n_coded = ks.size
    scan = np.zeros((n_coded, channels, COEFFS_PER_BLOCK))
    scan[_take_mask(ks, channels)] = u
    cube = np.zeros((by, bx, channels, COEFFS_PER_BLOCK))
    cube[side.coded] = scan
    flat = np.zeros_like(cube)
    flat[..., ZIGZAG] = cube
    coeffs = np.moveaxis(flat, 2, 0).reshape(channels, by, bx, BLOCK_SIZE, BLOCK_SIZE)
    blocks = spfft.idctn(coeffs, type=2, norm="ortho", axes=(-2, -1)) + CENTER_OFFSET
    blocks[:, ~side.coded] = 0.0
    planes = _from_blocks(blocks)
    width, height = original_size
    return planes[:height, :width, :]


def decode(
    frame: SymbolFrame,
    lat_dims: tuple[int, int, int],
    cfg: RateConfig,
    original_size: tuple[int, int],
) -> Image:
    """Synthesize and quantize to an 8-bit image."""
    planes = synthesize(frame, lat_dims, cfg, original_size)
    return Image(np.clip(np.rint(planes), 0, 255).astype(np.uint8))
