"""Transmit chain from user symbols to noisy received samples.

Random draws come from a counter-based Philox stream. Frame ``i`` always
consumes the same block of raw words, so results do not depend on how frames
are batched or dispatched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .system import ScmaSystem


def symbols_to_bits(symbols: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    """Natural binary labels, most significant bit first. Shape ``(..., J * bps)``."""
    symbols = np.asarray(symbols, dtype=np.int64)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    bits = (symbols[..., None] >> shifts) & 1
    return bits.reshape(*symbols.shape[:-1], -1).astype(np.uint8)


def bits_to_symbols(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    grouped = bits.reshape(*bits.shape[:-1], -1, bits_per_symbol)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return (grouped * weights).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class Frame:
    """Per-user symbol indices for one channel use."""

    symbols: np.ndarray

    @classmethod
    def from_bits(cls, bits, bits_per_symbol: int) -> "Frame":
        return cls(bits_to_symbols(bits, bits_per_symbol))

    def bits(self, bits_per_symbol: int) -> np.ndarray:
        return symbols_to_bits(self.symbols, bits_per_symbol)


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    y: np.ndarray
    h: np.ndarray
    N0: float
    distributed: bool = False

    def __post_init__(self):
        if np.shape(self.y) != np.shape(self.h):
            raise ValueError("y and h must have the same length")
        if not self.N0 > 0:
            raise ValueError(f"N0 must be positive, got {self.N0}")


def encode(system: ScmaSystem, symbols) -> np.ndarray:
    """Map symbol indices to codewords.

    ``symbols`` has shape ``(J,)`` or ``(B, J)``; the result has shape
    ``(..., J, K)``.
    """
    symbols = np.asarray(symbols.symbols if isinstance(symbols, Frame) else symbols)
    if symbols.shape[-1] != system.J:
        raise ValueError(f"expected {system.J} symbols per frame, got {symbols.shape[-1]}")
    if np.any(symbols < 0) or np.any(symbols >= system.M):
        raise IndexError(f"symbol index outside [0, {system.M})")
    cb = system.codebook
    return cb[np.arange(system.J), symbols]


def superpose(codewords: np.ndarray) -> np.ndarray:
    return codewords.sum(axis=-2)


def complex_noise(N0: float, normals: np.ndarray) -> np.ndarray:
    """Complex Gaussian noise with variance ``N0`` from ``(..., 2)`` standard normals."""
    return np.sqrt(N0 / 2) * (normals[..., 0] + 1j * normals[..., 1])


def multiplex(codewords: np.ndarray, h, N0: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Synchronous layer multiplexing over a shared channel: ``diag(h) sum_j x_j + n``.

    ``N0 = 0`` or ``rng=None`` disables the noise.
    """
    s = superpose(np.asarray(codewords))
    y = np.asarray(h) * s
    if rng is not None and N0 > 0:
        y = y + complex_noise(N0, rng.standard_normal(y.shape + (2,)))
    return y


def ebn0_to_n0(system: ScmaSystem, ebn0_db: float) -> float:
    """Noise density for a given Eb/N0, with ``Eb = E_res * K / (J log2 M)``."""
    return system.energy_per_bit() / 10 ** (ebn0_db / 10)


# -- distributed matrix ---------------------------------------------------------


class DistributedMatrix:
    """Invertible ``K x K`` resource mixing applied before the channel and undone after it."""

    def __init__(self, D, *, rcond: float = 1e-10):
        D = np.array(D, dtype=complex)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError(f"distributed matrix must be square, got shape {D.shape}")
        s = np.linalg.svd(D, compute_uv=False)
        if s[-1] <= rcond * s[0]:
            raise ValueError("distributed matrix is singular")
        self.D = D
        self.inverse = np.linalg.inv(D)

    @property
    def K(self) -> int:
        return self.D.shape[0]

    @classmethod
    def identity(cls, K: int) -> "DistributedMatrix":
        return cls(np.eye(K))

    @classmethod
    def hadamard(cls, K: int) -> "DistributedMatrix":
        """Orthonormal ``H_K / sqrt(K)``; ``K`` must be a power of two."""
        return cls(hadamard(K) / np.sqrt(K))

    @classmethod
    def load(cls, path: str | Path) -> "DistributedMatrix":
        """Read ``{"matrix": [[[re, im], ...], ...]}``; real entries may be plain numbers."""
        doc = json.loads(Path(path).read_text())
        raw = np.asarray(doc["matrix"], dtype=float)
        if raw.ndim == 3:
            raw = raw[..., 0] + 1j * raw[..., 1]
        return cls(raw)


def apply_distributed_matrix(y: np.ndarray, D: DistributedMatrix, direction: str = "forward") -> np.ndarray:
    """Multiply resource vectors (last axis) by ``D`` or its inverse."""
    y = np.asarray(y)
    if y.shape[-1] != D.K:
        raise ValueError(f"vector length {y.shape[-1]} does not match matrix size {D.K}")
    if direction == "forward":
        A = D.D
    elif direction == "inverse":
        A = D.inverse
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return y @ A.T


# -- frame-indexed random stream ----------------------------------------------


class FrameStream:
    """Counter-based randomness keyed by ``(seed, frame_index)``.

    Each frame reads a fixed block of Philox words: ``J`` for the symbols,
    ``2K`` for noise and ``2K`` for optional Rayleigh fading.
    """

    def __init__(self, system: ScmaSystem, seed: int):
        self.system = system
        self.seed = int(seed)
        J, K = system.J, system.K
        self._layout = (J, 2 * K, 2 * K)
        self.words_per_frame = -(-sum(self._layout) // 4) * 4

    def _uniforms(self, start: int, count: int) -> np.ndarray:
        W = self.words_per_frame
        bitgen = np.random.Philox(key=self.seed, counter=start * W // 4)
        raw = bitgen.random_raw(count * W).reshape(count, W)
        return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def draw(self, start: int, count: int) -> dict[str, np.ndarray]:
        """Symbols ``(B, J)``, standard normals for noise ``(B, K, 2)`` and fading ``(B, K, 2)``."""
        J, nk, _ = self._layout
        K = nk // 2
        u = self._uniforms(start, count)
        symbols = np.floor(u[:, :J] * self.system.M).astype(np.int64)
        noise = _box_muller(u[:, J : J + 2 * K]).reshape(count, K, 2)
        fading = _box_muller(u[:, J + 2 * K : J + 4 * K]).reshape(count, K, 2)
        return {"symbols": symbols, "noise": noise, "fading": fading}


def _box_muller(u: np.ndarray) -> np.ndarray:
    u1 = 1.0 - u[:, 0::2]
    u2 = u[:, 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty_like(u)
    out[:, 0::2] = r * np.cos(2 * np.pi * u2)
    out[:, 1::2] = r * np.sin(2 * np.pi * u2)
    return out


@dataclass(frozen=True, eq=False)
class FrameBatch:
    symbols: np.ndarray
    y: np.ndarray
    h: np.ndarray | None
    N0: float


def transmit_batch(
    system: ScmaSystem,
    stream: FrameStream,
    start: int,
    count: int,
    N0: float,
    *,
    fading: str = "awgn",
    distributed: DistributedMatrix | None = None,
) -> FrameBatch:
    """Generate, encode and transmit frames ``start .. start + count - 1``.

    With a distributed matrix the receiver output is already recovered
    (``D^-1`` applied after channel inversion), so ``h`` is returned as ``None``.
    """
    draws = stream.draw(start, count)
    s = superpose(encode(system, draws["symbols"]))
    if distributed is not None:
        s = apply_distributed_matrix(s, distributed, "forward")
    if fading == "awgn":
        h = None
        y = s + complex_noise(N0, draws["noise"])
    elif fading == "rayleigh":
        h = complex_noise(1.0, draws["fading"])
        y = h * s + complex_noise(N0, draws["noise"])
    else:
        raise ValueError(f"unknown fading mode {fading!r}")
    if distributed is not None:
        if h is not None:
            y = y / h
            h = None
        y = apply_distributed_matrix(y, distributed, "inverse")
    return FrameBatch(draws["symbols"], y, h, N0)
