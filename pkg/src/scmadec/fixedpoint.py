"""Signed fixed-point formats with round-to-nearest and saturation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class FixedPointFormat:
    """Two's-complement format with ``total_bits`` bits, ``frac_bits`` of them fractional."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.total_bits < 2:
            raise ValueError("need at least 2 bits")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError("frac_bits must lie in [0, total_bits)")

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return -(2 ** (self.total_bits - 1)) * self.step

    @property
    def max_value(self) -> float:
        return (2 ** (self.total_bits - 1) - 1) * self.step

    def to_int(self, value) -> np.ndarray:
        x = np.asarray(value, dtype=np.float64)
        lo, hi = -(2 ** (self.total_bits - 1)), 2 ** (self.total_bits - 1) - 1
        with np.errstate(invalid="ignore", over="ignore"):
            code = np.floor(x * 2.0**self.frac_bits + 0.5)
        code = np.where(np.isnan(code), 0.0, code)
        return np.clip(code, lo, hi).astype(np.int64)

    def __call__(self, value):
        return quantize(value, self)


def quantize(value, fmt: FixedPointFormat):
    """Round to the nearest code (ties upward) and saturate; complex values per component.

    Infinities saturate to the format bounds; NaN maps to zero.
    """
    if np.iscomplexobj(value):
        v = np.asarray(value)
        return quantize(v.real, fmt) + 1j * quantize(v.imag, fmt)
    out = fmt.to_int(value) * fmt.step
    if np.ndim(value) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Quantization:
    """Formats for decoder inputs (received samples, codebook) and all intermediate values."""

    input: FixedPointFormat = FixedPointFormat(8, 5)
    intermediate: FixedPointFormat = FixedPointFormat(16, 9)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Quantization":
        return cls(FixedPointFormat(**doc["input"]), FixedPointFormat(**doc["intermediate"]))
