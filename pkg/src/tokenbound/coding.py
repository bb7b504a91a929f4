"""Code-length accounting: prefix-free conversion, quantized-model code
length, and the per-step union-bound complexity."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "CodeLength",
    "prefix_code_length",
    "quantized_code_length",
    "union_complexity",
    "kraft_partial_sum",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class CodeLength:
    """Code length in raw bits, prefix-free bits, and nats.

    Lengths are reals, not integers: the bound algebra never requires
    integrality and fractional bits arise from entropy coding.
    """

    raw_bits: float
    prefix_bits: float

    def __post_init__(self):
        if self.raw_bits < 0.0:
            raise ValueError("raw_bits must be nonnegative")
        if self.prefix_bits < self.raw_bits:
            raise ValueError("prefix_bits must be >= raw_bits")

    @property
    def nats(self) -> float:
        return self.prefix_bits * LN2


def prefix_code_length(raw_bits: float) -> CodeLength:
    """Self-delimiting length L + 2*log2(L) + 1 for a raw L-bit code."""
    if raw_bits < 1.0:
        raise ValueError("raw_bits must be >= 1")
    return CodeLength(raw_bits, raw_bits + 2.0 * math.log2(raw_bits) + 1.0)


def quantized_code_length(num_params: int, bits_per_param: float) -> CodeLength:
    """b*N bits; the length is known ahead of time, so no prefix overhead."""
    if num_params < 1:
        raise ValueError("num_params must be >= 1")
    if bits_per_param <= 0.0:
        raise ValueError("bits_per_param must be positive")
    bits = bits_per_param * num_params
    return CodeLength(bits, bits)


def union_complexity(code_nats: float, n: int, grid_size: int, delta_fail: float) -> float:
    """Per-step complexity (code_nats + ln(grid_size/delta_fail)) / n."""
    if code_nats < 0.0:
        raise ValueError("code_nats must be nonnegative")
    if n < 1:
        raise ValueError("n must be >= 1")
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    if not 0.0 < delta_fail <= 1.0:
        raise ValueError("delta_fail must lie in (0, 1]")
    return (code_nats + math.log(grid_size / delta_fail)) / n


def kraft_partial_sum(max_raw_bits: int) -> float:
    """Partial sum of 2^L * 2^{-prefix(L)} over raw lengths L = 1..max.

    Converges to pi^2/12 < 1, certifying the prefix conversion.
    """
    if max_raw_bits < 1:
        raise ValueError("max_raw_bits must be >= 1")
    total = 0.0
    for length in range(1, max_raw_bits + 1):
        total += 2.0 ** (length - prefix_code_length(float(length)).prefix_bits)
    return total
