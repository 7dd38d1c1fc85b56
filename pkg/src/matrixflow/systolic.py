"""Functional and cycle model of the 16x16 output-stationary MAC array.

The array streams one W x L block of the left operand against one L x W
block of the right operand; partial sums stay inside the PEs.  The timing
model is a single assumption:

    cycles(L) = L + fill_skew + drain = L + (W - 1) + W

L beats of streaming, W-1 cycles of input skew fill, and W cycles to drain
the result column-by-column into the output buffer.  Drain of one block is
not overlapped with the next block's fill.  Both skew terms are plain
config fields, so the assumption is overridable.

Per-dtype frequency, power and area come from a synthesis table shipped as
JSON next to this package; pass a path to load_ppa_table to override it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .block_layout import DEFAULT_ARRAY_DIM, DType, _make_dtypes
from .errors import GeometryMismatch, InvalidConfig
from .gemm_core import multi_acc


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry and skew of the MAC array for one element type."""

    dtype: DType
    dim: int = DEFAULT_ARRAY_DIM
    fill_skew: int = field(default=-1)
    drain: int = field(default=-1)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidConfig(f"array dim must be >= 1, got {self.dim}")
        if self.fill_skew < 0:
            object.__setattr__(self, "fill_skew", self.dim - 1)
        if self.drain < 0:
            object.__setattr__(self, "drain", self.dim)

    @property
    def cycle_ns(self) -> float:
        return 1e9 / self.dtype.array_freq_hz


def sa_cycles(L: int, cfg: ArrayConfig) -> int:
    """Cycles to stream one block of length L through the array."""
    return L + cfg.fill_skew + cfg.drain


def sa_compute_block(a_block, b_block, acc, cfg: ArrayConfig):
    """Run one block through the array: multi_acc semantics plus a cycle
    count.  The timing model never changes values."""
    a_block = np.asarray(a_block)
    if a_block.ndim != 2 or a_block.shape[0] != cfg.dim:
        raise GeometryMismatch(
            f"a_block {a_block.shape} does not match array dim {cfg.dim}"
        )
    acc = multi_acc(a_block, b_block, acc, cfg.dtype)
    return acc, sa_cycles(a_block.shape[1], cfg)


def block_energy(dtype: DType, cycles: int) -> float:
    """Array energy in mJ: power (mW) x cycles / frequency (Hz)."""
    return dtype.array_power_mw * cycles / dtype.array_freq_hz


def load_ppa_table(path=None) -> dict:
    """Per-kind {freq_hz, power_mw, area_mm2}; builtin table if path is None."""
    if path is None:
        from .block_layout import _load_builtin_ppa

        return _load_builtin_ppa()
    with open(path) as fh:
        table = json.load(fh)
    required = {"int8", "int16", "int32", "fp16", "fp32"}
    missing = required - set(table)
    if missing:
        raise InvalidConfig(f"PPA table {path} missing kinds: {sorted(missing)}")
    return table


def dtypes_from_ppa(table: dict) -> dict:
    """Build the five element types from an (overridden) PPA table."""
    return _make_dtypes(table)
