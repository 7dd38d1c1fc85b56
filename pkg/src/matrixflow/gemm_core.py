"""Reference GEMMs and the page-blocked multiply.

Numeric contract per element type:

* integer kinds: operands widen to 32-bit, products and partial sums wrap
  modulo 2**32, one wrapping cast to the output width after the full
  k-reduction.  Wrapping addition is associative, so the blocked multiply
  is bit-identical to the naive one for every shape.
* float kinds: operands widen to float32, products and partial sums stay in
  float32 with strictly k-ascending accumulation per output element, one
  round-to-nearest-even cast at the end (float16 output only).

The int64 intermediate below is an implementation shortcut, not a semantic
widening: truncation to 32 bits commutes with wrapping sums, so accumulating
exact 64-bit products and truncating once equals the 32-bit wrapping chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .block_layout import BlockedMatrix, DType, Layout, result_tile_view
from .errors import DTypeMismatch, GeometryMismatch, LayoutMismatch, ShapeMismatch


@dataclass(frozen=True)
class GemmShape:
    M: int
    N: int
    K: int

    def __post_init__(self):
        if min(self.M, self.N, self.K) < 1:
            raise ShapeMismatch(f"GEMM dims must be >= 1, got {self}")

    @property
    def macs(self) -> int:
        return self.M * self.N * self.K


def _cast_result(acc: np.ndarray, dtype: DType) -> np.ndarray:
    # astype on integers is a C truncating cast; on floats it rounds to
    # nearest even.  Both match the single-final-cast rule.
    return acc.astype(dtype.np)


def naive_gemm(a, b, dtype: DType) -> np.ndarray:
    """Loop-order reference multiply defining the numeric semantics."""
    a = np.asarray(a, dtype=dtype.np)
    b = np.asarray(b, dtype=dtype.np)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    if dtype.is_integer:
        wide = a.astype(np.int64) @ b.astype(np.int64)
        return _cast_result(wide, dtype)
    a32 = a.astype(np.float32)
    b32 = b.astype(np.float32)
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=np.float32)
    for k in range(a.shape[1]):  # fixed k-ascending float32 accumulation
        acc += a32[:, k, None] * b32[None, k, :]
    return _cast_result(acc, dtype)


def multi_acc(a_block, b_block, res_acc, dtype: DType) -> np.ndarray:
    """Accumulate one W x L by L x W block product into res_acc, in place.

    res_acc holds widened accumulators (int32 or float32) and is never cast
    between k-iterations.
    """
    a_block = np.asarray(a_block)
    b_block = np.asarray(b_block)
    W, L = a_block.shape if a_block.ndim == 2 else (0, 0)
    if a_block.ndim != 2 or b_block.shape != (L, W) or res_acc.shape != (W, W):
        raise GeometryMismatch(
            f"expected (W,L),(L,W),(W,W); got {a_block.shape}, "
            f"{b_block.shape}, {res_acc.shape}"
        )
    if res_acc.dtype != dtype.acc_np:
        raise GeometryMismatch(
            f"accumulator dtype {res_acc.dtype} != {dtype.acc_np}"
        )
    if dtype.is_integer:
        wide = a_block.astype(np.int64) @ b_block.astype(np.int64)
        res_acc += wide.astype(np.int32)
    else:
        a32 = a_block.astype(np.float32)
        b32 = b_block.astype(np.float32)
        for l in range(L):
            res_acc += a32[:, l, None] * b32[None, l, :]
    return res_acc


def _check_operands(a: BlockedMatrix, b: BlockedMatrix) -> None:
    if a.layout is not Layout.A_ROW_BAND or b.layout is not Layout.B_RESTRUCTURED:
        raise LayoutMismatch(
            f"need A_ROW_BAND x B_RESTRUCTURED, got {a.layout} x {b.layout}"
        )
    if a.dtype is not b.dtype and a.dtype != b.dtype:
        raise DTypeMismatch(f"{a.dtype.kind} x {b.dtype.kind}")
    if a.logical_cols != b.logical_rows:
        raise ShapeMismatch(
            f"A is {a.logical_rows}x{a.logical_cols}, "
            f"B is {b.logical_rows}x{b.logical_cols}"
        )
    if a.geometry != b.geometry:
        raise GeometryMismatch(f"{a.geometry} != {b.geometry}")


def block_matrix_multiply(a: BlockedMatrix, b: BlockedMatrix) -> BlockedMatrix:
    """Blocked multiply: for each W x W output tile, sweep the k blocks,
    accumulate with multi_acc, cast once, store the tile."""
    _check_operands(a, b)
    geo = a.geometry
    dtype = a.dtype
    c = BlockedMatrix(
        a.logical_rows, b.logical_cols, dtype, Layout.A_ROW_BAND, geo.W
    )
    n_i, n_k = a.block_grid
    n_j = b.block_grid[0]
    acc = np.zeros((geo.W, geo.W), dtype=dtype.acc_np)
    for i in range(n_i):
        for j in range(n_j):
            acc[:] = 0
            for k in range(n_k):
                multi_acc(a.block_elems(i, k), b.block_elems(j, k), acc, dtype)
            result_tile_view(c, i, j)[:] = _cast_result(acc, dtype)
    return c
