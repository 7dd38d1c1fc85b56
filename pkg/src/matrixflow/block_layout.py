"""Page-aligned block storage for GEMM operands.

A matrix is split into rectangular tiles that each fill exactly one 4096-byte
memory page, so a single DMA request fetches one whole tile:

* ``A_ROW_BAND``  - tile (i, k) covers dense rows [i*W, (i+1)*W) and columns
  [k*L, (k+1)*L), stored row-major inside the page.  Used for the left
  operand and for results.
* ``B_RESTRUCTURED`` - tile (j, k) covers dense rows [k*L, (k+1)*L) and
  columns [j*W, (j+1)*W), stored column-major inside the page (each of the
  W columns of length L is contiguous), so a page streams directly into the
  W column inputs of the compute array.

W is the compute-array dimension (16 by default) and L = page / (W * width)
is the unique tile length that fills a page.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from importlib import resources
import json

import numpy as np

from .errors import (
    BlockSizeMismatch,
    EmptyMatrix,
    IndexOutOfRange,
    InvalidConfig,
    NonDivisiblePage,
)

PAGE_BYTES = 4096
DEFAULT_ARRAY_DIM = 16


@dataclass(frozen=True)
class DType:
    """An element type plus the MAC-array constants tied to it.

    acc_rule is either "int32-wrap" (operands widen to 32-bit and partial
    sums wrap modulo 2**32) or "fp32-acc" (operands widen to float32 and
    partial sums accumulate in float32, cast once at the end).  The builtin
    five instances carry the published synthesis constants; tables loaded
    through systolic.load_ppa_table may substitute their own.
    """

    kind: str
    byte_width: int
    acc_rule: str
    array_freq_hz: float
    array_power_mw: float
    array_area_mm2: float

    def __post_init__(self):
        expected_width = {"int8": 1, "int16": 2, "int32": 4, "fp16": 2, "fp32": 4}
        if self.kind not in expected_width:
            raise InvalidConfig(f"unknown dtype kind {self.kind!r}")
        if self.byte_width != expected_width[self.kind]:
            raise InvalidConfig(
                f"{self.kind} byte_width must be {expected_width[self.kind]}, "
                f"got {self.byte_width}"
            )
        if self.array_freq_hz <= 0 or self.array_power_mw <= 0:
            raise InvalidConfig(
                f"{self.kind} frequency/power must be positive"
            )

    @property
    def is_integer(self) -> bool:
        return self.acc_rule == "int32-wrap"

    @property
    def np(self) -> np.dtype:
        return np.dtype(
            {"int8": np.int8, "int16": np.int16, "int32": np.int32,
             "fp16": np.float16, "fp32": np.float32}[self.kind]
        )

    @property
    def acc_np(self) -> np.dtype:
        return np.dtype(np.int32) if self.is_integer else np.dtype(np.float32)


def _load_builtin_ppa() -> dict:
    with resources.files("matrixflow.data").joinpath("ppa_table.json").open() as fh:
        return json.load(fh)


def _make_dtypes(ppa: dict) -> dict:
    widths = {"int8": 1, "int16": 2, "int32": 4, "fp16": 2, "fp32": 4}
    out = {}
    for kind, width in widths.items():
        row = ppa[kind]
        out[kind] = DType(
            kind=kind,
            byte_width=width,
            acc_rule="int32-wrap" if kind.startswith("int") else "fp32-acc",
            array_freq_hz=float(row["freq_hz"]),
            array_power_mw=float(row["power_mw"]),
            array_area_mm2=float(row["area_mm2"]),
        )
    return out


DTYPES = _make_dtypes(_load_builtin_ppa())
INT8 = DTYPES["int8"]
INT16 = DTYPES["int16"]
INT32 = DTYPES["int32"]
FP16 = DTYPES["fp16"]
FP32 = DTYPES["fp32"]

_ALIASES = {"float16": "fp16", "float32": "fp32", "f16": "fp16", "f32": "fp32"}


def parse_dtype(name: str) -> DType:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in DTYPES:
        raise InvalidConfig(
            f"unknown dtype {name!r}; expected one of {sorted(DTYPES)}"
        )
    return DTYPES[key]


class Layout(Enum):
    A_ROW_BAND = 0
    B_RESTRUCTURED = 1


@dataclass(frozen=True)
class BlockGeometry:
    """Tile shape: W rows by L columns, exactly one page."""

    W: int
    L: int
    page_bytes: int = PAGE_BYTES


def block_geometry(dtype: DType, W: int = DEFAULT_ARRAY_DIM) -> BlockGeometry:
    """Tile geometry for a dtype: L = page / (W * byte_width)."""
    if W <= 0:
        raise InvalidConfig(f"W must be positive, got {W}")
    if PAGE_BYTES % (W * dtype.byte_width) != 0:
        raise NonDivisiblePage(
            f"{PAGE_BYTES} bytes not divisible by W={W} x {dtype.byte_width}B"
        )
    return BlockGeometry(W=W, L=PAGE_BYTES // (W * dtype.byte_width))


def _ceil_to(n: int, m: int) -> int:
    return -(-n // m) * m


class BlockedMatrix:
    """A logical rows x cols matrix stored as page-sized blocks.

    pages is a (n_blocks, 4096) uint8 array; block_grid gives the extent of
    the two get_block indices (row bands x column bands for A_ROW_BAND,
    column bands x row bands for B_RESTRUCTURED, matching the multiply
    loop's access pattern).  Instances are safe to share read-only across
    threads; set_block is the only post-construction mutation path.
    """

    def __init__(self, logical_rows, logical_cols, dtype, layout, W=DEFAULT_ARRAY_DIM):
        if logical_rows < 1 or logical_cols < 1:
            raise EmptyMatrix(
                f"matrix dimensions must be >= 1, got {logical_rows}x{logical_cols}"
            )
        geo = block_geometry(dtype, W)
        self.logical_rows = int(logical_rows)
        self.logical_cols = int(logical_cols)
        self.dtype = dtype
        self.layout = layout
        self.geometry = geo
        if layout is Layout.A_ROW_BAND:
            self.padded_rows = _ceil_to(logical_rows, geo.W)
            self.padded_cols = _ceil_to(logical_cols, geo.L)
            self.block_grid = (self.padded_rows // geo.W, self.padded_cols // geo.L)
        else:
            self.padded_rows = _ceil_to(logical_rows, geo.L)
            self.padded_cols = _ceil_to(logical_cols, geo.W)
            self.block_grid = (self.padded_cols // geo.W, self.padded_rows // geo.L)
        n_blocks = self.block_grid[0] * self.block_grid[1]
        self.pages = np.zeros((n_blocks, PAGE_BYTES), dtype=np.uint8)

    @property
    def n_blocks(self) -> int:
        return self.pages.shape[0]

    @property
    def nbytes(self) -> int:
        return self.n_blocks * PAGE_BYTES

    def _flat(self, i: int, k: int) -> int:
        n0, n1 = self.block_grid
        if not (0 <= i < n0 and 0 <= k < n1):
            raise IndexOutOfRange(
                f"block ({i},{k}) outside grid {self.block_grid}"
            )
        return i * n1 + k

    def block_elems(self, i: int, k: int) -> np.ndarray:
        """Read-only element view of one block.

        Shape (W, L) for A_ROW_BAND pages; (L, W) for B_RESTRUCTURED, where
        [l, c] is dense element (k*L + l, j*W + c).  No copy.
        """
        geo = self.geometry
        page = self.pages[self._flat(i, k)].view(self.dtype.np)
        if self.layout is Layout.A_ROW_BAND:
            view = page.reshape(geo.W, geo.L)
        else:
            view = page.reshape(geo.W, geo.L).T
        view = view[:]
        view.flags.writeable = False
        return view


def pack_a(dense, dtype: DType, W: int = DEFAULT_ARRAY_DIM) -> BlockedMatrix:
    """Pack a dense row-major matrix into row-band pages (left operand)."""
    dense = np.asarray(dense, dtype=dtype.np)
    if dense.ndim != 2 or dense.shape[0] < 1 or dense.shape[1] < 1:
        raise EmptyMatrix(f"expected a non-empty 2-D matrix, got shape {dense.shape}")
    rows, cols = dense.shape
    m = BlockedMatrix(rows, cols, dtype, Layout.A_ROW_BAND, W)
    geo = m.geometry
    padded = np.zeros((m.padded_rows, m.padded_cols), dtype=dtype.np)
    padded[:rows, :cols] = dense
    # (bi, W, bk, L) -> (bi, bk, W, L): one row-major page per (bi, bk)
    tiles = padded.reshape(
        m.padded_rows // geo.W, geo.W, m.padded_cols // geo.L, geo.L
    ).transpose(0, 2, 1, 3)
    m.pages[:] = np.ascontiguousarray(tiles).reshape(m.n_blocks, -1).view(np.uint8)
    return m


def pack_b(dense, dtype: DType, W: int = DEFAULT_ARRAY_DIM) -> BlockedMatrix:
    """Pack a dense row-major matrix into horizontally restructured pages.

    Rows pad to a multiple of L, columns to a multiple of W.  Page (j, k)
    stores the L x W dense region column-by-column so the array's column
    inputs read contiguously.
    """
    dense = np.asarray(dense, dtype=dtype.np)
    if dense.ndim != 2 or dense.shape[0] < 1 or dense.shape[1] < 1:
        raise EmptyMatrix(f"expected a non-empty 2-D matrix, got shape {dense.shape}")
    rows, cols = dense.shape
    m = BlockedMatrix(rows, cols, dtype, Layout.B_RESTRUCTURED, W)
    geo = m.geometry
    padded = np.zeros((m.padded_rows, m.padded_cols), dtype=dtype.np)
    padded[:rows, :cols] = dense
    # (bk, L, bj, W) -> (bj, bk, W, L): page (j, k) holds W contiguous columns
    tiles = padded.reshape(
        m.padded_rows // geo.L, geo.L, m.padded_cols // geo.W, geo.W
    ).transpose(2, 0, 3, 1)
    m.pages[:] = np.ascontiguousarray(tiles).reshape(m.n_blocks, -1).view(np.uint8)
    return m


def unpack(m: BlockedMatrix) -> np.ndarray:
    """Dense row-major matrix with padding cropped; exact inverse of pack."""
    geo = m.geometry
    elems = m.pages.view(m.dtype.np).reshape(m.n_blocks, geo.W, geo.L)
    if m.layout is Layout.A_ROW_BAND:
        bi, bk = m.block_grid
        padded = (
            elems.reshape(bi, bk, geo.W, geo.L)
            .transpose(0, 2, 1, 3)
            .reshape(m.padded_rows, m.padded_cols)
        )
    else:
        bj, bk = m.block_grid
        padded = (
            elems.reshape(bj, bk, geo.W, geo.L)
            .transpose(1, 3, 0, 2)
            .reshape(m.padded_rows, m.padded_cols)
        )
    return padded[: m.logical_rows, : m.logical_cols].copy()


def get_block(m: BlockedMatrix, i: int, k: int) -> np.ndarray:
    """Read-only 4096-byte view of one page."""
    page = m.pages[m._flat(i, k)][:]
    page.flags.writeable = False
    return page


def set_block(m: BlockedMatrix, i: int, k: int, block) -> None:
    """Overwrite one page with exactly 4096 bytes."""
    data = np.frombuffer(bytes(block), dtype=np.uint8) if isinstance(
        block, (bytes, bytearray)
    ) else np.asarray(block, dtype=np.uint8).ravel()
    if data.size != PAGE_BYTES:
        raise BlockSizeMismatch(f"block must be {PAGE_BYTES} bytes, got {data.size}")
    m.pages[m._flat(i, k)] = data


def result_tile_view(m: BlockedMatrix, i: int, j: int) -> np.ndarray:
    """Writable W x W view of result tile (i, j) inside an A_ROW_BAND matrix.

    Tiles map left-to-right into pages: tile (i, j) lives in page
    (i, j*W // L) at column offset (j*W) % L, so L/W consecutive tiles share
    one page.
    """
    if m.layout is not Layout.A_ROW_BAND:
        raise InvalidConfig("result tiles only exist in A_ROW_BAND matrices")
    geo = m.geometry
    if not (0 <= i < m.block_grid[0] and 0 <= j < m.padded_cols // geo.W):
        raise IndexOutOfRange(f"tile ({i},{j}) outside result grid")
    page_k, offset = divmod(j * geo.W, geo.L)
    page = m.pages[m._flat(i, page_k)].view(m.dtype.np).reshape(geo.W, geo.L)
    return page[:, offset : offset + geo.W]


_HEADER = struct.Struct("<4sHBBQQH6x")  # magic, version, dtype, layout, rows, cols, W
_MAGIC = b"MXFB"
_VERSION = 1
_DTYPE_CODES = {"int8": 0, "int16": 1, "int32": 2, "fp16": 3, "fp32": 4}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}

assert _HEADER.size == 32


def dump(m: BlockedMatrix, path) -> None:
    """Write the 32-byte header plus raw pages, little-endian, bit-exact."""
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        _DTYPE_CODES[m.dtype.kind],
        m.layout.value,
        m.logical_rows,
        m.logical_cols,
        m.geometry.W,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(m.pages.tobytes())


def load(path) -> BlockedMatrix:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise InvalidConfig(f"{path}: truncated header")
        magic, version, dcode, lcode, rows, cols, W = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise InvalidConfig(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise InvalidConfig(f"{path}: unsupported version {version}")
        if dcode not in _CODE_DTYPES:
            raise InvalidConfig(f"{path}: unknown dtype code {dcode}")
        m = BlockedMatrix(rows, cols, DTYPES[_CODE_DTYPES[dcode]], Layout(lcode), W)
        body = fh.read(m.nbytes)
        if len(body) != m.nbytes:
            raise InvalidConfig(f"{path}: expected {m.nbytes} page bytes")
        m.pages[:] = np.frombuffer(body, dtype=np.uint8).reshape(m.n_blocks, PAGE_BYTES)
    return m
