"""Walk through the page-sized block layout for both operands.

Every block fills exactly one 4KB page, so one DMA request moves one block.
The left operand keeps row bands; the right operand is restructured so each
page holds 16 contiguous columns.
"""

import numpy as np

from matrixflow import DTYPES, INT8, get_block, pack_a, pack_b, unpack
from matrixflow.block_layout import block_geometry

print("=" * 64)
print("Block geometry per element type (W = 16 rows, one 4KB page)")
print("=" * 64)
for kind, dtype in DTYPES.items():
    geo = block_geometry(dtype)
    print(f"  {kind:>5}: {geo.W} x {geo.L:>3} elements "
          f"({geo.W * geo.L * dtype.byte_width} bytes)")

print()
print("Packing a 40 x 300 int8 matrix (not a block multiple):")
rng = np.random.default_rng(1)
dense = rng.integers(-50, 50, size=(40, 300)).astype(np.int8)
a = pack_a(dense, INT8)
print(f"  padded to {a.padded_rows} x {a.padded_cols}, "
      f"block grid {a.block_grid}, {a.n_blocks} pages")
print(f"  round trip exact: {np.array_equal(unpack(a), dense)}")

print()
print("The restructured right-operand page streams column-by-column:")
b_dense = rng.integers(-50, 50, size=(256, 16)).astype(np.int8)
b = pack_b(b_dense, INT8)
page = np.frombuffer(bytes(get_block(b, 0, 0)), dtype=np.int8)
col0 = page[:256]
print(f"  first 256 page bytes == dense column 0: "
      f"{np.array_equal(col0, b_dense[:, 0])}")
print(f"  page bytes == column-major dense: "
      f"{bytes(page) == b_dense.T.tobytes()}")
