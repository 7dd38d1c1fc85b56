"""Blocked multiply vs the loop reference, across element types.

Integer kinds wrap in 32-bit accumulators, so reordering the sum into
blocks is exact.  Float kinds accumulate in float32 with one final cast;
the demo shows the rounding error against a float64 oracle stays tiny.
"""

import numpy as np

from matrixflow import DTYPES, block_matrix_multiply, naive_gemm, pack_a, pack_b, unpack

rng = np.random.default_rng(2)
M, N, K = 200, 150, 170

print(f"C = A({M}x{K}) @ B({K}x{N}) per element type")
print("-" * 64)
for kind, dtype in DTYPES.items():
    if dtype.is_integer:
        info = np.iinfo(dtype.np)
        a = rng.integers(info.min, info.max + 1, size=(M, K)).astype(dtype.np)
        b = rng.integers(info.min, info.max + 1, size=(K, N)).astype(dtype.np)
    else:
        a = rng.uniform(-1, 1, size=(M, K)).astype(dtype.np)
        b = rng.uniform(-1, 1, size=(K, N)).astype(dtype.np)
    blocked = unpack(block_matrix_multiply(pack_a(a, dtype), pack_b(b, dtype)))
    reference = naive_gemm(a, b, dtype)
    if dtype.is_integer:
        print(f"  {kind:>5}: bit-identical to the loop reference: "
              f"{np.array_equal(blocked, reference)}")
    else:
        oracle = a.astype(np.float64) @ b.astype(np.float64)
        rel = np.abs(blocked - oracle) / np.maximum(1, np.abs(oracle))
        print(f"  {kind:>5}: max relative error vs float64 = {rel.max():.2e}")

print()
print("Wrapping semantics: int8 127*127 -> widened 16129, cast wraps to", end=" ")
c = naive_gemm(np.array([[127]], np.int8), np.array([[127]], np.int8), DTYPES["int8"])
print(int(c[0, 0]))
