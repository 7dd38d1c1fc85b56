"""Cycle and energy model of the 16x16 MAC array.

One block takes L + 2W - 1 cycles: L streaming beats, W-1 of input skew,
W to drain results.  Integer builds clock at 1 GHz, float at 600 MHz, with
per-type power from the synthesis table.
"""

import numpy as np

from matrixflow import DTYPES, block_energy, sa_compute_block, sa_cycles
from matrixflow.block_layout import block_geometry
from matrixflow.gemm_core import multi_acc
from matrixflow.systolic import ArrayConfig

print(f"{'type':>6} {'L':>4} {'cycles':>7} {'ns/block':>9} {'mJ/1e6 cyc':>11}")
for kind, dtype in DTYPES.items():
    cfg = ArrayConfig(dtype)
    geo = block_geometry(dtype)
    cycles = sa_cycles(geo.L, cfg)
    print(f"{kind:>6} {geo.L:>4} {cycles:>7} {cycles * cfg.cycle_ns:>9.1f} "
          f"{block_energy(dtype, 1_000_000):>11.6f}")

print()
print("The timing wrapper never changes values:")
rng = np.random.default_rng(3)
dtype = DTYPES["int16"]
geo = block_geometry(dtype)
a = rng.integers(-300, 300, size=(geo.W, geo.L)).astype(np.int16)
b = rng.integers(-300, 300, size=(geo.L, geo.W)).astype(np.int16)
acc_timed = np.zeros((16, 16), np.int32)
acc_plain = np.zeros((16, 16), np.int32)
_, cycles = sa_compute_block(a, b, acc_timed, ArrayConfig(dtype))
multi_acc(a, b, acc_plain, dtype)
print(f"  int16 block: {cycles} cycles, outputs bit-equal: "
      f"{np.array_equal(acc_timed, acc_plain)}")
