"""End-to-end offloaded GEMM runs: where the time goes and how speedup
scales with size and access mode."""

from dataclasses import replace

import numpy as np

from matrixflow import INT8, SystemConfig, pack_a, pack_b, run_gemm
from matrixflow.sysmodel import AccessMode

rng = np.random.default_rng(5)
cfg = SystemConfig()


def square(size):
    a = rng.integers(-8, 9, size=(size, size)).astype(np.int8)
    b = rng.integers(-8, 9, size=(size, size)).astype(np.int8)
    return pack_a(a, INT8), pack_b(b, INT8)


print("int8 size sweep, Direct Cache:")
print(f"{'size':>6} {'total ms':>9} {'speedup':>8} {'MiB moved':>10} {'mJ':>8}")
for size in (256, 512, 1024):
    pa, pb = square(size)
    _, rep = run_gemm(pa, pb, cfg)
    print(f"{size:>6} {rep.total_ns / 1e6:>9.3f} {rep.speedup_vs_baseline:>8.1f} "
          f"{rep.bytes_moved / 2**20:>10.2f} {rep.energy_mj:>8.3f}")

print()
print("512^3 time by category, DC vs DM:")
pa, pb = square(512)
for mode in AccessMode:
    _, rep = run_gemm(pa, pb, replace(cfg, mode=mode))
    parts = ", ".join(
        f"{name} {ns / 1e6:.3f} ms" for name, ns in rep.category_ns.items() if ns
    )
    print(f"  {mode.value}: total {rep.total_ns / 1e6:.3f} ms ({parts})")

print()
print("Ledger for the DC run:")
_, rep = run_gemm(pa, pb, cfg)
for key, val in rep.ledger.to_dict().items():
    print(f"  {key:>20}: {val}")
