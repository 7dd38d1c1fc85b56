"""Whole-transformer runs: the CPU baseline is GEMM-bound (the feed-forward
pair dominates), offloading flips the profile toward transfer and control."""

from matrixflow import SystemConfig, run_transformer
from matrixflow.workload import GEMM_LABELS, builtin_configs, lookup

cfg = SystemConfig()

print("Baseline (single-thread CPU model), bert-base:")
base = run_transformer(lookup("bert-base"), cfg, accelerated=False)
total = base.report.total_ns
print(f"  total {total / 1e9:.3f} s; GEMM share "
      f"{100 * base.gemm_ns / total:.2f}%")
for label in GEMM_LABELS:
    ns = sum(base.label_ns[label].values())
    print(f"  {label:>12}: {100 * ns / total:6.2f}%")

print()
print("Accelerated (Direct Cache), bert-base:")
acc = run_transformer(lookup("bert-base"), cfg, accelerated=True)
print(f"  total {acc.report.total_ns / 1e6:.2f} ms, "
      f"speedup {acc.report.speedup_vs_baseline:.1f}x")
for cat, ns in acc.report.category_ns.items():
    print(f"  {cat:>14}: {100 * ns / acc.report.total_ns:6.2f}%")

print()
print("Speedup across the builtin models:")
for name in builtin_configs():
    res = run_transformer(lookup(name), cfg, accelerated=True)
    print(f"  {name:>12}: {res.report.speedup_vs_baseline:7.1f}x "
          f"({res.report.total_ns / 1e6:8.2f} ms modeled)")
