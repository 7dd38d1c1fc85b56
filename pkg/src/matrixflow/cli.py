"""Command-line sweeps emitting deterministic CSV/JSON.

Exit codes: 0 success, 2 usage or config error, 3 simulation error.
MATRIXFLOW_CONFIG is the fallback for --config.  Sweep points may run in
parallel (--jobs); rows are sorted by their declared key before writing, so
the output bytes never depend on scheduling.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys as _sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .block_layout import parse_dtype, pack_a, pack_b
from .engine import run_baseline_gemm, run_gemm
from .errors import ConfigError, InvalidConfig, MatrixFlowError, UnknownModel
from .gemm_core import GemmShape
from .sysmodel import LinkConfig, SystemConfig, load_system_config, parse_mode
from .workload import lookup, run_transformer

DEFAULT_SIZES = (64, 128, 256, 512, 1024, 2048)

PCIE_CONFIGS = (  # label, lanes, aggregate Gb/s
    ("16x64", 16, 64.0),
    ("4x16", 4, 16.0),
    ("4x5", 4, 5.0),
)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _write_csv(header, rows, out_path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _emit(buf.getvalue(), out_path)


def _emit(text: str, out_path) -> None:
    if out_path is None:
        _sys.stdout.write(text)
    else:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)


def _load_config(path) -> SystemConfig:
    path = path or os.environ.get("MATRIXFLOW_CONFIG")
    if path is None:
        return SystemConfig()
    return load_system_config(path)


def _random_square(size: int, dtype, tag: str):
    rng = np.random.default_rng(zlib.crc32(f"{tag}/{size}/{dtype.kind}".encode()))
    if dtype.is_integer:
        return rng.integers(-8, 9, size=(size, size)).astype(dtype.np)
    return rng.uniform(-1.0, 1.0, size=(size, size)).astype(dtype.np)


def _gemm_point(size: int, dtype, sys_cfg: SystemConfig):
    a = pack_a(_random_square(size, dtype, "gemm-a"), dtype, sys_cfg.array_dim)
    b = pack_b(_random_square(size, dtype, "gemm-b"), dtype, sys_cfg.array_dim)
    _, rep = run_gemm(a, b, sys_cfg)
    baseline = run_baseline_gemm(GemmShape(size, size, size), dtype, sys_cfg.cpu)
    return (
        size, sys_cfg.mode.value, dtype.kind, rep.total_ns, baseline,
        baseline / rep.total_ns, rep.bytes_moved, rep.energy_mj,
    )


def cmd_gemm_sweep(args) -> int:
    sys_cfg = _load_config(args.config)
    if args.mode:
        sys_cfg = replace(sys_cfg, mode=parse_mode(args.mode))
    dtype = parse_dtype(args.dtype)
    sizes = args.sizes or list(DEFAULT_SIZES)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda s: _gemm_point(s, dtype, sys_cfg), sizes))
    rows.sort(key=lambda r: r[0])
    _write_csv(
        ("size", "mode", "dtype", "total_ns", "baseline_ns", "speedup",
         "bytes_moved", "energy_mj"),
        rows, args.out,
    )
    return 0


def cmd_pcie_sweep(args) -> int:
    sys_cfg = _load_config(args.config)
    dtype = parse_dtype(args.dtype)
    size = args.size

    def point(entry):
        label, lanes, gbps = entry
        link = LinkConfig.from_aggregate(
            lanes, gbps,
            efficiency=sys_cfg.link.efficiency,
            base_latency_ns=sys_cfg.link.base_latency_ns,
            max_payload_bytes=sys_cfg.link.max_payload_bytes,
        )
        cfg = replace(sys_cfg, link=link)
        a = pack_a(_random_square(size, dtype, "pcie-a"), dtype, cfg.array_dim)
        b = pack_b(_random_square(size, dtype, "pcie-b"), dtype, cfg.array_dim)
        _, rep = run_gemm(a, b, cfg)
        return (label, lanes, gbps, size, dtype.kind, sys_cfg.mode.value,
                rep.total_ns, rep.bytes_moved)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(point, PCIE_CONFIGS))
    order = {entry[0]: n for n, entry in enumerate(PCIE_CONFIGS)}
    rows.sort(key=lambda r: order[r[0]])
    _write_csv(
        ("link", "lanes", "gbps", "size", "dtype", "mode", "total_ns",
         "bytes_moved"),
        rows, args.out,
    )
    return 0


def cmd_transformer(args) -> int:
    sys_cfg = _load_config(args.config)
    if args.mode:
        sys_cfg = replace(sys_cfg, mode=parse_mode(args.mode))
    dtype = parse_dtype(args.dtype)
    config = lookup(args.model, dtype=dtype, seq_len=args.seq_len)
    result = run_transformer(config, sys_cfg, accelerated=not args.baseline)
    _emit(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    if args.breakdown_csv:
        _emit(result.breakdown_csv(), args.breakdown_csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matrixflow",
        description="Deterministic model of a page-blocked GEMM accelerator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="system config JSON (or MATRIXFLOW_CONFIG)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel sweep points (output is order-independent)")

    p = sub.add_parser("gemm-sweep", help="square GEMM size sweep")
    common(p)
    p.add_argument("--sizes", type=_parse_sizes, default=None,
                   help="comma-separated sizes, default 64,...,2048")
    p.add_argument("--dtype", default="int8")
    p.add_argument("--mode", choices=("dc", "dm"), default=None)
    p.set_defaults(func=cmd_gemm_sweep)

    p = sub.add_parser("pcie-sweep", help="link configuration sweep")
    common(p)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--dtype", default="int8")
    p.set_defaults(func=cmd_pcie_sweep)

    p = sub.add_parser("transformer", help="whole-model run with breakdown")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dtype", default="int32")
    p.add_argument("--mode", choices=("dc", "dm"), default=None)
    p.add_argument("--seq-len", type=int, default=None)
    p.add_argument("--baseline", action="store_true",
                   help="time the model on the CPU cost model instead")
    p.add_argument("--breakdown-csv", default=None,
                   help="also write the per-label breakdown as CSV")
    p.set_defaults(func=cmd_transformer)
    return parser


def _parse_sizes(text: str):
    try:
        sizes = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError(f"sizes must be positive, got {text!r}")
    return sizes


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidConfig, UnknownModel) as exc:
        print(f"matrixflow: {exc}", file=_sys.stderr)
        return 2
    except MatrixFlowError as exc:
        print(f"matrixflow: simulation error: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
