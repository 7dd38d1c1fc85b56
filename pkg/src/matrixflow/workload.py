"""Transformer workloads: expand a model config into per-layer GEMM tasks
plus the element counts of the layers the CPU keeps (softmax, layernorm,
transpose, activation), then time everything.

In accelerated mode every GEMM instance is one offloaded run (one command
each, so control overhead scales with task count); weight matrices are
packed once per model as setup, excluded from the steady-state breakdown,
while activation packing recurs per task and is charged to non_gemm_cpu.
In baseline mode the same GEMMs run on the analytic CPU model instead.
Identical task shapes are simulated once and scaled by their instance
count; every run starts from cold accelerator-side state, so the scaling
is exact.
"""

from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .block_layout import DType, INT32, pack_a, pack_b
from .engine import CATEGORIES, SimReport, run_baseline_gemm, run_gemm
from .errors import InvalidConfig, UnknownModel
from .gemm_core import GemmShape
from .sysmodel import CpuCostModel, SystemConfig

__all__ = [
    "TransformerConfig", "GemmTask", "CpuCostModel", "TransformerReport",
    "GEMM_LABELS", "NON_GEMM_LABELS", "expand", "non_gemm_elements",
    "builtin_configs", "lookup", "run_transformer",
]

GEMM_LABELS = ("QKV", "AttnScores", "AttnContext", "OutProj", "FF1", "FF2")
NON_GEMM_LABELS = ("Softmax", "LayerNorm", "Transpose", "Activation")


@dataclass(frozen=True)
class TransformerConfig:
    name: str
    num_layers: int
    hidden: int
    heads: int
    ff_dim: int
    seq_len: int
    dtype: DType = INT32

    def __post_init__(self):
        for f in ("num_layers", "hidden", "heads", "ff_dim", "seq_len"):
            if getattr(self, f) < 1:
                raise InvalidConfig(f"{self.name}: {f} must be >= 1")
        if self.hidden % self.heads != 0:
            raise InvalidConfig(
                f"{self.name}: hidden {self.hidden} not divisible by "
                f"heads {self.heads}"
            )

    @property
    def d_head(self) -> int:
        return self.hidden // self.heads


@dataclass(frozen=True)
class GemmTask:
    """One GEMM kind within a layer; count is instances per layer and
    b_is_weight says whether the right operand is a pre-packed weight."""

    label: str
    shape: GemmShape
    count: int
    b_is_weight: bool

    @property
    def macs_per_layer(self) -> int:
        return self.count * self.shape.macs


def expand(config: TransformerConfig):
    """Per-layer GEMM task list in execution order."""
    s, h, d = config.seq_len, config.hidden, config.d_head
    return [
        GemmTask("QKV", GemmShape(M=s, N=h, K=h), 3, True),
        GemmTask("AttnScores", GemmShape(M=s, N=s, K=d), config.heads, False),
        GemmTask("AttnContext", GemmShape(M=s, N=d, K=s), config.heads, False),
        GemmTask("OutProj", GemmShape(M=s, N=h, K=h), 1, True),
        GemmTask("FF1", GemmShape(M=s, N=config.ff_dim, K=h), 1, True),
        GemmTask("FF2", GemmShape(M=s, N=h, K=config.ff_dim), 1, True),
    ]


def non_gemm_elements(config: TransformerConfig) -> dict:
    """Per-layer element counts of the CPU-side layers."""
    s, h = config.seq_len, config.hidden
    return {
        "Softmax": config.heads * s * s,
        "LayerNorm": 2 * s * h,
        "Transpose": config.heads * s * config.d_head,
        "Activation": s * config.ff_dim,
    }


def _load_model_table() -> dict:
    with resources.files("matrixflow.data").joinpath("models.json").open() as fh:
        return json.load(fh)


_BUILTINS = _load_model_table()


def builtin_configs(dtype: DType = INT32) -> dict:
    """The six shipped model configs; ff_dim is 4x hidden throughout."""
    return {
        name: TransformerConfig(
            name=name, ff_dim=4 * spec["hidden"], dtype=dtype, **spec
        )
        for name, spec in _BUILTINS.items()
    }


def lookup(name: str, dtype: DType = INT32, seq_len=None) -> TransformerConfig:
    table = builtin_configs(dtype)
    key = name.strip().lower()
    if key not in table:
        raise UnknownModel(
            f"unknown model {name!r}; known: {', '.join(sorted(table))}"
        )
    cfg = table[key]
    if seq_len is not None:
        cfg = replace(cfg, seq_len=int(seq_len))
    return cfg


@dataclass
class TransformerReport:
    """Whole-model run: SimReport plus the per-label breakdown."""

    model: str
    dtype_kind: str
    accelerated: bool
    report: SimReport
    label_ns: dict
    gemm_ns: float
    baseline_ns: float
    setup_pack_ns: float

    @property
    def breakdown(self) -> list:
        """Rows (label, category, ns, percent); percents sum to 100."""
        rows = []
        total = self.report.total_ns
        for label, cats in self.label_ns.items():
            for cat, ns in cats.items():
                if ns > 0.0:
                    rows.append(
                        {"label": label, "category": cat, "ns": ns,
                         "percent": 100.0 * ns / total}
                    )
        return rows

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dtype": self.dtype_kind,
            "accelerated": self.accelerated,
            "report": self.report.to_dict(),
            "gemm_ns": self.gemm_ns,
            "baseline_ns": self.baseline_ns,
            "setup_pack_ns": self.setup_pack_ns,
            "breakdown": self.breakdown,
        }

    def breakdown_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("label", "category", "ns", "percent"))
        for row in self.breakdown:
            writer.writerow(
                (row["label"], row["category"], repr(row["ns"]), repr(row["percent"]))
            )
        return buf.getvalue()


def _synthetic_operands(task: GemmTask, dtype: DType, model_name: str):
    # crc32 keeps the seed stable across processes (hash() is salted)
    seed = zlib.crc32(f"{model_name}/{task.label}".encode())
    rng = np.random.default_rng(seed)
    m, n, k = task.shape.M, task.shape.N, task.shape.K
    if dtype.is_integer:
        a = rng.integers(-4, 5, size=(m, k)).astype(dtype.np)
        b = rng.integers(-4, 5, size=(k, n)).astype(dtype.np)
    else:
        a = rng.uniform(-1.0, 1.0, size=(m, k)).astype(dtype.np)
        b = rng.uniform(-1.0, 1.0, size=(k, n)).astype(dtype.np)
    return a, b


def run_transformer(
    config: TransformerConfig, sys: SystemConfig, accelerated: bool = True
) -> TransformerReport:
    """Time one full model inference pass."""
    tasks = expand(config)
    cpu = sys.cpu
    dtype = config.dtype
    ns_per_cycle = 1e9 / cpu.cpu_freq_hz

    label_ns = {}
    setup_pack_ns = 0.0
    total_bytes = 0
    total_energy = 0.0

    baseline_gemm_ns = 0.0
    for task in tasks:
        instances = task.count * config.num_layers
        baseline_gemm_ns += instances * run_baseline_gemm(task.shape, dtype, cpu)

    for task in tasks:
        instances = task.count * config.num_layers
        cats = dict.fromkeys(CATEGORIES, 0.0)
        if accelerated:
            a, b = _synthetic_operands(task, dtype, config.name)
            packed_a = pack_a(a, dtype, sys.array_dim)
            packed_b = pack_b(b, dtype, sys.array_dim)
            _, rep = run_gemm(packed_a, packed_b, sys)
            for cat in CATEGORIES:
                cats[cat] += rep.category_ns[cat] * instances
            total_bytes += rep.bytes_moved * instances
            total_energy += rep.energy_mj * instances
            pack_elems = task.shape.M * task.shape.K
            if task.b_is_weight:
                setup_pack_ns += (
                    task.shape.K * task.shape.N * cpu.pack_cycles_per_element
                    * ns_per_cycle * instances
                )
            else:
                pack_elems += task.shape.K * task.shape.N
            cats["non_gemm_cpu"] += (
                pack_elems * cpu.pack_cycles_per_element * ns_per_cycle * instances
            )
        else:
            cats["gemm_compute"] += instances * run_baseline_gemm(
                task.shape, dtype, cpu
            )
        label_ns[task.label] = cats

    per_layer_elems = non_gemm_elements(config)
    for label in NON_GEMM_LABELS:
        op = label.lower()
        ns = (
            per_layer_elems[label] * config.num_layers
            * cpu.cycles_per_element[op] * ns_per_cycle
        )
        label_ns[label] = {
            "gemm_compute": 0.0, "data_transfer": 0.0, "control": 0.0,
            "non_gemm_cpu": ns,
        }

    categories = dict.fromkeys(CATEGORIES, 0.0)
    for cats in label_ns.values():
        for cat in CATEGORIES:
            categories[cat] += cats[cat]
    total_ns = sum(categories.values())

    non_gemm_cpu_ns = sum(
        label_ns[label]["non_gemm_cpu"] for label in NON_GEMM_LABELS
    )
    baseline_total_ns = baseline_gemm_ns + non_gemm_cpu_ns
    gemm_ns = sum(sum(label_ns[lb].values()) for lb in GEMM_LABELS)

    report = SimReport(
        total_ns=total_ns,
        category_ns=categories,
        bytes_moved=total_bytes,
        energy_mj=total_energy,
        speedup_vs_baseline=baseline_total_ns / total_ns,
    )
    return TransformerReport(
        model=config.name,
        dtype_kind=dtype.kind,
        accelerated=accelerated,
        report=report,
        label_ns=label_ns,
        gemm_ns=gemm_ns,
        baseline_ns=baseline_total_ns,
        setup_pack_ns=setup_pack_ns,
    )
