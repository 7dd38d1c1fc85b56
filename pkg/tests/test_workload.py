import pytest

from matrixflow.engine import CATEGORIES
from matrixflow.errors import InvalidConfig, UnknownModel
from matrixflow.sysmodel import SystemConfig
from matrixflow.workload import (
    GEMM_LABELS,
    NON_GEMM_LABELS,
    TransformerConfig,
    builtin_configs,
    expand,
    lookup,
    non_gemm_elements,
    run_transformer,
)

# the attention layer walked step by step, as an independent MAC counter
def walk_layer_macs(cfg):
    total = 0
    for _ in range(3):  # Q, K, V projections
        total += cfg.seq_len * cfg.hidden * cfg.hidden
    for _ in range(cfg.heads):  # scores per head
        total += cfg.seq_len * cfg.seq_len * cfg.d_head
    for _ in range(cfg.heads):  # context per head
        total += cfg.seq_len * cfg.d_head * cfg.seq_len
    total += cfg.seq_len * cfg.hidden * cfg.hidden  # output projection
    total += cfg.seq_len * cfg.ff_dim * cfg.hidden  # FF1
    total += cfg.seq_len * cfg.hidden * cfg.ff_dim  # FF2
    return total


class TestExpand:
    def test_bert_base_ff1(self):
        cfg = lookup("bert-base")
        tasks = {t.label: t for t in expand(cfg)}
        ff1 = tasks["FF1"]
        assert (ff1.shape.M, ff1.shape.K, ff1.shape.N) == (128, 768, 3072)
        assert ff1.count == 1 and cfg.num_layers == 12

    def test_minimal_config(self):
        cfg = TransformerConfig("tiny", 1, 1, 1, 1, 1)
        tasks = expand(cfg)
        assert len(tasks) == 6
        for t in tasks:
            assert (t.shape.M, t.shape.N, t.shape.K) == (1, 1, 1)

    def test_task_counts(self):
        cfg = lookup("bert-base")
        counts = {t.label: t.count for t in expand(cfg)}
        assert counts == {"QKV": 3, "AttnScores": 12, "AttnContext": 12,
                          "OutProj": 1, "FF1": 1, "FF2": 1}

    def test_total_macs_vs_walker(self):
        cfg = lookup("bert-base")
        expanded = sum(t.macs_per_layer for t in expand(cfg)) * cfg.num_layers
        assert expanded == walk_layer_macs(cfg) * cfg.num_layers
        assert expanded == 11_173_625_856  # 12 x (3+1)·128·768² + attention + FFs

    def test_non_gemm_counts(self):
        cfg = lookup("bert-base")
        counts = non_gemm_elements(cfg)
        assert counts["Softmax"] == 12 * 128 * 128
        assert counts["LayerNorm"] == 2 * 128 * 768
        assert counts["Activation"] == 128 * 3072
        assert counts["Transpose"] == 12 * 128 * 64

    def test_invalid_config(self):
        with pytest.raises(InvalidConfig):
            TransformerConfig("bad", 1, 10, 3, 4, 1)  # hidden % heads != 0
        with pytest.raises(InvalidConfig):
            TransformerConfig("bad", 0, 8, 2, 4, 1)


class TestBuiltins:
    def test_bert_base(self):
        cfg = lookup("bert-base")
        assert (cfg.num_layers, cfg.hidden, cfg.heads, cfg.ff_dim) == (12, 768, 12, 3072)
        assert cfg.seq_len == 128

    def test_vit_huge(self):
        cfg = lookup("vit-huge")
        assert (cfg.num_layers, cfg.hidden, cfg.heads, cfg.ff_dim) == (32, 1280, 16, 5120)
        assert cfg.seq_len == 197

    def test_all_six(self):
        table = builtin_configs()
        assert set(table) == {"bert-medium", "bert-base", "bert-large",
                              "vit-base", "vit-large", "vit-huge"}
        for name, cfg in table.items():
            assert cfg.ff_dim == 4 * cfg.hidden
            assert cfg.seq_len == (128 if name.startswith("bert") else 197)

    def test_unknown(self):
        with pytest.raises(UnknownModel):
            lookup("bert-gigantic")

    def test_seq_len_override(self):
        assert lookup("bert-base", seq_len=64).seq_len == 64


class TestBaselineRun:
    def test_gemm_dominates(self):
        res = run_transformer(lookup("bert-base"), SystemConfig(), accelerated=False)
        assert res.gemm_ns / res.report.total_ns >= 0.99
        assert res.report.speedup_vs_baseline == 1.0
        assert res.baseline_ns == res.report.total_ns

    def test_ff_share(self):
        res = run_transformer(lookup("bert-base"), SystemConfig(), accelerated=False)
        ff = sum(sum(res.label_ns[lb].values()) for lb in ("FF1", "FF2"))
        assert ff / res.gemm_ns >= 0.85

    def test_breakdown_closure(self):
        res = run_transformer(lookup("bert-medium"), SystemConfig(), accelerated=False)
        label_total = sum(sum(cats.values()) for cats in res.label_ns.values())
        assert label_total == pytest.approx(res.report.total_ns, rel=1e-12)
        assert sum(res.report.category_ns.values()) == res.report.total_ns
        assert sum(r["percent"] for r in res.breakdown) == pytest.approx(100.0)


class TestAcceleratedRun:
    def test_accelerated_beats_baseline(self):
        sys_cfg = SystemConfig()
        res = run_transformer(lookup("bert-medium"), sys_cfg, accelerated=True)
        assert res.report.total_ns < res.baseline_ns
        assert res.report.speedup_vs_baseline > 1.0

    def test_shares_positive_and_closed(self):
        res = run_transformer(lookup("bert-medium"), SystemConfig(), accelerated=True)
        cats = res.report.category_ns
        assert cats["control"] > 0.0
        assert cats["non_gemm_cpu"] > 0.0
        assert cats["gemm_compute"] > 0.0 and cats["data_transfer"] > 0.0
        assert sum(cats.values()) == res.report.total_ns
        assert set(cats) == set(CATEGORIES)

    def test_labels_cover_gemms_and_cpu_layers(self):
        res = run_transformer(lookup("bert-medium"), SystemConfig(), accelerated=True)
        assert set(res.label_ns) == set(GEMM_LABELS) | set(NON_GEMM_LABELS)
        gemm_sum = sum(sum(res.label_ns[lb].values()) for lb in GEMM_LABELS)
        assert gemm_sum == pytest.approx(res.gemm_ns, rel=1e-12)

    def test_setup_pack_excluded_from_total(self):
        res = run_transformer(lookup("bert-medium"), SystemConfig(), accelerated=True)
        assert res.setup_pack_ns > 0.0
        label_total = sum(sum(cats.values()) for cats in res.label_ns.values())
        assert label_total == pytest.approx(res.report.total_ns, rel=1e-12)

    def test_deterministic(self):
        sys_cfg = SystemConfig()
        r1 = run_transformer(lookup("bert-medium"), sys_cfg, accelerated=True)
        r2 = run_transformer(lookup("bert-medium"), sys_cfg, accelerated=True)
        assert r1.to_dict() == r2.to_dict()

    def test_to_dict_shape(self):
        res = run_transformer(lookup("bert-medium"), SystemConfig(), accelerated=True)
        doc = res.to_dict()
        assert doc["model"] == "bert-medium"
        assert doc["dtype"] == "int32"
        for row in doc["breakdown"]:
            assert set(row) == {"label", "category", "ns", "percent"}


@pytest.mark.slow
def test_accelerated_reduces_time_all_builtins():
    sys_cfg = SystemConfig()
    for name, cfg in builtin_configs().items():
        res = run_transformer(cfg, sys_cfg, accelerated=True)
        assert res.report.total_ns < res.baseline_ns, name
