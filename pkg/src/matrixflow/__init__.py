"""matrixflow: a deterministic model of a page-blocked GEMM accelerator.

The package splits into the block data structure (block_layout), exact
GEMM semantics (gemm_core), the MAC-array functional/cycle model
(systolic), the host transfer model (sysmodel), the pipelined run engine
(engine), transformer workload mapping (workload) and a sweep CLI (cli).
"""

__version__ = "0.1.0"

from .block_layout import (
    DTYPES,
    FP16,
    FP32,
    INT8,
    INT16,
    INT32,
    BlockedMatrix,
    BlockGeometry,
    DType,
    Layout,
    block_geometry,
    dump,
    get_block,
    load,
    pack_a,
    pack_b,
    parse_dtype,
    set_block,
    unpack,
)
from .engine import SimReport, run_baseline_gemm, run_gemm, speedup
from .gemm_core import GemmShape, block_matrix_multiply, multi_acc, naive_gemm
from .sysmodel import (
    AccessMode,
    CpuCostModel,
    LinkConfig,
    MemoryConfig,
    SmmuConfig,
    SystemConfig,
    TransferLedger,
    load_system_config,
    transfer_time,
)
from .systolic import ArrayConfig, block_energy, sa_compute_block, sa_cycles
from .workload import (
    GemmTask,
    TransformerConfig,
    TransformerReport,
    builtin_configs,
    expand,
    lookup,
    run_transformer,
)

__all__ = [name for name in dir() if not name.startswith("_")]
