"""Host-side timing model: PCIe link, DMA descriptors, SMMU and the two
accelerator access paths.

Direct Cache (DC) splits a transfer into 64-byte requests served by the
last-level cache: the payload serializes behind the link, the first request
pays one LLC hit latency, and every LLC miss adds a DRAM stall that the
pipeline cannot hide.  Direct Memory (DM) bypasses the cache with one large
burst per call: link base latency, one DRAM access, then the payload at the
slower of link and DRAM bandwidth.  DM never touches cache state.

Every DMA block transfer additionally fetches one 64-byte descriptor from
memory and performs one SMMU translation per new 4KB page; both are charged
to the control category.

All latencies are in nanoseconds and all bandwidths in bytes per nanosecond.
Defaults are stated model parameters, not measured values.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ConfigError, InvalidConfig

LINE_BYTES = 64
PAGE = 4096


class AccessMode(Enum):
    DC = "dc"
    DM = "dm"


def parse_mode(name: str) -> AccessMode:
    try:
        return AccessMode(name.strip().lower())
    except ValueError:
        raise InvalidConfig(f"unknown access mode {name!r}; expected dc or dm")


@dataclass(frozen=True)
class LinkConfig:
    """PCIe-style link. per_lane_gbps is the per-lane signalling rate; the
    published "64 Gb/s, 16 lanes" style figures are aggregate rates, so use
    from_aggregate for those."""

    lanes: int = 16
    per_lane_gbps: float = 4.0
    efficiency: float = 0.85
    base_latency_ns: float = 500.0
    max_payload_bytes: int = PAGE

    def __post_init__(self):
        if self.lanes < 1:
            raise InvalidConfig(f"lanes must be >= 1, got {self.lanes}")
        if not (0.0 < self.efficiency <= 1.0):
            raise InvalidConfig(f"efficiency must be in (0, 1], got {self.efficiency}")

    @classmethod
    def from_aggregate(cls, lanes: int, total_gbps: float, **kw) -> "LinkConfig":
        return cls(lanes=lanes, per_lane_gbps=total_gbps / lanes, **kw)

    @property
    def effective_bw(self) -> float:
        """Payload bandwidth in bytes/ns."""
        return self.lanes * self.per_lane_gbps * self.efficiency / 8.0

    def shared(self, ways: int) -> "LinkConfig":
        """Round-robin time share of this link between `ways` channels."""
        if ways <= 1:
            return self
        return replace(self, per_lane_gbps=self.per_lane_gbps / ways)


@dataclass(frozen=True)
class MemoryConfig:
    llc_bytes: int = 2 * 1024 * 1024
    line_bytes: int = LINE_BYTES
    ways: int = 16
    llc_hit_ns: float = 20.0
    dram_latency_ns: float = 60.0
    dram_bw_bytes_per_ns: float = 12.8  # DDR3-1600 peak
    dram_kind: str = "DDR3_1600_8x8"

    def __post_init__(self):
        if self.llc_bytes % self.line_bytes != 0:
            raise InvalidConfig("llc_bytes must be a multiple of line_bytes")
        if self.ways < 1:
            raise InvalidConfig("cache must have at least one way")


@dataclass(frozen=True)
class SmmuConfig:
    tlb_entries: int = 64
    translate_ns: float = 100.0  # charged once per TLB miss, one per new page


@dataclass
class TransferLedger:
    """Raw per-run accounting; counters only ever increase."""

    bytes_fetched: int = 0
    bytes_written: int = 0
    block_fetches: int = 0
    descriptor_fetches: int = 0
    tlb_misses: int = 0
    data_ns: float = 0.0
    control_ns: float = 0.0

    @property
    def bytes_moved(self) -> int:
        return self.bytes_fetched + self.bytes_written

    def to_dict(self) -> dict:
        return {
            "bytes_fetched": self.bytes_fetched,
            "bytes_written": self.bytes_written,
            "bytes_moved": self.bytes_moved,
            "block_fetches": self.block_fetches,
            "descriptor_fetches": self.descriptor_fetches,
            "tlb_misses": self.tlb_misses,
            "data_ns": self.data_ns,
            "control_ns": self.control_ns,
        }


class LlcState:
    """Set-associative LRU cache over 64-byte lines, deterministic."""

    def __init__(self, mem: MemoryConfig):
        self.mem = mem
        self.num_sets = max(1, mem.llc_bytes // (mem.line_bytes * mem.ways))
        self.sets = [OrderedDict() for _ in range(self.num_sets)]

    def access_line(self, line: int) -> bool:
        """Touch one line index; returns True on hit. Misses allocate."""
        s = self.sets[line % self.num_sets]
        tag = line // self.num_sets
        if tag in s:
            s.move_to_end(tag)
            return True
        if len(s) >= self.mem.ways:
            s.popitem(last=False)
        s[tag] = True
        return False

    def touch(self, addr: int, nbytes: int):
        """Touch every line overlapping [addr, addr + nbytes); returns
        (hits, misses)."""
        if nbytes <= 0:
            return 0, 0
        first = addr // self.mem.line_bytes
        last = (addr + nbytes - 1) // self.mem.line_bytes
        hits = 0
        for line in range(first, last + 1):
            hits += self.access_line(line)
        total = last - first + 1
        return hits, total - hits


def llc_touch(addr: int, nbytes: int, cache: LlcState):
    """Functional form of LlcState.touch."""
    return cache.touch(addr, nbytes)


class PageLru:
    """Page-granular view of the same LLC, for workloads that only ever
    access whole aligned 4KB pages.

    A page covers line_bytes-sized lines that land in 4096/line_bytes
    consecutive sets, each exactly once and all with the same tag, so those
    sets always hold identical LRU state.  The cache therefore collapses to
    num_sets/(4096/line_bytes) independent LRU groups keyed by page number.
    Exactly equivalent to LlcState under page-only access (see tests).
    """

    def __init__(self, mem: MemoryConfig):
        lines_per_page = PAGE // mem.line_bytes
        num_sets = max(1, mem.llc_bytes // (mem.line_bytes * mem.ways))
        if num_sets % lines_per_page != 0:
            raise InvalidConfig(
                "page-granular LLC shortcut needs sets divisible by lines/page"
            )
        self.mem = mem
        self.lines_per_page = lines_per_page
        self.num_groups = num_sets // lines_per_page
        self.groups = [OrderedDict() for _ in range(self.num_groups)]

    @staticmethod
    def compatible(mem: MemoryConfig) -> bool:
        lines_per_page = PAGE // mem.line_bytes
        num_sets = max(1, mem.llc_bytes // (mem.line_bytes * mem.ways))
        return PAGE % mem.line_bytes == 0 and num_sets % lines_per_page == 0

    def touch(self, addr: int, nbytes: int):
        if nbytes <= 0:
            return 0, 0
        if addr % PAGE != 0 or nbytes != PAGE:
            raise InvalidConfig("PageLru only serves whole aligned pages")
        page = addr // PAGE
        g = self.groups[page % self.num_groups]
        tag = page // self.num_groups
        if tag in g:
            g.move_to_end(tag)
            return self.lines_per_page, 0
        if len(g) >= self.mem.ways:
            g.popitem(last=False)
        g[tag] = True
        return 0, self.lines_per_page


class TlbState:
    """LRU translation cache keyed by 4KB page number."""

    def __init__(self, smmu: SmmuConfig):
        self.capacity = smmu.tlb_entries
        self.entries = OrderedDict()

    def lookup(self, page_addr: int) -> bool:
        page = page_addr // PAGE
        if page in self.entries:
            self.entries.move_to_end(page)
            return True
        if len(self.entries) >= self.capacity:
            self.entries.popitem(last=False)
        self.entries[page] = True
        return False


def transfer_time(
    nbytes: int,
    mode: AccessMode,
    link: LinkConfig,
    mem: MemoryConfig,
    cache=None,
    addr: int = 0,
) -> float:
    """Nanoseconds to move nbytes over the link in the given mode.

    DC updates the supplied cache state (a cold throwaway one if None);
    DM ignores cache entirely.
    """
    if nbytes <= 0:
        return 0.0
    if mode is AccessMode.DM:
        bursts = -(-nbytes // link.max_payload_bytes)
        wire = nbytes / min(link.effective_bw, mem.dram_bw_bytes_per_ns)
        return bursts * (link.base_latency_ns + mem.dram_latency_ns) + wire
    if cache is None:
        cache = LlcState(mem)
    _, misses = cache.touch(addr, nbytes)
    return mem.llc_hit_ns + nbytes / link.effective_bw + misses * mem.dram_latency_ns


class HostState:
    """Mutable per-run state: LLC contents and the SMMU TLB.

    Single-owner per simulation run; independent runs never share one.
    """

    def __init__(self, mem: MemoryConfig, smmu: SmmuConfig, page_only: bool = False):
        if page_only and PageLru.compatible(mem):
            self.llc = PageLru(mem)
        else:
            self.llc = LlcState(mem)
        self.tlb = TlbState(smmu)


def descriptor_fetch_ns(mem: MemoryConfig) -> float:
    """One 64-byte DMA descriptor read from DRAM."""
    return mem.dram_latency_ns + LINE_BYTES / mem.dram_bw_bytes_per_ns


def dma_block_transfer(
    page_addr: int,
    direction: str,
    mode: AccessMode,
    link: LinkConfig,
    mem: MemoryConfig,
    smmu: SmmuConfig,
    state: HostState,
    ledger: TransferLedger,
):
    """One page DMA: descriptor fetch + SMMU lookup (control) then the page
    payload (data).  Returns (control_ns, data_ns) and updates the ledger.

    direction is "read" (memory to accelerator, counted as a block fetch)
    or "write" (accelerator to memory).
    """
    if direction not in ("read", "write"):
        raise InvalidConfig(f"direction must be read or write, got {direction!r}")
    control = descriptor_fetch_ns(mem)
    ledger.descriptor_fetches += 1
    if not state.tlb.lookup(page_addr):
        ledger.tlb_misses += 1
        control += smmu.translate_ns
    data = transfer_time(PAGE, mode, link, mem, state.llc, page_addr)
    if direction == "read":
        ledger.block_fetches += 1
        ledger.bytes_fetched += PAGE
    else:
        ledger.bytes_written += PAGE
    ledger.control_ns += control
    ledger.data_ns += data
    return control, data


@dataclass(frozen=True)
class CpuCostModel:
    """Analytic single-thread CPU model used for baselines and the layers
    the accelerator does not take.

    A loop GEMM streams the right-hand operand with poor locality, so once
    that operand exceeds the last-level cache a fraction of accesses stall
    on DRAM: stall fraction = 1 - llc_bytes / operand_bytes.  float16 has
    no native CPU path and pays a per-MAC conversion surcharge.
    """

    cpu_freq_hz: float = 1e9
    cycles_per_mac: dict = field(
        default_factory=lambda: {
            "int8": 2.0, "int16": 2.0, "int32": 2.0, "fp32": 4.0, "fp16": 4.0,
        }
    )
    cycles_per_element: dict = field(
        default_factory=lambda: {
            "softmax": 10.0, "layernorm": 8.0, "transpose": 2.0, "activation": 4.0,
        }
    )
    fp16_convert_cycles_per_element: float = 2.0
    pack_cycles_per_element: float = 1.0
    llc_bytes: int = 2 * 1024 * 1024
    mem_stall_cycles: float = 60.0

    def __post_init__(self):
        if self.cpu_freq_hz <= 0:
            raise InvalidConfig("cpu_freq_hz must be positive")
        for name, v in list(self.cycles_per_mac.items()) + list(
            self.cycles_per_element.items()
        ):
            if v <= 0:
                raise InvalidConfig(f"cycles for {name} must be positive")


@dataclass(frozen=True)
class SystemConfig:
    """Everything a simulation run needs: array geometry, link, memory,
    SMMU, access mode, channel count and the CPU cost model."""

    array_dim: int = 16
    link: LinkConfig = field(default_factory=LinkConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    smmu: SmmuConfig = field(default_factory=SmmuConfig)
    mode: AccessMode = AccessMode.DC
    channels: int = 1
    cpu: CpuCostModel = field(default_factory=CpuCostModel)
    command_ns: float = 200.0  # one CPU command dispatch per offloaded GEMM
    double_buffer: bool = True

    def __post_init__(self):
        if self.channels < 1:
            raise InvalidConfig(f"channels must be >= 1, got {self.channels}")
        if self.array_dim < 1:
            raise InvalidConfig(f"array_dim must be >= 1, got {self.array_dim}")


_LINK_KEYS = {"lanes", "gbps", "per_lane_gbps", "eta", "base_latency_ns", "max_payload"}
_MEM_KEYS = {
    "llc_bytes", "line_bytes", "ways", "llc_hit_ns", "dram_latency_ns",
    "dram_bw_bytes_per_ns", "dram_kind",
}
_SMMU_KEYS = {"tlb_entries", "translate_ns"}
_TOP_KEYS = {"link", "memory", "smmu", "mode", "channels", "cpu", "command_ns",
             "double_buffer", "array_dim"}


def _check_keys(section: dict, allowed: set, where: str, path) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)} in {where}")


def system_config_from_dict(doc: dict, path="<config>") -> SystemConfig:
    """Build a SystemConfig from the JSON schema:
    {link: {lanes, gbps, eta, base_latency_ns, max_payload},
     memory: {...}, smmu: {...}, mode: "DC"|"DM", channels}.

    "gbps" is the aggregate link rate across all lanes.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "top level", path)
    kw = {}
    try:
        if "link" in doc:
            sec = doc["link"]
            _check_keys(sec, _LINK_KEYS, "link", path)
            lanes = int(sec.get("lanes", 16))
            if "per_lane_gbps" in sec:
                per_lane = float(sec["per_lane_gbps"])
            else:
                per_lane = float(sec.get("gbps", 64.0)) / lanes
            kw["link"] = LinkConfig(
                lanes=lanes,
                per_lane_gbps=per_lane,
                efficiency=float(sec.get("eta", 0.85)),
                base_latency_ns=float(sec.get("base_latency_ns", 500.0)),
                max_payload_bytes=int(sec.get("max_payload", PAGE)),
            )
        if "memory" in doc:
            sec = doc["memory"]
            _check_keys(sec, _MEM_KEYS, "memory", path)
            kw["memory"] = MemoryConfig(
                **{k: sec[k] for k in _MEM_KEYS if k in sec}
            )
        if "smmu" in doc:
            sec = doc["smmu"]
            _check_keys(sec, _SMMU_KEYS, "smmu", path)
            kw["smmu"] = SmmuConfig(**{k: sec[k] for k in _SMMU_KEYS if k in sec})
        if "mode" in doc:
            kw["mode"] = parse_mode(doc["mode"])
        if "channels" in doc:
            kw["channels"] = int(doc["channels"])
        if "command_ns" in doc:
            kw["command_ns"] = float(doc["command_ns"])
        if "double_buffer" in doc:
            kw["double_buffer"] = bool(doc["double_buffer"])
        if "array_dim" in doc:
            kw["array_dim"] = int(doc["array_dim"])
        if "cpu" in doc:
            sec = dict(doc["cpu"])
            kw["cpu"] = CpuCostModel(**sec)
        return SystemConfig(**kw)
    except (TypeError, ValueError, InvalidConfig) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_system_config(path) -> SystemConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return system_config_from_dict(doc, path)
