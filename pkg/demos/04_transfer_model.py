"""The two accelerator access paths and the cache behind them.

Direct Cache issues 64-byte requests through the last-level cache; Direct
Memory sends one large burst straight to the memory controller.  DC wins
while the working set stays cache-resident, DM is immune to cache state.
"""

from matrixflow.sysmodel import (
    AccessMode,
    LinkConfig,
    LlcState,
    MemoryConfig,
    transfer_time,
)

link = LinkConfig()  # 16 lanes, 64 Gb/s aggregate, eta 0.85
mem = MemoryConfig()
print(f"effective link bandwidth: {link.effective_bw:.2f} bytes/ns")
print()

cold = LlcState(mem)
t_dc_cold = transfer_time(4096, AccessMode.DC, link, mem, cold, 0)
t_dc_warm = transfer_time(4096, AccessMode.DC, link, mem, cold, 0)  # now resident
t_dm = transfer_time(4096, AccessMode.DM, link, mem)
print(f"one 4KB page, DC cold (64 misses): {t_dc_cold:9.1f} ns")
print(f"one 4KB page, DC warm (all hits):  {t_dc_warm:9.1f} ns")
print(f"one 4KB page, DM burst:            {t_dm:9.1f} ns")
print()

print("LRU thrash: stream a working set twice, count second-pass hits")
for mib in (1, 2, 3, 4):
    cache = LlcState(mem)
    size = mib * 1024 * 1024
    cache.touch(0, size)
    hits, misses = cache.touch(0, size)
    print(f"  {mib} MiB vs 2 MiB LLC: {hits}/{hits + misses} hits")
print()

print("Link sweep for one DM page:")
for label, lanes, gbps in (("16x64", 16, 64), ("4x16", 4, 16), ("4x5", 4, 5)):
    l = LinkConfig.from_aggregate(lanes, gbps)
    print(f"  {label:>6}: {transfer_time(4096, AccessMode.DM, l, mem):9.1f} ns")
