"""
Multicast trees on a six-link torus
===================================

Program a route, inject one packet, and watch who receives it.
"""

import io

import numpy as np

from hebgha import GhaConfig, gha_init, gha_train
from hebgha.fabric import (
    AerPacket,
    Fabric,
    build_torus,
    inject_and_route,
    minimal_path,
    run_distributed_gha,
    shortest_hops,
    source_key,
)

###############################################################################
# A 4x4 torus with two cores per node. Node (0,0) is one diagonal hop from
# (3,3) because of the wrap-around NE/SW links.
topo = build_torus(4, 4, 2)
print("path (0,0)->(3,3):", minimal_path(topo, (0, 0), (3, 3)))
print("path (0,0)->(2,1):", minimal_path(topo, (0, 0), (2, 1)))

###############################################################################
# One source, three subscribers. Every subscriber gets one copy, at a tick
# equal to its hop distance.
fabric = Fabric(topo)
entries = fabric.program_multicast(0, [5, 12, 30])
for node, entry in sorted(entries.items()):
    print(node, "links", entry.links, "local cores", entry.cores)
report = inject_and_route(fabric, AerPacket(source_key(0)), 0)
for core, tick, hops in report.arrivals:
    want = shortest_hops(topo, (0, 0), topo.node_of_core(core))
    print(f"core {core:2d} tick {tick} hops {hops} (bfs {want})")
print("link traversals", fabric.stats.link_traversals)

###############################################################################
# Now a whole training run: one weight row per core, residuals passed along
# a chain. The result matches the single-process trainer bit for bit.
X = np.random.default_rng(0).normal(size=(64, 6))
cfg = GhaConfig(epochs=3, seed=1)
ref, _ = gha_train(gha_init(3, 6, cfg), X, cfg)
trace = io.StringIO()
dist, _, stats = run_distributed_gha(X, cfg, topo, 3, trace=trace)
print("identical weights:", np.array_equal(ref.c, dist.c))
print("connection events:", stats.connection_events)
print("first trace lines:")
print("".join(trace.getvalue().splitlines(keepends=True)[:4]))
