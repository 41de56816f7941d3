"""Discrete-event model of a neuromorphic multicast packet fabric.

Nodes sit on a triangular torus and each has six links (E, NE, N, W, SW,
S). Every node owns a router with an ordered key/mask table; a matching
entry lists the links and local cores a packet is copied to. Packets are
AER-style: a 32-bit key naming the emitting source plus a timestamp. Unlike
real spike packets they may also carry a 64-bit payload, which the
distributed trainers use to move real numbers between cores.

Timing model: one tick per link hop, no router contention, local delivery
in the tick a packet reaches its node. All state changes happen in event
handlers drained in ``(tick, sequence)`` order, so runs are deterministic.

Keys are ``(source_id << 16) | index``. Routes match on the upper 16 bits,
the low half is free for an element index. The host injector (id
``HOST``) is attached to node ``(0, 0)``.
"""

from __future__ import annotations

import heapq
import itertools
import math
import struct
import time
from collections import defaultdict, deque
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

import numpy as np

from .core import (
    CapacityError,
    DimensionError,
    EmptyDatasetError,
    ShapeError,
    dot,
    sumsq,
)
from .evaluation import MulticlassHebbian
from .rules import (
    GhaConfig,
    HebbianModel,
    TrainingTrace,
    WeightMatrix,
    eta_schedule,
    gha_init,
    hebbian_init,
    presentation_order,
    row_update,
)

__all__ = [
    "DIRECTIONS",
    "HOST",
    "ROUTE_MASK",
    "AerPacket",
    "Delivery",
    "DeliveryReport",
    "EventQueue",
    "EventStats",
    "Fabric",
    "RoutingEntry",
    "Topology",
    "build_torus",
    "inject_and_route",
    "map_rows_to_cores",
    "minimal_path",
    "multicast_tree",
    "program_multicast_routes",
    "run_distributed_gha",
    "run_distributed_hebbian",
    "shortest_hops",
    "source_key",
]

DIRECTIONS = ("E", "NE", "N", "W", "SW", "S")
OFFSETS = {"E": (1, 0), "NE": (1, 1), "N": (0, 1), "W": (-1, 0), "SW": (-1, -1), "S": (0, -1)}
OPPOSITE = {"E": "W", "NE": "SW", "N": "S", "W": "E", "SW": "NE", "S": "N"}

HOST = 0xFFFF
ROUTE_MASK = 0xFFFF0000
INDEX_MASK = 0x0000FFFF


def source_key(source: int, index: int = 0) -> int:
    if not 0 <= index <= INDEX_MASK:
        raise ShapeError(f"element index {index} does not fit in 16 bits")
    return ((source & 0xFFFF) << 16) | index


def encode_payload(value: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def decode_payload(bits: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


@dataclass(frozen=True)
class Topology:
    width: int
    height: int
    cores_per_node: int

    @property
    def nodes(self) -> list:
        """All nodes in row-major order (x varies fastest)."""
        return [(x, y) for y in range(self.height) for x in range(self.width)]

    @property
    def total_cores(self) -> int:
        return self.width * self.height * self.cores_per_node

    def neighbor(self, node, direction: str):
        dx, dy = OFFSETS[direction]
        return ((node[0] + dx) % self.width, (node[1] + dy) % self.height)

    def links(self, node) -> dict:
        return {d: self.neighbor(node, d) for d in DIRECTIONS}

    def node_index(self, node) -> int:
        return node[1] * self.width + node[0]

    def node_of_core(self, core: int):
        if core == HOST:
            return (0, 0)
        if not 0 <= core < self.total_cores:
            raise ValueError(f"core {core} outside 0..{self.total_cores - 1}")
        i = core // self.cores_per_node
        return (i % self.width, i // self.width)

    def cores_of(self, node) -> range:
        base = self.node_index(node) * self.cores_per_node
        return range(base, base + self.cores_per_node)

    @classmethod
    def parse(cls, spec: str) -> Topology:
        """``"WxHxC"`` -> topology, e.g. ``"3x3x18"``."""
        try:
            w, h, c = (int(p) for p in spec.lower().split("x"))
        except ValueError:
            raise ValueError(f"topology must look like WxHxC, got {spec!r}") from None
        return build_torus(w, h, c)


def build_torus(width: int, height: int, cores_per_node: int = 1) -> Topology:
    if width < 1 or height < 1 or cores_per_node < 1:
        raise DimensionError(
            f"torus dimensions must be >= 1, got {width}x{height} with {cores_per_node} cores"
        )
    if width * height * cores_per_node > HOST:
        raise CapacityError("core ids must fit below the host id 0xFFFF")
    return Topology(width, height, cores_per_node)


def shortest_hops(topology: Topology, a, b) -> int:
    """Breadth-first distance over the six-link graph."""
    if a == b:
        return 0
    seen = {a}
    frontier = deque([(a, 0)])
    while frontier:
        node, d = frontier.popleft()
        for nxt in topology.links(node).values():
            if nxt == b:
                return d + 1
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, d + 1))
    raise RuntimeError("torus is connected; unreachable")


def _hex_len(a: int, b: int) -> int:
    return max(abs(a), abs(b)) if a * b >= 0 else abs(a) + abs(b)


def minimal_path(topology: Topology, a, b) -> list:
    """Deterministic minimal route from node ``a`` to node ``b`` as link names.

    The displacement is taken over the torus wrap representatives, split
    into at most two move kinds (x, diagonal, y), and the kind with more
    moves goes first; equal counts go x before diagonal before y.
    """
    dx0 = (b[0] - a[0]) % topology.width
    dy0 = (b[1] - a[1]) % topology.height
    best = None
    for dx in (dx0, dx0 - topology.width):
        for dy in (dy0, dy0 - topology.height):
            n = _hex_len(dx, dy)
            if best is None or n < best[0]:
                best = (n, dx, dy)
    _, dx, dy = best
    moves = []  # (count, rank, direction)
    if dx * dy > 0:
        diag = min(abs(dx), abs(dy))
        sign = 1 if dx > 0 else -1
        moves.append((diag, 1, "NE" if sign > 0 else "SW"))
        moves.append((abs(dx) - diag, 0, "E" if sign > 0 else "W"))
        moves.append((abs(dy) - diag, 2, "N" if sign > 0 else "S"))
    else:
        moves.append((abs(dx), 0, "E" if dx > 0 else "W"))
        moves.append((abs(dy), 2, "N" if dy > 0 else "S"))
    moves.sort(key=lambda m: (-m[0], m[1]))
    return [d for count, _, d in moves for _ in range(count)]


def multicast_tree(topology: Topology, src, dest_nodes: Iterable) -> dict:
    """Tree ``{node: {direction: child}}`` covering ``dest_nodes`` from ``src``.

    Paths are merged in node-index order. When a path reaches a node that is
    already in the tree it continues from there instead of adding a second
    parent, so every node is entered exactly once. All merged paths are
    minimal, so tree depth equals hop distance.
    """
    children: dict = {src: {}}
    for dst in sorted(set(dest_nodes), key=topology.node_index):
        cur = src
        for d in minimal_path(topology, src, dst):
            nxt = topology.neighbor(cur, d)
            if nxt not in children:
                children[nxt] = {}
                children[cur][d] = nxt
            cur = nxt
    return children


@dataclass(frozen=True)
class AerPacket:
    key: int
    payload: int | None = None
    timestamp: int = 0


@dataclass(frozen=True)
class RoutingEntry:
    key: int
    mask: int
    links: tuple = ()
    cores: tuple = ()

    def matches(self, key: int) -> bool:
        return (key & self.mask) == (self.key & self.mask)


def program_multicast_routes(
    topology: Topology, source: int, destinations: Iterable[int], mask: int = ROUTE_MASK
) -> dict:
    """Routing-table entries (one per tree node) for packets keyed by ``source``."""
    destinations = sorted(set(destinations))
    if not destinations:
        raise ValueError("multicast needs at least one destination")
    by_node = defaultdict(list)
    for core in destinations:
        by_node[topology.node_of_core(core)].append(core)
    src = topology.node_of_core(source)
    tree = multicast_tree(topology, src, by_node)
    key = source_key(source)
    return {
        node: RoutingEntry(
            key,
            mask,
            tuple(d for d in DIRECTIONS if d in kids),
            tuple(by_node.get(node, ())),
        )
        for node, kids in tree.items()
    }


class EventQueue:
    """Min-queue on ``(tick, sequence)``; sequence is insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()
        self.now = 0

    def push(self, tick: int, event) -> None:
        if tick < self.now:
            raise ValueError(f"cannot schedule at tick {tick} before now={self.now}")
        heapq.heappush(self._heap, (tick, next(self._seq), event))

    def pop(self):
        tick, seq, event = heapq.heappop(self._heap)
        self.now = tick
        return tick, seq, event

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class EventStats:
    packets_injected: int = 0
    link_traversals: int = 0
    deliveries: int = 0
    dropped: int = 0
    max_hops: int = 0
    per_link: dict = field(default_factory=lambda: defaultdict(int))

    @property
    def connection_events(self) -> int:
        return self.deliveries


class Delivery(NamedTuple):
    tick: int
    key: int
    source: int
    core: int
    hops: int


@dataclass
class DeliveryReport:
    deliveries: list
    dropped: bool = False
    diagnostic: str = ""

    @property
    def arrivals(self) -> list:
        return [(d.core, d.tick, d.hops) for d in self.deliveries]


class Fabric:
    """Routers, event queue and statistics for one simulation.

    ``trace`` receives one tab-separated line per delivery:
    tick, key (hex), source core, destination core, hops.
    """

    def __init__(self, topology: Topology, trace: TextIO | None = None, record: bool = False):
        self.topology = topology
        self.tables = {node: [] for node in topology.nodes}
        self.queue = EventQueue()
        self.stats = EventStats()
        self.handlers: dict = {}
        self.trace = trace
        self.record = record
        self.deliveries: list = []
        self.diagnostics: list = []

    @property
    def now(self) -> int:
        return self.queue.now

    def install(self, updates: dict) -> None:
        for node, entry in updates.items():
            self.tables[node].append(entry)

    def program_multicast(self, source: int, destinations: Iterable[int]) -> dict:
        updates = program_multicast_routes(self.topology, source, destinations)
        self.install(updates)
        return updates

    def attach(self, core: int, handler: Callable) -> None:
        """``handler(packet, source, hops)`` runs when a packet reaches ``core``."""
        self.handlers[core] = handler

    def lookup(self, node, key: int) -> RoutingEntry | None:
        for entry in self.tables[node]:
            if entry.matches(key):
                return entry
        return None

    def inject(self, packet: AerPacket, source: int) -> None:
        self.stats.packets_injected += 1
        node = self.topology.node_of_core(source)
        self.queue.push(max(packet.timestamp, self.now), ("route", node, packet, source, 0))

    def run(self, max_events: int | None = None) -> int:
        """Drain the queue; returns the number of events processed."""
        n = 0
        while self.queue and (max_events is None or n < max_events):
            tick, _, event = self.queue.pop()
            if event[0] == "route":
                self._route(tick, *event[1:])
            else:
                self._deliver(tick, *event[1:])
            n += 1
        return n

    def _route(self, tick, node, packet, source, hops):
        entry = self.lookup(node, packet.key)
        if entry is None:
            self.stats.dropped += 1
            msg = f"tick {tick}: node {node} has no route for key 0x{packet.key:08x}, dropped"
            self.diagnostics.append(msg)
            return
        for d in entry.links:
            self.stats.link_traversals += 1
            self.stats.per_link[(node, d)] += 1
            self.queue.push(tick + 1, ("route", self.topology.neighbor(node, d), packet, source, hops + 1))
        for core in entry.cores:
            self.queue.push(tick, ("deliver", core, packet, source, hops))

    def _deliver(self, tick, core, packet, source, hops):
        st = self.stats
        st.deliveries += 1
        st.max_hops = max(st.max_hops, hops)
        if self.record:
            self.deliveries.append(Delivery(tick, packet.key, source, core, hops))
        if self.trace is not None:
            src = "host" if source == HOST else str(source)
            self.trace.write(f"{tick}\t0x{packet.key:08x}\t{src}\t{core}\t{hops}\n")
        handler = self.handlers.get(core)
        if handler is not None:
            handler(packet, source, hops)


def inject_and_route(fabric: Fabric, packet: AerPacket, source: int) -> DeliveryReport:
    """Inject one packet and run the fabric until it is quiet."""
    was_recording = fabric.record
    fabric.record = True
    start = len(fabric.deliveries)
    dropped_before = fabric.stats.dropped
    fabric.inject(packet, source)
    fabric.run()
    fabric.record = was_recording
    mine = [d for d in fabric.deliveries[start:] if d.key == packet.key]
    if not was_recording:
        del fabric.deliveries[start:]
    if fabric.stats.dropped > dropped_before:
        return DeliveryReport(mine, True, fabric.diagnostics[-1])
    return DeliveryReport(mine)


def map_rows_to_cores(m: int, topology: Topology) -> list:
    """Row ``i`` runs on core ``i``: nodes in row-major order, cores within a node first."""
    if m < 1:
        raise DimensionError("need at least one row")
    if m > topology.total_cores:
        raise CapacityError(f"{m} rows do not fit on {topology.total_cores} cores")
    return list(range(m))


# -- distributed trainers ----------------------------------------------------


class _RowCore:
    """Holds one GHA row and runs its link of the residual chain."""

    def __init__(self, fabric, core, index, c_row, n, next_core, cfg, sq_out):
        self.fabric = fabric
        self.core = core
        self.index = index
        self.c = c_row
        self.n = n
        self.next_core = next_core
        self.cfg = cfg
        self.sq_out = sq_out
        self.t = 0
        self.x = np.empty(n)
        self.r_in = np.empty(n)
        self._reset()

    def _reset(self):
        self.x_seen = 0
        self.r_seen = 0
        self.y = None

    def on_packet(self, packet, source, hops):
        j = packet.key & INDEX_MASK
        value = decode_payload(packet.payload)
        if source == HOST:
            self.x[j] = value
            self.x_seen += 1
            if self.x_seen == self.n:
                self.y = dot(self.c, self.x)
        else:
            self.r_in[j] = value
            self.r_seen += 1
        if self.y is not None and (self.index == 0 or self.r_seen == self.n):
            self._update()

    def _update(self):
        r_prev = self.x if self.index == 0 else self.r_in
        eta = eta_schedule(self.cfg, self.t)
        self.c, r, delta = row_update(self.c, r_prev, self.y, eta)
        self.sq_out[self.index] = sumsq(delta)
        self.t += 1
        self._reset()
        if self.next_core is not None:
            now = self.fabric.now
            for j in range(self.n):
                pkt = AerPacket(source_key(self.core, j), encode_payload(float(r[j])), now)
                self.fabric.inject(pkt, self.core)


def _host_broadcast(fabric: Fabric, x: np.ndarray) -> None:
    now = fabric.now
    for j, v in enumerate(x):
        fabric.inject(AerPacket(source_key(HOST, j), encode_payload(float(v)), now), HOST)


def run_distributed_gha(
    inputs,
    config: GhaConfig,
    topology: Topology,
    m: int,
    initial: WeightMatrix | None = None,
    oracle_mode: bool = False,
    trace: TextIO | None = None,
    on_epoch: Callable | None = None,
) -> tuple[WeightMatrix, TrainingTrace, EventStats]:
    """Train GHA with one weight row per simulated core.

    Per sample: the host multicasts ``x`` as N payload packets to all row
    cores; core ``i`` computes ``y_i`` from its own row, waits for the
    residual ``r_{i-1}`` from core ``i-1`` (core 0 uses ``x``), updates its
    row, and unicasts ``r_i`` to core ``i+1``. The host starts the next
    sample once the fabric is quiet. The resulting weights equal
    :func:`hebgha.rules.gha_train` bit for bit.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("no training inputs")
    n = X.shape[1]
    if initial is None:
        initial = gha_init(m, n, config, oracle_mode=oracle_mode)
    if initial.c.shape != (m, n):
        raise ShapeError(f"initial weights {initial.c.shape} do not match ({m}, {n})")
    cores = map_rows_to_cores(m, topology)
    cfg = config.resolved(X.shape[0])

    fabric = Fabric(topology, trace=trace)
    fabric.program_multicast(HOST, cores)
    sq = [0.0] * m
    rows = []
    for i, core in enumerate(cores):
        nxt = cores[i + 1] if i + 1 < m else None
        if nxt is not None:
            fabric.program_multicast(core, [nxt])
        rc = _RowCore(fabric, core, i, np.array(initial.c[i]), n, nxt, cfg, sq)
        fabric.attach(core, rc.on_packet)
        rows.append(rc)

    out = TrainingTrace()
    t = 0
    for e in range(cfg.epochs):
        start = time.perf_counter()
        total = 0.0
        for k in presentation_order(X.shape[0], cfg, e):
            eta = eta_schedule(cfg, t)
            _host_broadcast(fabric, X[k])
            fabric.run()
            acc = 0.0
            for v in sq:
                acc += v
            d = math.sqrt(acc)
            out.steps.append((t, eta, d))
            total += d
            t += 1
        out.epochs.append((e, total, time.perf_counter() - start))
        if on_epoch is not None:
            on_epoch(e, WeightMatrix(np.array([rc.c for rc in rows]), oracle_mode=initial.oracle_mode))
    c = np.array([rc.c for rc in rows])
    return WeightMatrix(c, oracle_mode=initial.oracle_mode), out, fabric.stats


class _ClassCore:
    """One-vs-rest Hebbian unit for a single class."""

    def __init__(self, cls, n, model, sq_out):
        self.cls = cls
        self.n = n
        self.model = model
        self.sq_out = sq_out
        self.x = np.empty(n)
        self.seen = 0
        self.label = None

    def on_packet(self, packet, source, hops):
        j = packet.key & INDEX_MASK
        value = decode_payload(packet.payload)
        if j == self.n:
            self.label = int(value)
        else:
            self.x[j] = value
        self.seen += 1
        if self.seen == self.n + 1:
            y = 1.0 if self.label == self.cls else -1.0
            old = self.model
            self.model = HebbianModel(old.weights + self.x * y, old.bias + y)
            self.sq_out[self.cls] = sumsq(self.model.weights - old.weights) + (self.model.bias - old.bias) ** 2
            self.seen = 0


def run_distributed_hebbian(
    x, labels, classes: int, epochs: int, topology: Topology, trace: TextIO | None = None
) -> tuple[MulticlassHebbian, TrainingTrace, EventStats]:
    """One-vs-rest Hebbian training with one class unit per core.

    The host multicasts the N features plus the label (index N) to every
    class core; each core imprints its own bipolar target.
    """
    X = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("no training inputs")
    n = X.shape[1]
    cores = map_rows_to_cores(classes, topology)
    fabric = Fabric(topology, trace=trace)
    fabric.program_multicast(HOST, cores)
    sq = [0.0] * classes
    units = []
    for k, core in enumerate(cores):
        u = _ClassCore(k, n, hebbian_init(n), sq)
        fabric.attach(core, u.on_packet)
        units.append(u)
    out = TrainingTrace()
    t = 0
    for e in range(epochs):
        start = time.perf_counter()
        total = 0.0
        for row, lab in zip(X, labels):
            _host_broadcast(fabric, np.append(row, float(lab)))
            fabric.run()
            d = math.sqrt(math.fsum(sq))
            out.steps.append((t, 1.0, d))
            total += d
            t += 1
        out.epochs.append((e, total, time.perf_counter() - start))
    return MulticlassHebbian(tuple(u.model for u in units)), out, fabric.stats

