"""Stationary-regime resource allocation (SRA) via a max-flow reduction.

An overlay with node capacities c(u) and demands d(u) maps to a flow
network with a source s, a sink p, and a split pair u+/u- per node:
s->u+ carries at most c(u), u- ->p at most d(u), and u+ ->v- exists for
every directed overlay edge u->v with effectively unbounded capacity
(materialized as the total demand, which no single cross arc can exceed
in a feasible flow).  All demands are satisfiable exactly when the
maximum s-p flow equals the total demand, and the flow on the cross arcs
is the allocation itself.

Vertex numbering inside a network built from an n-node overlay:
source = 0, u+ = 1 + u, u- = 1 + n + u, sink = 2n + 1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .overlay import OverlayGraph


@dataclass(frozen=True)
class FlowNetwork:
    """Directed network with integer arc capacities, fixed arc order."""

    num_vertices: int
    source: int
    sink: int
    tails: tuple[int, ...]
    heads: tuple[int, ...]
    capacities: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.tails) == len(self.heads) == len(self.capacities)):
            raise ValueError("arc arrays must have equal length")
        for t, h, c in zip(self.tails, self.heads, self.capacities):
            if not (0 <= t < self.num_vertices and 0 <= h < self.num_vertices):
                raise ValueError("arc endpoint out of range")
            if c < 0:
                raise ValueError("arc capacities must be non-negative")

    @property
    def num_arcs(self) -> int:
        return len(self.tails)


@dataclass(frozen=True)
class FlowResult:
    """A feasible s-t flow; ``flows[i]`` is the flow on arc i."""

    value: int
    flows: tuple[int, ...]


@dataclass(frozen=True)
class Allocation:
    """Weights on directed overlay edges; zero-weight edges are omitted."""

    weights: dict[tuple[int, int], int]

    def weight(self, u: int, v: int) -> int:
        return self.weights.get((u, v), 0)

    def total(self) -> int:
        return sum(self.weights.values())

    def sent(self, u: int) -> int:
        return sum(w for (a, _), w in self.weights.items() if a == u)

    def received(self, v: int) -> int:
        return sum(w for (_, b), w in self.weights.items() if b == v)


@dataclass(frozen=True)
class SraOutcome:
    satisfiable: bool
    ratio: float
    flow_value: int
    allocation: Allocation


def build_flow_network(graph: OverlayGraph) -> FlowNetwork:
    """Map an overlay to its split-node flow network."""
    n = graph.n
    unbounded = graph.total_demand()
    tails: list[int] = []
    heads: list[int] = []
    caps: list[int] = []
    for u in range(n):
        tails.append(0)
        heads.append(1 + u)
        caps.append(graph.capacity[u])
    for u in range(n):
        for v in graph.neighbors(u):
            tails.append(1 + u)
            heads.append(1 + n + v)
            caps.append(unbounded)
    for u in range(n):
        tails.append(1 + n + u)
        heads.append(2 * n + 1)
        caps.append(graph.demand[u])
    return FlowNetwork(2 * n + 2, 0, 2 * n + 1, tuple(tails), tuple(heads), tuple(caps))


def max_flow(network: FlowNetwork) -> FlowResult:
    """Maximum s-t flow by shortest-augmenting-path phases (blocking flow).

    Deterministic: arcs are scanned in the order they appear in the network.
    """
    num_v = network.num_vertices
    src, snk = network.source, network.sink
    # paired residual arcs: forward at 2i, reverse at 2i+1
    to: list[int] = []
    cap: list[int] = []
    adj: list[list[int]] = [[] for _ in range(num_v)]
    for i in range(network.num_arcs):
        t, h, c = network.tails[i], network.heads[i], network.capacities[i]
        adj[t].append(len(to))
        to.append(h)
        cap.append(c)
        adj[h].append(len(to))
        to.append(t)
        cap.append(0)

    total = 0
    level = [-1] * num_v
    it = [0] * num_v
    while True:
        for i in range(num_v):
            level[i] = -1
        level[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for a in adj[u]:
                v = to[a]
                if cap[a] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[snk] < 0:
            break
        for i in range(num_v):
            it[i] = 0
        # one blocking flow: iterative DFS with current-arc pointers
        while True:
            path: list[int] = []
            u = src
            while u != snk:
                advanced = False
                while it[u] < len(adj[u]):
                    a = adj[u][it[u]]
                    v = to[a]
                    if cap[a] > 0 and level[v] == level[u] + 1:
                        path.append(a)
                        u = v
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    level[u] = -1  # dead end in this phase
                    if not path:
                        break
                    u = to[path.pop() ^ 1]
            if u != snk:
                break
            bottleneck = min(cap[a] for a in path)
            for a in path:
                cap[a] -= bottleneck
                cap[a ^ 1] += bottleneck
            total += bottleneck
    flows = tuple(cap[2 * i + 1] for i in range(network.num_arcs))
    return FlowResult(total, flows)


def min_cut(network: FlowNetwork, result: FlowResult) -> tuple[int, frozenset[int]]:
    """Cut value and the source-side vertex set of the residual graph."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(network.num_vertices)]
    for i in range(network.num_arcs):
        t, h = network.tails[i], network.heads[i]
        adj[t].append((h, network.capacities[i] - result.flows[i]))
        adj[h].append((t, result.flows[i]))
    seen = {network.source}
    queue = deque([network.source])
    while queue:
        u = queue.popleft()
        for v, residual in adj[u]:
            if residual > 0 and v not in seen:
                seen.add(v)
                queue.append(v)
    value = sum(
        network.capacities[i]
        for i in range(network.num_arcs)
        if network.tails[i] in seen and network.heads[i] not in seen
    )
    return value, frozenset(seen)


def extract_allocation(network: FlowNetwork, result: FlowResult) -> Allocation:
    """Read the overlay edge weights off the cross-arc flows."""
    n = (network.num_vertices - 2) // 2
    weights: dict[tuple[int, int], int] = {}
    for i in range(network.num_arcs):
        t, h = network.tails[i], network.heads[i]
        if 1 <= t <= n and n + 1 <= h <= 2 * n and result.flows[i] > 0:
            weights[(t - 1, h - n - 1)] = result.flows[i]
    return Allocation(weights)


def sra_decide(graph: OverlayGraph) -> SraOutcome:
    """Decide satisfiability of all demands and return a maximal allocation.

    ``ratio`` is the allocated fraction of the total demand (1.0 when the
    total demand is zero).
    """
    network = build_flow_network(graph)
    result = max_flow(network)
    total_demand = graph.total_demand()
    satisfiable = result.value == total_demand
    ratio = 1.0 if total_demand == 0 else result.value / total_demand
    return SraOutcome(satisfiable, ratio, result.value, extract_allocation(network, result))
