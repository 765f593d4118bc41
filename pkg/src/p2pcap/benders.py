"""Level-based decomposition for the single-tree problem (K = 1).

The tree is rebuilt from its level structure: a master problem assigns
nodes to levels subject to cardinality-capacity chaining (the number of
nodes at level j cannot exceed the total capacity of level j-1), and one
subproblem per consecutive level pair checks that parents can actually be
matched -- a semi-perfect b-matching where each level-j node needs exactly
one neighbor at level j-1 and a level-(j-1) node u serves at most c(u)
children.  Whenever a matching is infeasible, the deficiency witness (a
set S of level-j nodes whose combined neighborhood capacity is too small)
yields a valid Hall-type cut added to the master, and the loop repeats.
Matchings carry no objective value, so the first level assignment whose
subproblems are all feasible is optimal.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations

from .dcda import DcdaInstance, ExactResult, Forest, empty_forest, validate_forest
from .overlay import OverlayGraph
from .sra import FlowNetwork, max_flow


@dataclass(frozen=True)
class BMatchInstance:
    """Bipartite matching instance: left nodes with multiplicities, right
    nodes each to be covered exactly once."""

    left: tuple[int, ...]
    right: tuple[int, ...]
    b: dict[int, int]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        left, right = set(self.left), set(self.right)
        if left & right:
            raise ValueError("left and right parts must be disjoint")
        for l, r in self.edges:
            if l not in left or r not in right:
                raise ValueError(f"edge ({l}, {r}) does not span the partition")
        for l in self.left:
            if self.b.get(l, -1) < 0:
                raise ValueError(f"missing or negative bound for left node {l}")


@dataclass(frozen=True)
class BMatchResult:
    feasible: bool
    matching: dict[int, int] | None = None  # right node -> left node
    violator: frozenset[int] | None = None  # S subseteq right with |S| > cap(N(S))


def b_matching_feasible(inst: BMatchInstance) -> BMatchResult:
    """Decide existence of a semi-perfect b-matching via max flow.

    On failure the returned violator S satisfies |S| > sum of b over N(S),
    the Hall-type deficiency certificate.
    """
    left_index = {l: 1 + i for i, l in enumerate(inst.left)}
    right_index = {r: 1 + len(inst.left) + i for i, r in enumerate(inst.right)}
    sink = 1 + len(inst.left) + len(inst.right)
    tails, heads, caps = [], [], []
    for l in inst.left:
        tails.append(0)
        heads.append(left_index[l])
        caps.append(inst.b[l])
    arc_edges = []
    for l, r in inst.edges:
        tails.append(left_index[l])
        heads.append(right_index[r])
        caps.append(1)
        arc_edges.append((l, r))
    for r in inst.right:
        tails.append(right_index[r])
        heads.append(sink)
        caps.append(1)
    network = FlowNetwork(sink + 1, 0, sink, tuple(tails), tuple(heads), tuple(caps))
    result = max_flow(network)
    offset = len(inst.left)
    matched: dict[int, int] = {}
    for i, (l, r) in enumerate(arc_edges):
        if result.flows[offset + i] > 0:
            matched[r] = l
    if result.value == len(inst.right):
        return BMatchResult(True, matching=matched)

    # alternating BFS from unmatched right nodes; every reachable left node
    # is saturated, so the reachable right side violates Hall's condition
    right_adj: dict[int, list[int]] = {r: [] for r in inst.right}
    left_children: dict[int, list[int]] = {l: [] for l in inst.left}
    for l, r in inst.edges:
        right_adj[r].append(l)
    for r, l in matched.items():
        left_children[l].append(r)
    seen_right = {r for r in inst.right if r not in matched}
    seen_left: set[int] = set()
    queue = deque(seen_right)
    while queue:
        r = queue.popleft()
        for l in right_adj[r]:
            if l in seen_left:
                continue
            seen_left.add(l)
            for r2 in left_children[l]:
                if r2 not in seen_right:
                    seen_right.add(r2)
                    queue.append(r2)
    return BMatchResult(False, violator=frozenset(seen_right))


# ---------------------------------------------------------------------------
# master problem over level assignments


def _bfs_distances(graph: OverlayGraph, source: int) -> list[int | None]:
    dist: list[int | None] = [None] * graph.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if dist[v] is None:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass(frozen=True)
class _Cut:
    """Hall inequality: at any level j, the members of S present at level j
    need parents from N(S) at level j-1, so their count is bounded by the
    capacity of N(S) intersected with level j-1 (c(s) when j=1 and s in N(S))."""

    nodes: frozenset[int]
    neighborhood: frozenset[int]

    def rhs(self, prev_level: frozenset[int], graph: OverlayGraph, source: int, j: int) -> int:
        if j == 1:
            return graph.capacity[source] if source in self.neighborhood else 0
        return sum(graph.capacity[u] for u in self.neighborhood & prev_level)


def _solve_master(
    graph: OverlayGraph,
    source: int,
    dist: list[int | None],
    cuts: list[_Cut],
    no_goods: set[tuple[tuple[int, ...], ...]],
) -> tuple[int, list[frozenset[int]]]:
    """Maximize the number of level-assigned nodes subject to chaining and cuts.

    Depth-first over levels; candidate sets per level are enumerated largest
    first, with a greedy capacity-chain upper bound for pruning.
    """
    n = graph.n
    caps = graph.capacity
    eligible = [v for v in range(n) if v != source and dist[v] is not None]

    best_count = -1
    best_levels: list[frozenset[int]] = []

    def signature(levels: Sequence[frozenset[int]]) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(level)) for level in levels)

    def chain_bound(prev_cap: int, pool: list[int]) -> int:
        # optimistic growth: fill each next level with the largest capacities
        avail = sorted((caps[v] for v in pool), reverse=True)
        total = 0
        cap = prev_cap
        idx = 0
        while cap > 0 and idx < len(avail):
            take = min(cap, len(avail) - idx)
            total += take
            cap = sum(avail[idx : idx + take])
            idx += take
        return total

    def record(levels: list[frozenset[int]], count: int) -> None:
        nonlocal best_count, best_levels
        if count > best_count and signature(levels) not in no_goods:
            best_count = count
            best_levels = list(levels)

    def dfs(j: int, prev: frozenset[int], prev_cap: int, assigned: set[int],
            levels: list[frozenset[int]], count: int) -> None:
        record(levels, count)
        if prev_cap <= 0:
            return
        unassigned = [v for v in eligible if v not in assigned]
        # nodes may sit deeper than their graph distance, never shallower
        pool = [v for v in unassigned if dist[v] <= j]
        if not pool:
            return
        if count + chain_bound(prev_cap, unassigned) <= best_count:
            return
        max_size = min(len(pool), prev_cap)
        for size in range(max_size, 0, -1):
            for combo in combinations(pool, size):
                level = frozenset(combo)
                ok = True
                for cut in cuts:
                    overlap = len(level & cut.nodes)
                    if overlap and overlap > cut.rhs(prev, graph, source, j):
                        ok = False
                        break
                if not ok:
                    continue
                assigned.update(combo)
                levels.append(level)
                dfs(j + 1, level, sum(caps[v] for v in combo), assigned, levels, count + size)
                levels.pop()
                assigned.difference_update(combo)

    dfs(1, frozenset({source}), caps[source], set(), [], 0)
    return best_count, best_levels


def levels_to_forest(
    instance: DcdaInstance,
    levels: Sequence[frozenset[int] | set[int]],
    matchings: Mapping[int, Mapping[int, int]],
) -> Forest:
    """Assemble the tree from per-level parent matchings (levels are 1-based)."""
    parents: dict[int, int] = {}
    for j, level in enumerate(levels, start=1):
        if j not in matchings:
            raise ValueError(f"missing matching for level {j}")
        matching = matchings[j]
        for v in level:
            if v not in matching:
                raise ValueError(f"node {v} at level {j} has no matched parent")
            parents[v] = matching[v]
    forest = Forest((parents,))
    validate_forest(instance, forest)
    return forest


def solve_p1_benders(instance: DcdaInstance) -> ExactResult:
    """Exact single-tree optimum via the master/subproblem loop."""
    if instance.k != 1:
        raise ValueError("the level decomposition applies to K=1 instances only")
    graph, source = instance.graph, instance.source
    dist = _bfs_distances(graph, source)
    cuts: list[_Cut] = []
    known_cuts: set[tuple[frozenset[int], frozenset[int]]] = set()
    no_goods: set[tuple[tuple[int, ...], ...]] = set()

    while True:
        count, levels = _solve_master(graph, source, dist, cuts, no_goods)
        if count <= 0:
            return ExactResult(empty_forest(1), 0, proven_optimal=True)
        matchings: dict[int, dict[int, int]] = {}
        infeasible: list[tuple[int, frozenset[int]]] = []
        for j, level in enumerate(levels, start=1):
            prev = levels[j - 2] if j > 1 else frozenset({source})
            left = tuple(sorted(prev))
            right = tuple(sorted(level))
            edges = tuple(
                (u, v) for u in left for v in graph.neighbors(u) if v in level
            )
            inst = BMatchInstance(left, right, {u: graph.capacity[u] for u in left}, edges)
            res = b_matching_feasible(inst)
            if res.feasible:
                matchings[j] = dict(res.matching or {})
            else:
                infeasible.append((j, res.violator or frozenset()))
        if not infeasible:
            forest = levels_to_forest(instance, levels, matchings)
            return ExactResult(forest, count, proven_optimal=True)
        added = False
        for j, witness in infeasible:
            neighborhood = frozenset(
                u for v in witness for u in graph.neighbors(v)
            )
            cut = _Cut(witness, neighborhood)
            key = (cut.nodes, cut.neighborhood)
            if key in known_cuts:
                continue
            prev = levels[j - 2] if j > 1 else frozenset({source})
            if len(witness & levels[j - 1]) > cut.rhs(prev, graph, source, j):
                cuts.append(cut)
                known_cuts.add(key)
                added = True
        if not added:
            # defensive fallback: exclude this exact assignment and continue
            no_goods.add(tuple(tuple(sorted(level)) for level in levels))
