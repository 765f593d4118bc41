"""Exact solvers for capacitated distribution forests (K-DCDA).

Given an overlay, a source node and a count K of independent data units,
the task is to build K arborescences rooted at the source, each using
overlay edges, such that a node's total child count across all trees
never exceeds its capacity, and the number of (node, tree) memberships is
maximized.  A node with zero capacity can still appear as a leaf.

Three exact routes are provided: an exhaustive memoized search used as an
oracle on tiny instances (:func:`brute_force`), a budgeted branch-and-bound
over frontier edges (:func:`branch_and_bound`), and, for K=1, a level-based
decomposition in :mod:`p2pcap.benders`.  A 3-CNF reduction
(:func:`sat_to_dcda`) generates instances whose optimum certifies
satisfiability, which makes a useful adversarial test generator.
"""

from __future__ import annotations

import time
from collections import deque
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .overlay import OverlayGraph, overlay_from_edges
from .sra import FlowNetwork, max_flow


class InvalidForestError(ValueError):
    """A forest violating rootedness, acyclicity, edge membership, or capacity."""


class SizeLimitError(ValueError):
    """Instance exceeds the guard of an exhaustive solver."""


@dataclass(frozen=True)
class DcdaInstance:
    graph: OverlayGraph
    source: int
    k: int

    def __post_init__(self):
        if not 0 <= self.source < self.graph.n:
            raise ValueError(f"source {self.source} not in graph")
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class Forest:
    """K parent maps; tree k contains the source plus the keys of parents[k]."""

    parents: tuple[dict[int, int], ...]

    def members(self, k: int, source: int) -> frozenset[int]:
        return frozenset(self.parents[k]) | {source}

    def child_counts(self, n: int) -> list[int]:
        counts = [0] * n
        for tree in self.parents:
            for parent in tree.values():
                counts[parent] += 1
        return counts

    def total_members(self) -> int:
        """Non-source memberships summed over all trees."""
        return sum(len(tree) for tree in self.parents)


def empty_forest(k: int) -> Forest:
    return Forest(tuple({} for _ in range(k)))


@dataclass(frozen=True)
class ExactResult:
    forest: Forest
    score: int
    proven_optimal: bool = True


def validate_forest(instance: DcdaInstance, forest: Forest) -> None:
    """Raise InvalidForestError unless all structural invariants hold."""
    graph, source = instance.graph, instance.source
    if len(forest.parents) != instance.k:
        raise InvalidForestError(f"expected {instance.k} trees, got {len(forest.parents)}")
    for k, tree in enumerate(forest.parents):
        if source in tree:
            raise InvalidForestError(f"source has a parent in tree {k}")
        members = set(tree) | {source}
        for child, parent in tree.items():
            if not 0 <= child < graph.n:
                raise InvalidForestError(f"node {child} out of range in tree {k}")
            if parent not in members:
                raise InvalidForestError(f"parent {parent} of {child} not in tree {k}")
            if parent not in graph.neighbors(child):
                raise InvalidForestError(f"edge {parent}->{child} not in overlay (tree {k})")
        # walking up from every node must reach the source without repeats
        depth_cache: dict[int, int] = {source: 0}
        for child in tree:
            chain = []
            v = child
            while v not in depth_cache:
                chain.append(v)
                v = tree[v]
                if v in chain:
                    raise InvalidForestError(f"cycle through node {v} in tree {k}")
            base = depth_cache[v]
            for i, u in enumerate(reversed(chain), start=1):
                depth_cache[u] = base + i
    counts = forest.child_counts(graph.n)
    for u in range(graph.n):
        if counts[u] > graph.capacity[u]:
            raise InvalidForestError(
                f"node {u} has {counts[u]} children but capacity {graph.capacity[u]}"
            )


def score_forest(
    instance: DcdaInstance, forest: Forest, qos: Callable[[int], float] | None = None
) -> float:
    """Total quality of service over non-source nodes.

    ``qos`` maps the number of trees a node belongs to onto a service
    quality; the default identity makes the score the membership count.
    """
    validate_forest(instance, forest)
    if qos is None:
        return forest.total_members()
    membership = [0] * instance.graph.n
    for tree in forest.parents:
        for child in tree:
            membership[child] += 1
    return sum(qos(membership[u]) for u in range(instance.graph.n) if u != instance.source)


def allocation_ratio(instance: DcdaInstance, score: float) -> float:
    """Score as a fraction of the perfect outcome K * (n - 1)."""
    full = instance.k * (instance.graph.n - 1)
    return 1.0 if full == 0 else score / full


def forest_depths(forest: Forest, k: int, source: int) -> dict[int, int]:
    """Hop distance from the source for every member of tree k."""
    tree = forest.parents[k]
    depths = {source: 0}
    for child in tree:
        chain = []
        v = child
        while v not in depths:
            chain.append(v)
            v = tree[v]
        base = depths[v]
        for i, u in enumerate(reversed(chain), start=1):
            depths[u] = base + i
    return depths


# ---------------------------------------------------------------------------
# exhaustive oracle

_BRUTE_MAX_N = 8
_BRUTE_MAX_K = 2


def brute_force(instance: DcdaInstance) -> ExactResult:
    """Globally optimal forest by exhaustive search over attachment states.

    Memoizes on (tree member sets, residual capacities), so every reachable
    configuration is expanded exactly once.  Guarded to n <= 8 and K <= 2;
    use :func:`branch_and_bound` beyond that.
    """
    graph, source, num_trees = instance.graph, instance.source, instance.k
    if graph.n > _BRUTE_MAX_N or num_trees > _BRUTE_MAX_K:
        raise SizeLimitError(
            f"brute force limited to n <= {_BRUTE_MAX_N} and K <= {_BRUTE_MAX_K}"
        )
    adj = graph.adjacency
    memo: dict[tuple, int] = {}

    def state_key(members: tuple[frozenset[int], ...], residual: list[int]) -> tuple:
        canon = tuple(sorted(tuple(sorted(m)) for m in members))
        return (canon, tuple(residual))

    def moves(members, residual):
        for k in range(num_trees):
            mk = members[k]
            for v in range(graph.n):
                if v in mk:
                    continue
                for u in adj[v]:
                    if u in mk and residual[u] > 0:
                        yield k, v, u

    def best_additional(members, residual) -> int:
        key = state_key(members, residual)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best = 0
        for k, v, u in moves(members, residual):
            residual[u] -= 1
            nxt = members[:k] + (members[k] | {v},) + members[k + 1 :]
            gain = 1 + best_additional(nxt, residual)
            residual[u] += 1
            if gain > best:
                best = gain
        memo[key] = best
        return best

    members = tuple(frozenset({source}) for _ in range(num_trees))
    residual = list(graph.capacity)
    score = best_additional(members, residual)

    # replay an optimal trajectory off the memo table
    parents: tuple[dict[int, int], ...] = tuple({} for _ in range(num_trees))
    remaining = score
    while remaining > 0:
        for k, v, u in moves(members, residual):
            residual[u] -= 1
            nxt = members[:k] + (members[k] | {v},) + members[k + 1 :]
            if 1 + memo.get(state_key(nxt, residual), -2) == remaining:
                parents[k][v] = u
                members = nxt
                remaining -= 1
                break
            residual[u] += 1
        else:  # pragma: no cover - memo is complete by construction
            raise AssertionError("failed to replay optimal forest")
    forest = Forest(parents)
    validate_forest(instance, forest)
    return ExactResult(forest, score, proven_optimal=True)


# ---------------------------------------------------------------------------
# branch and bound


@dataclass
class _SearchState:
    members: list[set[int]]
    residual: list[int]
    parents: list[dict[int, int]]
    forbidden: list[set[tuple[int, int]]]
    score: int = 0
    nodes: int = field(default=0)


def _reach_sets(graph: OverlayGraph, state: _SearchState, k: int) -> tuple[set[int], set[int]]:
    """Nodes that could still join tree k, and the relays that could serve.

    Admissible overestimate: a non-member relays as soon as its current
    residual is positive, and forbidden parent edges are skipped.
    """
    adj = graph.adjacency
    members = state.members[k]
    forb = state.forbidden[k]
    relays = {u for u in members if state.residual[u] > 0}
    joinable: set[int] = set()
    queue = deque(relays)
    relay_seen = set(relays)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v in members or (u, v) in forb:
                continue
            joinable.add(v)
            if state.residual[v] > 0 and v not in relay_seen:
                relay_seen.add(v)
                queue.append(v)
    return joinable, relay_seen


def _chain_growth(start_capacity: int, pool_residuals: list[int]) -> int:
    """Most nodes a tree can still absorb when each new member must be served
    by an already-served node: optimistic level-by-level growth taking the
    largest residuals first."""
    avail = sorted(pool_residuals, reverse=True)
    total = 0
    cap = start_capacity
    idx = 0
    while cap > 0 and idx < len(avail):
        take = min(cap, len(avail) - idx)
        total += take
        cap = sum(avail[idx : idx + take])
        idx += take
    return total


def _cheap_bound(graph: OverlayGraph, state: _SearchState) -> tuple[int, list[set[int]], list[set[int]]]:
    joinables: list[set[int]] = []
    relay_sets: list[set[int]] = []
    reach_total = 0
    slot_nodes: set[int] = set()
    for k in range(len(state.members)):
        joinable, relays = _reach_sets(graph, state, k)
        joinables.append(joinable)
        relay_sets.append(relays)
        frontier_capacity = sum(
            state.residual[u] for u in state.members[k] if state.residual[u] > 0
        )
        chain = _chain_growth(frontier_capacity, [state.residual[v] for v in joinable])
        reach_total += min(len(joinable), chain)
        slot_nodes |= relays
    slots = sum(state.residual[u] for u in slot_nodes)
    return min(reach_total, slots), joinables, relay_sets


def _flow_bound(
    graph: OverlayGraph,
    state: _SearchState,
    joinables: list[set[int]],
    relay_sets: list[set[int]],
) -> int:
    """Relaxed assignment bound: each joinable (node, tree) needs one unit of
    residual from a potential relay, ignoring tree-internal ordering."""
    num_trees = len(state.members)
    n = graph.n
    suppliers = sorted(set().union(*relay_sets)) if relay_sets else []
    sup_index = {u: 1 + i for i, u in enumerate(suppliers)}
    tails: list[int] = []
    heads: list[int] = []
    caps: list[int] = []
    next_vertex = 1 + len(suppliers)
    unit_index: dict[tuple[int, int], int] = {}
    for k in range(num_trees):
        for v in sorted(joinables[k]):
            unit_index[(k, v)] = next_vertex
            next_vertex += 1
    sink = next_vertex
    for u in suppliers:
        tails.append(0)
        heads.append(sup_index[u])
        caps.append(state.residual[u])
    for (k, v), idx in unit_index.items():
        forb = state.forbidden[k]
        for u in graph.neighbors(v):
            if u in sup_index and u in relay_sets[k] and (u, v) not in forb:
                tails.append(sup_index[u])
                heads.append(idx)
                caps.append(1)
        tails.append(idx)
        heads.append(sink)
        caps.append(1)
    network = FlowNetwork(sink + 1, 0, sink, tuple(tails), tuple(heads), tuple(caps))
    return max_flow(network).value


def branch_and_bound(
    instance: DcdaInstance,
    time_budget: float | None = None,
    use_flow_bound: bool = True,
) -> ExactResult:
    """Exact search over frontier attachments with admissible pruning.

    Each decision picks a frontier edge (fulfilled parent, joinable node,
    tree) and branches on using it versus forbidding it.  Returns the best
    forest found; ``proven_optimal`` is False only when the time budget
    interrupted the search.
    """
    graph, source, num_trees = instance.graph, instance.source, instance.k
    adj = graph.adjacency
    deadline = None if time_budget is None else time.monotonic() + float(time_budget)
    state = _SearchState(
        members=[{source} for _ in range(num_trees)],
        residual=list(graph.capacity),
        parents=[{} for _ in range(num_trees)],
        forbidden=[set() for _ in range(num_trees)],
    )
    best = {"score": -1, "parents": None, "aborted": False}

    # seed the incumbent with heuristic runs so pruning bites immediately
    from . import heuristics

    for heuristic_seed in range(4):
        for algo in (heuristics.greedy, heuristics.random_variant):
            candidate = algo(instance, heuristic_seed)
            if candidate.total_members() > best["score"]:
                best["score"] = candidate.total_members()
                best["parents"] = candidate.parents

    def snapshot() -> tuple[dict[int, int], ...]:
        return tuple(dict(tree) for tree in state.parents)

    def canonical_trees() -> list[int]:
        """Skip trees whose full state duplicates a lower-indexed one; any
        completion in the duplicate maps to the canonical tree by swapping."""
        out = []
        for k in range(num_trees):
            duplicate = any(
                state.members[j] == state.members[k]
                and state.forbidden[j] == state.forbidden[k]
                for j in out
            )
            if not duplicate:
                out.append(k)
        return out

    def pick_decision() -> tuple[int, int, int] | None:
        """Fail-first frontier edge: a child with the fewest usable parents,
        preferring high greedy gain among equals; the branched parent is the
        one with the largest residual."""
        best_edge = None
        best_rank = None
        for k in canonical_trees():
            members = state.members[k]
            forb = state.forbidden[k]
            for v in range(graph.n):
                if v in members:
                    continue
                parent = None
                parent_res = 0
                options = 0
                for u in adj[v]:
                    if u in members and state.residual[u] > 0 and (u, v) not in forb:
                        options += 1
                        if state.residual[u] > parent_res:
                            parent, parent_res = u, state.residual[u]
                if parent is None:
                    continue
                fresh = sum(1 for w in adj[v] if w not in members)
                gain = min(fresh, state.residual[v])
                rank = (options, -gain, v, k)
                if best_rank is None or rank < best_rank:
                    best_rank = rank
                    best_edge = (k, v, parent)
        return best_edge

    def dfs() -> None:
        if deadline is not None and time.monotonic() > deadline:
            best["aborted"] = True
            return
        bound, joinables, relay_sets = _cheap_bound(graph, state)
        if state.score + bound <= best["score"]:
            return
        if use_flow_bound and bound > 0:
            flow_cap = _flow_bound(graph, state, joinables, relay_sets)
            if state.score + flow_cap <= best["score"]:
                return
        decision = pick_decision()
        if decision is None:
            if state.score > best["score"]:
                best["score"] = state.score
                best["parents"] = snapshot()
            return
        k, v, u = decision
        # branch 1: attach v under u in tree k
        state.members[k].add(v)
        state.parents[k][v] = u
        state.residual[u] -= 1
        state.score += 1
        dfs()
        state.score -= 1
        state.residual[u] += 1
        del state.parents[k][v]
        state.members[k].remove(v)
        if best["aborted"]:
            return
        # branch 2: never use this parent edge in tree k; trees in an
        # identical state inherit the ban (tree-swap symmetry)
        banned = [k]
        state.forbidden[k].add((u, v))
        for k2 in range(num_trees):
            if k2 != k and state.members[k2] == state.members[k]:
                probe = state.forbidden[k].difference({(u, v)})
                if state.forbidden[k2] == probe:
                    state.forbidden[k2].add((u, v))
                    banned.append(k2)
        dfs()
        for k2 in banned:
            state.forbidden[k2].remove((u, v))

    dfs()
    if best["parents"] is None:
        best["score"] = 0
        best["parents"] = tuple({} for _ in range(num_trees))
    forest = Forest(tuple(dict(t) for t in best["parents"]))
    validate_forest(instance, forest)
    return ExactResult(forest, best["score"], proven_optimal=not best["aborted"])


# ---------------------------------------------------------------------------
# 3-CNF reduction

Clause = tuple[int, int, int]


def sat_to_dcda(clauses: Sequence[Sequence[int]], num_vars: int | None = None) -> tuple[DcdaInstance, int]:
    """Reduce a 3-CNF formula to a single-tree instance.

    Literals are signed 1-based variable ids.  The instance has a selector
    node per variable (capacity 1, so the tree picks exactly one polarity),
    a node per literal, and a zero-capacity node per clause adjacent to its
    literals.  Returns the instance and the membership target ``gamma``:
    the optimum reaches gamma - 1 non-source members iff the formula is
    satisfiable.
    """
    parsed: list[Clause] = []
    for ci, clause in enumerate(clauses):
        lits = tuple(int(x) for x in clause)
        if len(lits) != 3:
            raise ValueError(f"clause {ci} must have exactly 3 literals")
        if any(lit == 0 for lit in lits):
            raise ValueError(f"clause {ci} contains a zero literal")
        if len({abs(lit) for lit in lits}) != 3:
            raise ValueError(f"clause {ci} must use 3 distinct variables")
        parsed.append(lits)  # type: ignore[arg-type]
    seen_vars = {abs(lit) for clause in parsed for lit in clause}
    n = num_vars if num_vars is not None else (max(seen_vars) if seen_vars else 0)
    if n < max(seen_vars, default=0):
        raise ValueError("num_vars smaller than the largest variable id")
    if n < 1:
        raise ValueError("formula must have at least one variable")
    m = len(parsed)

    def selector(i: int) -> int:
        return i

    def literal(lit: int) -> int:
        i = abs(lit)
        return n + 2 * (i - 1) + (1 if lit > 0 else 2)

    def clause_node(j: int) -> int:
        return 3 * n + 1 + j

    total = 1 + 3 * n + m
    edges = []
    for i in range(1, n + 1):
        edges.append((0, selector(i)))
        edges.append((selector(i), literal(i)))
        edges.append((selector(i), literal(-i)))
    for j, clause in enumerate(parsed):
        for lit in clause:
            edges.append((literal(lit), clause_node(j)))
    capacity = [0] * total
    capacity[0] = n
    for i in range(1, n + 1):
        capacity[selector(i)] = 1
        capacity[literal(i)] = m
        capacity[literal(-i)] = m
    graph = overlay_from_edges(total, edges, capacity, [1] * total)
    gamma = 1 + 2 * n + m
    return DcdaInstance(graph, 0, 1), gamma


def parse_dimacs(text: str) -> tuple[int, list[Clause]]:
    """Parse DIMACS CNF; every clause must have exactly three literals."""
    num_vars = None
    num_clauses = None
    clauses: list[Clause] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: malformed problem line")
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ValueError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                if len(current) != 3:
                    raise ValueError(
                        f"line {lineno}: clause has {len(current)} literals, expected 3"
                    )
                clauses.append(tuple(current))  # type: ignore[arg-type]
                current = []
            else:
                current.append(lit)
    if current:
        raise ValueError("unterminated clause at end of file")
    if num_vars is None:
        raise ValueError("missing 'p cnf' problem line")
    if num_clauses is not None and num_clauses != len(clauses):
        raise ValueError(f"expected {num_clauses} clauses, found {len(clauses)}")
    return num_vars, clauses
