"""Shared test utilities: independent oracles and a literal reference
implementation of the greedy construction.

Everything here deliberately avoids the package's fast paths so tests can
cross-check the production implementations against simpler code.
"""

from __future__ import annotations

import itertools

import numpy as np

from p2pcap import (
    DcdaInstance,
    Forest,
    OverlayGraph,
    assign_capacities,
    assign_demands,
    build_knn_overlay,
    overlay_from_edges,
    synth_latency_matrix,
)
from p2pcap.bench import derive_seed

# ---------------------------------------------------------------------------
# instance factories


def fig1_graph() -> OverlayGraph:
    """The worked four-node overlay: capacities 15/12/8/13, demands 10/17/10/5."""
    return overlay_from_edges(
        4, [(0, 1), (0, 2), (1, 3), (1, 2)], [15, 12, 8, 13], [10, 17, 10, 5]
    )


def random_overlay(
    seed: int,
    n: int,
    kappa: int = 3,
    cap_low: int = 0,
    cap_high: int = 4,
    demand: int = 3,
    matrix_size: int = 64,
) -> OverlayGraph:
    matrix = synth_latency_matrix(max(matrix_size, n + 2), derive_seed(seed, 11))
    rng = np.random.default_rng(derive_seed(seed, 12))
    sample = rng.choice(matrix.shape[0], size=n, replace=False)
    graph = build_knn_overlay(matrix, [int(x) for x in sample], min(kappa, n - 1))
    graph = assign_capacities(graph, cap_low, cap_high, derive_seed(seed, 13))
    return assign_demands(graph, demand)


def random_dcda(seed: int, n: int, k: int = 1, **kwargs) -> DcdaInstance:
    graph = random_overlay(seed, n, **kwargs)
    rng = np.random.default_rng(derive_seed(seed, 14))
    return DcdaInstance(graph, int(rng.integers(n)), k)


# ---------------------------------------------------------------------------
# linear-programming oracle for the stationary allocation


def lp_max_allocation(graph: OverlayGraph) -> float:
    """Maximum total allocation as a transportation LP over directed edges.

    Independent of the flow-network reduction: variables are edge weights,
    constrained by per-node capacity (out) and demand (in).
    """
    from scipy.optimize import linprog

    arcs = [(u, v) for u in range(graph.n) for v in graph.neighbors(u)]
    if not arcs:
        return 0.0
    num_arcs = len(arcs)
    rows = []
    rhs = []
    for u in range(graph.n):
        row = [1.0 if a == u else 0.0 for (a, _) in arcs]
        rows.append(row)
        rhs.append(float(graph.capacity[u]))
    for v in range(graph.n):
        row = [1.0 if b == v else 0.0 for (_, b) in arcs]
        rows.append(row)
        rhs.append(float(graph.demand[v]))
    res = linprog(
        c=[-1.0] * num_arcs,
        A_ub=rows,
        b_ub=rhs,
        bounds=[(0, None)] * num_arcs,
        method="highs",
    )
    assert res.status == 0, res.message
    return -res.fun


# ---------------------------------------------------------------------------
# exhaustive b-matching oracle


def enumerate_b_matching(left, right, b, edges) -> bool:
    """Does a semi-perfect b-matching exist?  Pure backtracking."""
    adj = {r: [l for (l, r2) in edges if r2 == r] for r in right}
    load = {l: 0 for l in left}

    def place(idx: int) -> bool:
        if idx == len(right):
            return True
        r = right[idx]
        for l in adj[r]:
            if load[l] < b[l]:
                load[l] += 1
                if place(idx + 1):
                    load[l] -= 1
                    return True
                load[l] -= 1
        return False

    return place(0)


# ---------------------------------------------------------------------------
# brute-force satisfiability


def sat_brute_force(num_vars: int, clauses) -> bool:
    for bits in range(1 << num_vars):
        ok = True
        for clause in clauses:
            if not any(
                (bits >> (abs(lit) - 1)) & 1 == (1 if lit > 0 else 0) for lit in clause
            ):
                ok = False
                break
        if ok:
            return True
    return False


def random_3cnf(rng: np.random.Generator, num_vars: int, num_clauses: int):
    clauses = []
    for _ in range(num_clauses):
        variables = rng.choice(num_vars, size=3, replace=False) + 1
        signs = rng.integers(0, 2, size=3) * 2 - 1
        clauses.append(tuple(int(v * s) for v, s in zip(variables, signs)))
    return clauses


# ---------------------------------------------------------------------------
# literal reference implementation of the greedy construction
#
# Maintains the four per-tree state sets directly and re-derives the
# accessible set from scratch every step, asserting it matches the
# incrementally maintained one.  Slow by design.


def reference_greedy(
    instance: DcdaInstance,
    seed: int,
    mode: str = "greedy",
    priorities: list[dict[int, int]] | None = None,
) -> Forest:
    graph, source, num_trees = instance.graph, instance.source, instance.k
    n = graph.n
    residual = list(graph.capacity)
    rng = np.random.default_rng(seed)
    uniforms = iter(rng.random(2 * num_trees * n + 8))

    members = [{source} for _ in range(num_trees)]
    fulfilled = [set() for _ in range(num_trees)]
    dead = [set() for _ in range(num_trees)]
    for k in range(num_trees):
        (fulfilled if residual[source] > 0 else dead)[k].add(source)
    access = [
        {v for v in range(n) if v not in members[k] and any(u in fulfilled[k] for u in graph.neighbors(v))}
        for k in range(num_trees)
    ]
    parents: list[dict[int, int]] = [{} for _ in range(num_trees)]

    def not_acc(k):
        return set(range(n)) - members[k] - access[k]

    while True:
        # re-derive the accessible sets and check the incremental ones
        for k in range(num_trees):
            derived = {
                v
                for v in range(n)
                if v not in members[k] and any(u in fulfilled[k] for u in graph.neighbors(v))
            }
            assert derived == access[k], f"state drift in tree {k}"
            assert fulfilled[k] == {u for u in members[k] if residual[u] > 0}
            assert dead[k] == {u for u in members[k] if residual[u] == 0}
        nonempty = [k for k in range(num_trees) if access[k]]
        if not nonempty:
            break
        pick = min(int(next(uniforms) * len(nonempty)), len(nonempty) - 1)
        tree = nonempty[pick]

        candidates = sorted(access[tree])
        if mode == "greedy":
            nacc = not_acc(tree)
            scores = {
                v: min(len(set(graph.neighbors(v)) & nacc), residual[v]) for v in candidates
            }
            sel = max(candidates, key=lambda v: (scores[v], residual[v], -v))
        elif mode == "random":
            pick = min(int(next(uniforms) * len(candidates)), len(candidates) - 1)
            sel = candidates[pick]
        else:
            sel = max(candidates, key=lambda v: priorities[tree][v])

        poss = sorted(set(graph.neighbors(sel)) & fulfilled[tree])
        par = max(poss, key=lambda u: (residual[u], -u))

        members[tree].add(sel)
        parents[tree][sel] = par
        access[tree].discard(sel)
        if residual[sel] > 0:
            fulfilled[tree].add(sel)
            for w in graph.neighbors(sel):
                if w not in members[tree]:
                    access[tree].add(w)
        else:
            dead[tree].add(sel)
        residual[par] -= 1
        if residual[par] == 0:
            for k in range(num_trees):
                if par in fulfilled[k]:
                    fulfilled[k].discard(par)
                    dead[k].add(par)
                    for w in list(access[k]):
                        if not any(u in fulfilled[k] for u in graph.neighbors(w)):
                            access[k].discard(w)
    return Forest(tuple(parents))
