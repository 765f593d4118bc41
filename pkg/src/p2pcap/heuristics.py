"""Polynomial-time tree builders: greedy, random, pre-fixed, and a GA.

All four share one incremental state machine.  Per tree, every node is in
exactly one of four states: not yet reachable, accessible (a served
neighbor with spare capacity exists), fulfilled (in the tree, can still
serve), or dead (in the tree, capacity exhausted).  Construction repeatedly
picks a tree with accessible nodes, selects one accessible node, and
attaches it under the fulfilled neighbor with the most remaining capacity.
The algorithms differ only in how the node is selected:

* greedy    -- highest score min(#not-yet-reachable neighbors, own capacity),
               score ties broken by the larger remaining capacity;
* random    -- uniform among accessible nodes;
* pre-fixed -- capacity is split per tree up front, then K independent
               greedy trees are grown on their own budgets;
* genetic   -- a GA over per-tree priority permutations, decoded by serving
               the accessible node with the highest priority.

All remaining ties resolve to the lowest node index, so a (instance, seed)
pair always yields the same forest.

The inner loop is compiled with numba; the kernel is deliberately free of
Python objects so the same code also runs uncompiled if numba is absent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

from .dcda import DcdaInstance, Forest, validate_forest

_NOT_ACC = 0
_ACC = 1
_FULFILLED = 2
_DEAD = 3

MODE_GREEDY = 0
MODE_RANDOM = 1
MODE_PRIORITY = 2


@njit(cache=True)
def _grow(indptr, indices, residual, num_trees, source, mode, priorities, uniforms, parent_out):
    n = residual.shape[0]
    state = np.zeros((num_trees, n), dtype=np.int8)
    acc_cnt = np.zeros((num_trees, n), dtype=np.int64)
    nn_cnt = np.zeros((num_trees, n), dtype=np.int64)
    access = np.zeros(num_trees, dtype=np.int64)
    for k in range(num_trees):
        for v in range(n):
            parent_out[k, v] = -1
    for k in range(num_trees):
        if residual[source] > 0:
            state[k, source] = _FULFILLED
            for idx in range(indptr[source], indptr[source + 1]):
                w = indices[idx]
                acc_cnt[k, w] = 1
                state[k, w] = _ACC
                access[k] += 1
        else:
            state[k, source] = _DEAD
        for v in range(n):
            cnt = 0
            for idx in range(indptr[v], indptr[v + 1]):
                if state[k, indices[idx]] == _NOT_ACC:
                    cnt += 1
            nn_cnt[k, v] = cnt

    upos = 0
    while True:
        nonempty = 0
        for k in range(num_trees):
            if access[k] > 0:
                nonempty += 1
        if nonempty == 0:
            break
        pick = int(uniforms[upos] * nonempty)
        upos += 1
        if pick >= nonempty:
            pick = nonempty - 1
        tree = -1
        seen = -1
        for k in range(num_trees):
            if access[k] > 0:
                seen += 1
                if seen == pick:
                    tree = k
                    break

        sel = -1
        if mode == MODE_GREEDY:
            best_score = np.int64(-1)
            best_sel_res = np.int64(-1)
            for v in range(n):
                if state[tree, v] == _ACC:
                    score = nn_cnt[tree, v]
                    if residual[v] < score:
                        score = residual[v]
                    if score > best_score or (
                        score == best_score and residual[v] > best_sel_res
                    ):
                        best_score = score
                        best_sel_res = residual[v]
                        sel = v
        elif mode == MODE_RANDOM:
            pick = int(uniforms[upos] * access[tree])
            upos += 1
            if pick >= access[tree]:
                pick = access[tree] - 1
            seen = -1
            for v in range(n):
                if state[tree, v] == _ACC:
                    seen += 1
                    if seen == pick:
                        sel = v
                        break
        else:
            best_pr = np.int64(-1)
            for v in range(n):
                if state[tree, v] == _ACC:
                    if priorities[tree, v] > best_pr:
                        best_pr = priorities[tree, v]
                        sel = v

        par = -1
        best_res = np.int64(0)
        for idx in range(indptr[sel], indptr[sel + 1]):
            u = indices[idx]
            if state[tree, u] == _FULFILLED and residual[u] > best_res:
                best_res = residual[u]
                par = u
        parent_out[tree, sel] = par

        access[tree] -= 1
        if residual[sel] > 0:
            state[tree, sel] = _FULFILLED
            for idx in range(indptr[sel], indptr[sel + 1]):
                w = indices[idx]
                acc_cnt[tree, w] += 1
                if state[tree, w] == _NOT_ACC:
                    state[tree, w] = _ACC
                    access[tree] += 1
                    for jdx in range(indptr[w], indptr[w + 1]):
                        nn_cnt[tree, indices[jdx]] -= 1
        else:
            state[tree, sel] = _DEAD

        residual[par] -= 1
        if residual[par] == 0:
            for k2 in range(num_trees):
                if state[k2, par] == _FULFILLED:
                    state[k2, par] = _DEAD
                    for idx in range(indptr[par], indptr[par + 1]):
                        w = indices[idx]
                        acc_cnt[k2, w] -= 1
                        if state[k2, w] == _ACC and acc_cnt[k2, w] == 0:
                            state[k2, w] = _NOT_ACC
                            access[k2] -= 1
                            for jdx in range(indptr[w], indptr[w + 1]):
                                nn_cnt[k2, indices[jdx]] += 1


def _csr_arrays(instance: DcdaInstance) -> tuple[np.ndarray, np.ndarray]:
    adjacency = instance.graph.adjacency
    indptr = np.zeros(len(adjacency) + 1, dtype=np.int64)
    for u, nbrs in enumerate(adjacency):
        indptr[u + 1] = indptr[u] + len(nbrs)
    indices = np.empty(indptr[-1], dtype=np.int64)
    pos = 0
    for nbrs in adjacency:
        for v in nbrs:
            indices[pos] = v
            pos += 1
    return indptr, indices


def _forest_from_parents(instance: DcdaInstance, parent_out: np.ndarray) -> Forest:
    parents = tuple(
        {int(v): int(parent_out[k, v]) for v in range(instance.graph.n) if parent_out[k, v] >= 0}
        for k in range(instance.k)
    )
    forest = Forest(parents)
    validate_forest(instance, forest)
    return forest


def _run_kernel(
    instance: DcdaInstance,
    mode: int,
    seed: int | None,
    priorities: np.ndarray | None = None,
    capacity: np.ndarray | None = None,
    num_trees: int | None = None,
) -> np.ndarray:
    graph = instance.graph
    trees = instance.k if num_trees is None else num_trees
    indptr, indices = _csr_arrays(instance)
    residual = (
        np.array(graph.capacity, dtype=np.int64) if capacity is None else capacity.copy()
    )
    if priorities is None:
        priorities = np.zeros((trees, graph.n), dtype=np.int64)
    rng = np.random.default_rng(seed)
    uniforms = rng.random(2 * trees * graph.n + 8)
    parent_out = np.full((trees, graph.n), -1, dtype=np.int64)
    _grow(
        indptr, indices, residual, trees, instance.source, mode, priorities, uniforms, parent_out
    )
    return parent_out


def greedy(instance: DcdaInstance, seed: int) -> Forest:
    """Score-driven construction; the tree to extend is drawn uniformly among
    those with accessible nodes, everything else is deterministic."""
    return _forest_from_parents(instance, _run_kernel(instance, MODE_GREEDY, seed))


def random_variant(instance: DcdaInstance, seed: int) -> Forest:
    """Like greedy but the node to serve is drawn uniformly from the
    accessible set."""
    return _forest_from_parents(instance, _run_kernel(instance, MODE_RANDOM, seed))


def split_capacity(capacity: int, num_trees: int) -> list[int]:
    """Even split with the remainder going to the lowest tree indices."""
    base, rem = divmod(capacity, num_trees)
    return [base + (1 if k < rem else 0) for k in range(num_trees)]


def prefixed_variant(instance: DcdaInstance, seed: int) -> Forest:
    """Split each capacity across trees up front, then grow K independent
    greedy trees on their private budgets."""
    graph = instance.graph
    merged = np.full((instance.k, graph.n), -1, dtype=np.int64)
    for k in range(instance.k):
        budget = np.array(
            [split_capacity(graph.capacity[u], instance.k)[k] for u in range(graph.n)],
            dtype=np.int64,
        )
        parent_out = _run_kernel(
            instance, MODE_GREEDY, seed, capacity=budget, num_trees=1
        )
        merged[k, :] = parent_out[0, :]
    return _forest_from_parents(instance, merged)


# ---------------------------------------------------------------------------
# genetic algorithm


@dataclass
class _Genome:
    ordering: np.ndarray  # non-source nodes sorted by descending priority
    fitness: int


def _order_crossover(rng: np.random.Generator, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    size = len(p1)
    a, b = sorted(int(x) for x in rng.integers(0, size + 1, 2))
    child = np.empty(size, dtype=p1.dtype)
    child[a:b] = p1[a:b]
    in_segment = np.zeros(int(p1.max(initial=-1)) + 2, dtype=bool)
    in_segment[p1[a:b]] = True
    fill = p2[~in_segment[p2]]
    child[:a] = fill[:a]
    child[b:] = fill[a:]
    return child


def genetic(
    instance: DcdaInstance,
    population: int = 150,
    generations: int = 300,
    *,
    seed: int,
    mutation_rate: float = 0.1,
) -> Forest:
    """GA over a service-order permutation of the non-source nodes.

    A genome is one priority ordering applied to every tree; decoding serves
    the accessible node with the highest priority, with the greedy parent
    rule.  Tournament selection of size 2, order crossover, one random
    transposition with probability ``mutation_rate`` per offspring, and the
    best genome carried over unchanged.  Fitness is the score of the decoded
    forest.  The tree-selection stream is drawn once per run and shared by
    every decode, so fitness is a deterministic function of the genome and
    all genomes compete under the same construction schedule.
    """
    if population < 2:
        raise ValueError("population must be at least 2")
    graph = instance.graph
    n, num_trees = graph.n, instance.k
    rng = np.random.default_rng(seed)
    indptr, indices = _csr_arrays(instance)
    capacity = np.array(graph.capacity, dtype=np.int64)
    nodes = np.array([v for v in range(n) if v != instance.source], dtype=np.int64)
    tree_stream = rng.random(2 * num_trees * n + 8)
    ranks = np.arange(len(nodes), 0, -1, dtype=np.int64)

    def decode(ordering: np.ndarray) -> tuple[np.ndarray, int]:
        priorities = np.full((num_trees, n), -1, dtype=np.int64)
        for k in range(num_trees):
            priorities[k, ordering] = ranks
        parent_out = np.full((num_trees, n), -1, dtype=np.int64)
        _grow(
            indptr,
            indices,
            capacity.copy(),
            num_trees,
            instance.source,
            MODE_PRIORITY,
            priorities,
            tree_stream,
            parent_out,
        )
        return parent_out, int((parent_out >= 0).sum())

    def fresh_genome() -> _Genome:
        ordering = rng.permutation(nodes)
        _, fitness = decode(ordering)
        return _Genome(ordering, fitness)

    pop = [fresh_genome() for _ in range(population)]

    def tournament() -> _Genome:
        i, j = rng.integers(0, population, 2)
        a, b = pop[int(i)], pop[int(j)]
        return a if a.fitness >= b.fitness else b

    for _ in range(generations):
        elite = max(pop, key=lambda g: g.fitness)
        next_pop = [elite]
        while len(next_pop) < population:
            pa, pb = tournament(), tournament()
            ordering = _order_crossover(rng, pa.ordering, pb.ordering)
            if len(nodes) >= 2 and rng.random() < mutation_rate:
                i, j = rng.integers(0, len(nodes), 2)
                ordering[int(i)], ordering[int(j)] = ordering[int(j)], ordering[int(i)]
            _, fitness = decode(ordering)
            next_pop.append(_Genome(ordering, fitness))
        pop = next_pop

    best = max(pop, key=lambda g: g.fitness)
    parent_out, _ = decode(best.ordering)
    return _forest_from_parents(instance, parent_out)
