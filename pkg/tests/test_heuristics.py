import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from p2pcap import (
    DcdaInstance,
    brute_force,
    genetic,
    greedy,
    overlay_from_edges,
    prefixed_variant,
    random_variant,
    split_capacity,
    validate_forest,
)

from helpers import random_dcda, reference_greedy


def path_instance(k=1):
    g = overlay_from_edges(3, [(0, 1), (1, 2)], [1, 1, 1], [1, 1, 1])
    return DcdaInstance(g, 0, k)


ALGORITHMS = [
    ("greedy", greedy),
    ("random", random_variant),
    ("prefixed", prefixed_variant),
]


# ---------------------------------------------------------------------------
# fixed small cases


@pytest.mark.parametrize("name, algo", ALGORITHMS)
def test_path_is_fully_served(name, algo):
    forest = algo(path_instance(), 0)
    assert forest.parents == ({1: 0, 2: 1},)


def test_star_fanout_capped():
    g = overlay_from_edges(4, [(0, 1), (0, 2), (0, 3)], [2, 0, 0, 0], [1] * 4)
    inst = DcdaInstance(g, 0, 1)
    forest = greedy(inst, 0)
    # all leaves tie at score zero and zero capacity: lowest indices win
    assert forest.parents == ({1: 0, 2: 0},)


def test_dead_source_yields_empty_forest():
    g = overlay_from_edges(3, [(0, 1), (1, 2)], [0, 5, 5], [1] * 3)
    inst = DcdaInstance(g, 0, 2)
    for _, algo in ALGORITHMS:
        assert algo(inst, 1).total_members() == 0


# ---------------------------------------------------------------------------
# determinism and validity


@pytest.mark.parametrize("name, algo", ALGORITHMS)
def test_same_seed_same_forest(name, algo):
    inst = random_dcda(7, 40, k=3, cap_low=2, cap_high=4)
    assert algo(inst, 123).parents == algo(inst, 123).parents


def test_ga_same_seed_same_forest():
    inst = random_dcda(7, 12, k=2, cap_low=1, cap_high=3)
    a = genetic(inst, population=8, generations=4, seed=5)
    b = genetic(inst, population=8, generations=4, seed=5)
    assert a.parents == b.parents


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_outputs_always_valid_forests(seed):
    inst = random_dcda(seed, 10 + seed % 10, k=1 + seed % 3, cap_low=0, cap_high=4)
    for _, algo in ALGORITHMS:
        forest = algo(inst, seed)
        validate_forest(inst, forest)
        # polynomial step bound: at most K*(n-1) attachments happened
        assert forest.total_members() <= inst.k * (inst.graph.n - 1)


# ---------------------------------------------------------------------------
# equivalence with the literal reference implementation


def test_greedy_matches_reference():
    for seed in range(12):
        inst = random_dcda(seed, 20 + seed, k=1 + seed % 3, cap_low=0, cap_high=4)
        fast = greedy(inst, seed)
        slow = reference_greedy(inst, seed, "greedy")
        assert fast.parents == slow.parents


def test_random_matches_reference():
    for seed in range(12):
        inst = random_dcda(seed, 15 + seed, k=1 + seed % 3, cap_low=1, cap_high=4)
        fast = random_variant(inst, seed)
        slow = reference_greedy(inst, seed, "random")
        assert fast.parents == slow.parents


def test_state_table_consistency_is_checked_by_reference():
    # reference_greedy re-derives the four state sets from scratch at every
    # step and asserts they match the incrementally maintained ones; running
    # it at all is the property check
    inst = random_dcda(3, 30, k=3, cap_low=0, cap_high=4)
    reference_greedy(inst, 3, "greedy")
    reference_greedy(inst, 3, "random")


# ---------------------------------------------------------------------------
# pre-fixed capacity split


def test_split_capacity_even():
    assert split_capacity(3, 3) == [1, 1, 1]


def test_split_capacity_remainder_to_low_trees():
    assert split_capacity(4, 3) == [2, 1, 1]
    assert split_capacity(2, 3) == [1, 1, 0]
    assert split_capacity(0, 3) == [0, 0, 0]


def test_split_sums_to_capacity():
    for c in range(8):
        for k in range(1, 5):
            assert sum(split_capacity(c, k)) == c


def test_prefixed_respects_private_budgets():
    inst = random_dcda(5, 25, k=3, cap_low=2, cap_high=4)
    forest = prefixed_variant(inst, 9)
    counts_per_tree = [
        {u: sum(1 for p in tree.values() if p == u) for u in set(tree.values())}
        for tree in forest.parents
    ]
    for k, counts in enumerate(counts_per_tree):
        for u, used in counts.items():
            assert used <= split_capacity(inst.graph.capacity[u], inst.k)[k]


# ---------------------------------------------------------------------------
# dominance and GA behavior


def test_heuristics_never_beat_exact():
    for seed in range(15):
        inst = random_dcda(seed, 8, k=1 + seed % 2, cap_low=0, cap_high=4)
        exact = brute_force(inst).score
        for _, algo in ALGORITHMS:
            assert algo(inst, seed).total_members() <= exact
        ga = genetic(inst, population=10, generations=10, seed=seed)
        assert ga.total_members() <= exact


def test_ga_degenerate_run_is_well_defined():
    inst = random_dcda(2, 10, k=2, cap_low=1, cap_high=3)
    forest = genetic(inst, population=2, generations=0, seed=0)
    validate_forest(inst, forest)


def test_ga_rejects_tiny_population():
    with pytest.raises(ValueError):
        genetic(path_instance(), population=1, generations=1, seed=0)


def test_ga_finds_optimum_on_tiny_instances():
    for seed in range(6):
        inst = random_dcda(seed, 7, k=1, cap_low=1, cap_high=4)
        exact = brute_force(inst).score
        ga = genetic(inst, population=30, generations=40, seed=seed)
        assert ga.total_members() == exact


def test_ga_decode_matches_reference_priority_mode():
    inst = random_dcda(11, 14, k=2, cap_low=1, cap_high=3)
    n = inst.graph.n
    rng = np.random.default_rng(4)
    nodes = [v for v in range(n) if v != inst.source]
    order = list(rng.permutation(nodes))
    priorities = [{v: len(order) - order.index(v) if v in order else -1 for v in range(n)}] * inst.k

    # population=2, generations=0 with identical seeds gives two random
    # genomes; instead drive the reference directly with the same stream
    from p2pcap.heuristics import MODE_PRIORITY, _csr_arrays, _grow

    indptr, indices = _csr_arrays(inst)
    pr = np.full((inst.k, n), -1, dtype=np.int64)
    ranks = np.arange(len(order), 0, -1, dtype=np.int64)
    for k in range(inst.k):
        pr[k, np.array(order)] = ranks
    stream_rng = np.random.default_rng(77)
    uniforms = stream_rng.random(2 * inst.k * n + 8)
    parent_out = np.full((inst.k, n), -1, dtype=np.int64)
    _grow(
        indptr, indices, np.array(inst.graph.capacity, dtype=np.int64), inst.k,
        inst.source, MODE_PRIORITY, pr, uniforms, parent_out,
    )
    slow = reference_greedy(inst, 77, "priority", priorities=priorities)
    fast = {
        k: {v: int(parent_out[k, v]) for v in range(n) if parent_out[k, v] >= 0}
        for k in range(inst.k)
    }
    assert fast == {k: dict(t) for k, t in enumerate(slow.parents)}
