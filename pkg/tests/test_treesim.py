import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagfrag import equilibrium as eq
from coagfrag import limitlaws as ll
from coagfrag import treesim as ts
from coagfrag.rng import substream


def _tree_with(min_internal, seed, cap=5000):
    while True:
        t, rng = _tree(seed, cap)
        if t.internal().size >= min_internal:
            return t, rng
        seed += 1


def _tree(seed, cap=5000):
    rng = np.random.default_rng(seed)
    while True:
        t = ts.sample_bcgwt(rng, cap)
        if t is not None:
            return ts.assign_edge_lengths(t, rng), rng


def _check_structure(t):
    alive = np.flatnonzero(t.alive)
    for v in alive:
        kids = (t.left[v], t.right[v])
        assert (kids[0] < 0) == (kids[1] < 0)
        if t.parent[v] >= 0:
            assert t.alive[t.parent[v]]
            assert t.height[v] == t.height[t.parent[v]] + t.edge_length[v]
        else:
            assert t.height[v] == t.edge_length[v]
    assert ts.leaf_count(t) == t.internal().size + 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tree_structure(seed):
    t, _ = _tree(seed)
    _check_structure(t)
    assert np.all(t.edge_length > 0)
    # breadth-first arena: parents precede children
    assert np.all(t.parent[1:] < np.arange(1, t.parent.size))


def test_unpruned_leaf_law():
    rng = np.random.default_rng(11)
    N, ones, twos = 100_000, 0, 0
    for _ in range(N):
        t = ts.sample_bcgwt(rng, 500)
        if t is None:
            continue
        L = ts.leaf_count(t)
        ones += L == 1
        twos += L == 2
    assert ones / N == pytest.approx(0.5, abs=0.005)
    assert twos / N == pytest.approx(0.125, abs=0.004)


def test_overflow_signal():
    rng = np.random.default_rng(0)
    results = [ts.sample_bcgwt(rng, 3) for _ in range(200)]
    assert any(r is None for r in results)
    assert all(r is None or r.size <= 3 for r in results)


def test_edge_lengths():
    rng = np.random.default_rng(5)
    lengths = []
    while sum(len(x) for x in lengths) < 100_000:
        t = ts.sample_bcgwt(rng, 2000)
        if t is not None:
            lengths.append(ts.assign_edge_lengths(t, rng).edge_length)
    assert np.concatenate(lengths).mean() == pytest.approx(0.5, abs=0.01)
    single = ts.DiscreteTree(*(np.array([v]) for v in (-1, -1, -1)), np.zeros(1), np.zeros(1), np.ones(1, dtype=bool))
    single = ts.assign_edge_lengths(single, rng)
    assert single.height[0] == single.edge_length[0] > 0


def test_mark_counts_on_fixed_tree():
    t, _ = _tree_with(5, 3)
    n = 2.0
    mean = float(t.height[t.internal()].sum()) / n
    rng = np.random.default_rng(9)
    R = 20_000
    counts = np.array([len(ts.scatter_marks(t, n, rng)) for _ in range(R)])
    assert abs(counts.mean() - mean) <= 3 * math.sqrt(mean / R)
    m = ts.scatter_marks(t, 0.05, rng)
    assert np.all(m.position > 0) and np.all(m.position < t.height[m.owner])
    assert np.all(m.active)


def test_marks_vanish_for_huge_n():
    t, _ = _tree_with(50, 21)
    # P(any mark) = 1 - exp(-sum h / n)
    assert 1 - math.exp(-float(t.height[t.internal()].sum()) / 1e9) <= 1e-6


def test_prune_identity_and_root_cut():
    t, rng = _tree_with(1, 4)
    empty = ts.MarkList(np.zeros(0, dtype=np.int64), np.zeros(0))
    same = ts.prune(t, empty)
    for a, b in zip((t.parent, t.left, t.right, t.edge_length, t.height, t.alive), (same.parent, same.left, same.right, same.edge_length, same.height, same.alive)):
        assert np.array_equal(a, b)
    owner = int(t.internal()[-1])
    low = ts.MarkList(np.array([owner]), np.array([0.5 * t.edge_length[0]]))
    cut = ts.prune(t, low)
    assert ts.leaf_count(cut) == 1
    assert low.active[0]  # input marks untouched


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0))
def test_pruned_is_subtree_and_matches_top_mark_rule(seed, n):
    t, rng = _tree(seed, 3000)
    marks = ts.scatter_marks(t, n, rng)
    out = ts.prune(t, marks)
    assert np.all(~out.alive | t.alive)
    assert out.alive[0]
    _check_structure(out)
    assert ts.leaf_count(out) == ts.evaluate_top_marks(t, marks)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 20.0))
def test_size_biased_literal_tree_matches_top_mark_rule(seed, n):
    built = ts._literal_sb_tree(n, np.random.default_rng(seed), 20_000)
    if built is None:
        return
    tree, marks = built
    out = ts.prune(tree, marks)
    _check_structure(out)
    assert ts.leaf_count(out) >= 1
    assert ts.leaf_count(out) == ts.evaluate_top_marks(tree, marks)


def test_lazy_matches_exact_law_n5():
    law = ts.empirical_law(ts.PrunedTreeSampler(5), 200_000, 2000, seed=2)
    exact = eq.particle_law(eq.equilibrium_state(5))
    assert law.censored == 0
    assert ts.tv_distance(law, exact) <= 0.02
    sb = ts.empirical_law(ts.PrunedTreeSampler(5, size_biased=True), 200_000, 2000, seed=2)
    assert ts.tv_distance(sb, eq.sizebiased_law(eq.equilibrium_state(5))) <= 0.03


def _bracket_z(hits, censored, N, p):
    # censored draws could go either way; test p against both extremes
    lo, hi = hits / N, (hits + censored) / N
    se = math.sqrt(p * (1 - p) / N)
    return (lo - p) / se, (hi - p) / se


@pytest.mark.parametrize("size_biased", [False, True])
def test_literal_route_agrees_in_law(size_biased):
    n, N = 5, 3000
    x = ts.PrunedTreeSampler(n, size_biased=size_biased, node_cap=20_000, method="literal").batch(7, 0, N)
    state = eq.equilibrium_state(n)
    exact = eq.sizebiased_law(state) if size_biased else eq.particle_law(state)
    cens = int(np.sum(x < 0))
    # literal size-biased trees are heavier; the bracket below absorbs censoring
    assert cens / N < (0.1 if size_biased else 0.05)
    for k in (1, 2, 3):
        zlo, zhi = _bracket_z(int(np.sum(x == k)), cens, N, exact[k - 1])
        assert zlo <= 4 and zhi >= -4


@pytest.fixture(scope="module")
def huge_n_counts():
    return ts.pruned_leafcounts(1e9, 100_000, seed=1, node_cap=10**6)


def test_huge_n_law_is_limit_law(huge_n_counts):
    N, K = 100_000, 10**6
    x = huge_n_counts
    p = ll.limit_particle_law(K).p
    # lumped comparison: k <= 50 and a single tail bucket
    emp = np.bincount(np.clip(x[x > 0], 0, 51), minlength=52)[1:] / N
    ref = np.append(p[:50], 1 - p[:50].sum())
    assert 0.5 * np.abs(emp - ref).sum() + np.mean(x < 0) <= 0.01
    # full TV sits at the same finite-sample floor as iid draws from p itself
    rng = np.random.default_rng(0)
    idx = rng.choice(K + 1, size=N, p=np.append(p, 1 - p.sum()))
    oracle = np.where(idx == K, K + 1, idx + 1)
    floor = ts.tv_distance(ts.empirical_law_from_samples(oracle, K), p)
    got = ts.tv_distance(ts.empirical_law_from_samples(x, K), p)
    assert got <= floor + 0.005


@pytest.mark.xfail(strict=True, reason="heavy k^-3/2 tail: plug-in TV of any 1e5-sample law exceeds 0.01")
def test_huge_n_full_tv_below_001(huge_n_counts):
    x = huge_n_counts
    K = 10**6
    assert ts.tv_distance(ts.empirical_law_from_samples(x, K), ll.limit_particle_law(K).p) <= 0.01


def test_size_biased_mean_is_m2():
    x = ts.pruned_leafcounts(20, 100_000, seed=4, size_biased=True)
    assert np.all(x >= 1)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - eq.equilibrium_state(20).m2) <= 3 * se


def test_single_leaf_tree_stays_single():
    rng = np.random.default_rng(0)
    single = ts.DiscreteTree(*(np.array([v]) for v in (-1, -1, -1)), np.zeros(1), np.zeros(1), np.ones(1, dtype=bool))
    single = ts.assign_edge_lengths(single, rng)
    for n in (1, 3, 1e6):
        marks = ts.scatter_marks(single, n, rng)
        assert len(marks) == 0
        assert ts.leaf_count(ts.prune(single, marks)) == 1


def test_determinism_and_chunking():
    a = ts.pruned_leafcounts(5, 1000, seed=3)
    b = np.concatenate([ts.pruned_leafcounts(5, 400, seed=3), ts.pruned_leafcounts(5, 600, seed=3, start=400)])
    assert np.array_equal(a, b)
    assert np.array_equal(a, ts.pruned_leafcounts(5, 1000, seed=3))
    assert not np.array_equal(a, ts.pruned_leafcounts(5, 1000, seed=4))
    s = ts.sample_pruned_bcgwt_leafcount(5, (3, 123))
    assert s == a[123]
    lit = ts.PrunedTreeSampler(5, method="literal", node_cap=5000)
    assert np.array_equal(lit.batch(1, 10, 20), lit.batch(1, 10, 20))
    assert ts.sample_pruned_bcgwt_leafcount(5, substream(1, 6, 3), 5000, method="literal") == lit.batch(1, 3, 1)[0] or lit.batch(1, 3, 1)[0] < 0


def test_empirical_law_bookkeeping():
    x = np.array([1, 1, 2, 5, 9, -1, 3, 12])
    law = ts.empirical_law_from_samples(x, 6)
    assert law.counts.sum() + law.overflow + law.censored == law.N == 8
    assert law.overflow == 2 and law.censored == 1
    both = law.merge(ts.empirical_law_from_samples(x, 6))
    assert both.N == 16 and np.array_equal(both.counts, 2 * law.counts)


def test_tv_examples():
    law = ts.empirical_law_from_samples(np.array([1, 2] * 50), 2)
    assert ts.tv_distance(law, [0.5, 0.5]) == 0.0
    point = ts.empirical_law_from_samples(np.ones(100, dtype=int), 1000)
    assert ts.tv_distance(point, ll.limit_particle_law(1000).p) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 8), min_size=1, max_size=60), st.lists(st.integers(1, 8), min_size=1, max_size=60))
def test_tv_symmetric_and_bounded(a, b):
    la = ts.empirical_law_from_samples(np.array(a), 8)
    lb = ts.empirical_law_from_samples(np.array(b), 8)
    d1 = ts.tv_distance(la, lb.probabilities())
    d2 = ts.tv_distance(lb, la.probabilities())
    assert 0 <= d1 <= 1
    assert d1 == pytest.approx(d2, abs=1e-12)


def test_ks_distance():
    rng = np.random.default_rng(0)
    u = rng.random(20_000)
    assert ts.ks_distance(u, lambda x: np.clip(x, 0, 1)) <= 0.02
    assert ts.ks_distance(u, lambda x: np.clip(x, 0, 1) ** 2) >= 0.2
