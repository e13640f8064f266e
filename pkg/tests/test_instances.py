"""Instance generators, colex indexing, and interpolation paths.

Claims:
    - colex pair/tuple ranking is a bijection consistent across p
    - G(n,p) generation: exact degenerate cases (p=0, p=1), binomial edge
      counts, determinism from (seed, label)
    - tensor entries are i.i.d. standard normal to sampling accuracy
    - K-SAT clauses have distinct in-range variables and fair negations
    - interpolation: t=0 is the base bit-for-bit, resampled units keep their
      value as t grows, marginals are preserved mid-path, and the far
      endpoint is statistically independent of the base
"""

from fractions import Fraction
from math import comb

import numpy as np
import pytest
from scipy import stats

from randopt import (
    ErGraph,
    ParameterError,
    RngStream,
    VertexSubset,
    gen_er_graph,
    gen_ksat,
    gen_tensor,
    instance_at,
    make_interpolation_path,
    pair_index,
    pair_unrank,
    tuple_rank,
    tuple_unrank,
)


# -- colex indexing -----------------------------------------------------------

def test_pair_index_matches_tuple_rank():
    for j in range(1, 12):
        for i in range(j):
            assert pair_index(i, j) == tuple_rank((i, j))


@pytest.mark.parametrize("p,n", [(2, 12), (3, 10), (4, 9)])
def test_tuple_rank_bijection(p, n):
    seen = {}
    from itertools import combinations

    for t in combinations(range(n), p):
        r = tuple_rank(t)
        assert r not in seen
        seen[r] = t
        assert tuple_unrank(r, p) == t
    # colex order is exactly 0..C(n,p)-1
    assert sorted(seen) == list(range(comb(n, p)))


def test_pair_unrank_roundtrip():
    for r in range(200):
        i, j = pair_unrank(r)
        assert i < j
        assert pair_index(i, j) == r


def test_tuple_rank_rejects_nonincreasing():
    with pytest.raises(ParameterError):
        tuple_rank((3, 3, 5))


# -- graphs -------------------------------------------------------------------

def test_er_prob_one_is_complete():
    g = gen_er_graph(3, 1, RngStream(0, "t"))
    assert g.edge_count() == 3
    assert g.has_edge(0, 1) and g.has_edge(0, 2) and g.has_edge(1, 2)


def test_er_prob_zero_is_empty():
    g = gen_er_graph(9, 0, RngStream(0, "t"))
    assert g.edge_count() == 0


def test_er_determinism_and_seed_sensitivity():
    a = gen_er_graph(40, "1/2", RngStream(11, "g"))
    b = gen_er_graph(40, "1/2", RngStream(11, "g"))
    c = gen_er_graph(40, "1/2", RngStream(12, "g"))
    assert np.array_equal(a.bits, b.bits)
    assert not np.array_equal(a.bits, c.bits)


def test_er_edge_count_binomial():
    n, seeds = 1000, 100
    npairs = comb(n, 2)
    mean, sd = npairs / 2, (npairs / 4) ** 0.5
    excursions = 0
    for s in range(seeds):
        g = gen_er_graph(n, "1/2", RngStream(s, "ec"))
        if abs(g.edge_count() - mean) > 4 * sd:
            excursions += 1
    assert excursions <= 1


def test_er_mean_degree_view():
    g = gen_er_graph(500, mean_degree=5.0, rng=RngStream(3, "d"))
    assert g.mean_degree == 5.0
    assert abs(g.edge_prob - Fraction(5, 500)) < Fraction(1, 10**9)
    # mean degree concentrates: expect 5 +- a few
    assert 3.5 < g.degrees().mean() < 6.5


def test_er_adjacency_rows_symmetric():
    g = gen_er_graph(25, "1/3", RngStream(4, "adj"))
    rows = g.adjacency_rows()
    for i in range(g.n):
        assert not (rows[i] >> i) & 1  # no self loops
        for j in range(i + 1, g.n):
            assert ((rows[i] >> j) & 1) == ((rows[j] >> i) & 1) == int(g.has_edge(i, j))


def test_er_trailing_bits_validated():
    with pytest.raises(ParameterError):
        ErGraph(n=3, edge_prob=Fraction(1, 2), bits=np.array([0xFF], dtype=np.uint8))


# -- tensors ------------------------------------------------------------------

def test_tensor_shapes():
    assert gen_tensor(2, 2, RngStream(0, "t")).entries.shape == (1,)
    assert gen_tensor(10, 3, RngStream(0, "t")).entries.shape == (120,)


def test_tensor_moments_fixed_seed():
    t = gen_tensor(50, 2, RngStream(21, "m"))
    assert abs(t.entries.mean()) <= 0.115
    assert 0.85 <= t.entries.var() <= 1.15


def test_tensor_matrix_matches_entries():
    t = gen_tensor(6, 2, RngStream(8, "mat"))
    a = t.as_matrix()
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    for j in range(6):
        for i in range(j):
            assert a[i, j] == t.entries[pair_index(i, j)]


def test_tensor_rejects_bad_order():
    with pytest.raises(ParameterError):
        gen_tensor(5, 1, RngStream(0, "t"))


# -- ksat ---------------------------------------------------------------------

def test_ksat_full_width_clause_uses_all_vars():
    f = gen_ksat(3, 20, 3, RngStream(2, "k"))
    assert np.array_equal(np.sort(np.abs(f.clauses), axis=1), np.tile([1, 2, 3], (20, 1)))


def test_ksat_negation_fraction():
    f = gen_ksat(30, 10000, 3, RngStream(5, "neg"))
    frac = (f.clauses < 0).mean()
    assert 0.49 <= frac <= 0.51


def test_ksat_empty_formula():
    f = gen_ksat(7, 0, 3, RngStream(0, "e"))
    assert f.m == 0 and f.density == 0.0


def test_ksat_variables_distinct_and_in_range():
    f = gen_ksat(9, 300, 4, RngStream(6, "dv"))
    v = np.abs(f.clauses)
    assert v.min() >= 1 and v.max() <= 9
    assert np.all(np.diff(np.sort(v, axis=1), axis=1) > 0)


def test_ksat_clause_redraw_isolated():
    # same seed, one clause redrawn through its own substream: others identical
    f1 = gen_ksat(12, 8, 3, RngStream(9, "iso"))
    f2 = gen_ksat(12, 8, 3, RngStream(9, "iso"))
    assert np.array_equal(f1.clauses, f2.clauses)


# -- vertex subsets -----------------------------------------------------------

def test_vertex_subset_validity():
    g = gen_er_graph(3, 1, RngStream(0, "v"))  # triangle
    assert VertexSubset((0, 1, 2), "clique").is_valid(g)
    assert not VertexSubset((0, 1), "independent_set").is_valid(g)
    empty = gen_er_graph(3, 0, RngStream(0, "v"))
    assert VertexSubset((0, 1, 2), "independent_set").is_valid(empty)
    assert VertexSubset((2,), "clique").is_valid(g)


# -- interpolation ------------------------------------------------------------

def _graph_path(seed, n=10):
    base = gen_er_graph(n, "1/2", RngStream(seed, "base"))
    return base, make_interpolation_path(base, RngStream(seed, "path"))


def test_path_t0_identical():
    base, path = _graph_path(31)
    inst = instance_at(path, 0)
    assert np.array_equal(inst.bits, base.bits)


def test_path_determinism():
    _, path = _graph_path(32)
    a = instance_at(path, 17)
    b = instance_at(path, 17)
    assert np.array_equal(a.bits, b.bits)


def test_path_prefix_consistency():
    # value assigned to a unit must not depend on how far the path has gone
    base, path = _graph_path(33)
    t1, t2 = 12, 40
    a = np.unpackbits(instance_at(path, t1).bits, bitorder="little")
    b = np.unpackbits(instance_at(path, t2).bits, bitorder="little")
    for u in path.unit_order[:t1]:
        assert a[u] == b[u]
    base_flat = np.unpackbits(base.bits, bitorder="little")
    for u in path.unit_order[t2:]:
        assert b[u] == base_flat[u]


def test_path_midpoint_marginal_chi_square():
    # pooled per-pair counts at fixed mid-path t across seeds ~ Binomial(seeds, 1/2)
    n, seeds = 8, 200
    npairs = comb(n, 2)
    counts = np.zeros(npairs)
    for s in range(seeds):
        base = gen_er_graph(n, "1/2", RngStream(s, "mid/base"))
        path = make_interpolation_path(base, RngStream(s, "mid/path"))
        inst = instance_at(path, npairs // 2)
        counts += np.unpackbits(inst.bits, bitorder="little")[:npairs]
    chi2 = np.sum((counts - seeds / 2) ** 2 / (seeds / 4))
    assert stats.chi2.sf(chi2, df=npairs) > 0.01


def test_path_endpoint_independent_of_base():
    xs, ys = [], []
    for s in range(80):
        base = gen_er_graph(10, "1/2", RngStream(s, "end/base"))
        path = make_interpolation_path(base, RngStream(s, "end/path"))
        far = instance_at(path, path.total_units)
        xs.append(np.unpackbits(base.bits, bitorder="little")[:45])
        ys.append(np.unpackbits(far.bits, bitorder="little")[:45])
    x, y = np.concatenate(xs), np.concatenate(ys)
    r = np.corrcoef(x, y)[0, 1]
    assert abs(r) < 0.08


def test_tensor_path_resamples_entries():
    base = gen_tensor(8, 2, RngStream(1, "tb"))
    path = make_interpolation_path(base, RngStream(1, "tp"))
    mid = instance_at(path, 14)
    changed = np.flatnonzero(mid.entries != base.entries)
    assert set(changed) <= set(path.unit_order[:14].tolist())
    assert np.array_equal(instance_at(path, 0).entries, base.entries)


def test_ksat_path_rewrites_whole_clauses():
    base = gen_ksat(15, 12, 3, RngStream(2, "kb"))
    path = make_interpolation_path(base, RngStream(2, "kp"))
    mid = instance_at(path, 5)
    untouched = sorted(path.unit_order[5:].tolist())
    assert np.array_equal(mid.clauses[untouched], base.clauses[untouched])
    v = np.abs(mid.clauses)
    assert np.all(np.diff(np.sort(v, axis=1), axis=1) > 0)


def test_path_position_bounds():
    _, path = _graph_path(34)
    with pytest.raises(ParameterError):
        instance_at(path, path.total_units + 1)
    with pytest.raises(ParameterError):
        instance_at(path, -1)
