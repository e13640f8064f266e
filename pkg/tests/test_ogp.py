"""Geometry probes: near-optimum sampling, histograms, gaps, clusters, paths.

Oracles: exhaustive truth-table / brute-force enumeration for level sets,
an independent BFS for cluster decomposition, and hand-checkable synthetic
histograms for the gap detector.
"""

from fractions import Fraction

import numpy as np
import pytest

from randopt import RngStream
from randopt.errors import (
    CapacityError,
    InsufficientDataError,
    IntegrityError,
    ParameterError,
)
from randopt.instances import (
    ErGraph,
    gen_er_graph,
    gen_ksat,
    gen_tensor,
    make_interpolation_path,
    pair_index,
)
from randopt.ksat import enumerate_solutions, eval_clauses
from randopt.ogp import (
    ClusterReport,
    EndpointSummary,
    GapReport,
    MultiOverlapSample,
    NearOptimumSet,
    OverlapHistogram,
    SamplerConfig,
    admission_violations,
    algorithm_stability_profile,
    cluster_solutions,
    detect_gap,
    eval_config,
    hamming_matrix,
    interpolation_overlap_experiment,
    model_kind,
    overlap_histogram,
    overlap_matrix,
    planted_gap_histogram,
    sample_near_optima,
)
from randopt.spin import brute_force_ground_state, energy

STREAM = RngStream(636363, "test/ogp")


def cycle_graph(n: int) -> ErGraph:
    flat = np.zeros(n * (n - 1) // 2, dtype=np.uint8)
    for i in range(n):
        flat[pair_index(i, (i + 1) % n)] = 1
    return ErGraph(n=n, edge_prob=Fraction(1, 2), bits=np.packbits(flat, bitorder="little"))


# -- sampling ---------------------------------------------------------------------


def test_exhaustive_spin_at_maximum_is_ground_state_pair():
    t = gen_tensor(14, 2, STREAM.child("gs"))
    gs, val = brute_force_ground_state(t)
    ns = sample_near_optima(t, val - 1e-12, 0, SamplerConfig())
    assert ns.count == 2 and ns.sampler == "exhaustive"
    rows = {tuple(int(v) for v in r) for r in ns.solutions}
    assert tuple(int(v) for v in gs) in rows
    assert tuple(int(-v) for v in gs) in rows


def test_minus_infinity_level_admits_anything():
    t = gen_tensor(16, 2, STREAM.child("vac"))
    cfg = SamplerConfig(mode="annealed", restarts=6, sweeps=10)
    ns = sample_near_optima(t, float("-inf"), 4, cfg, STREAM.child("vac/rng"))
    assert ns.count == 4 and not ns.budget_exhausted


def test_admission_reverified_and_violations_counted():
    t = gen_tensor(10, 2, STREAM.child("adm"))
    gs, val = brute_force_ground_state(t)
    ns = sample_near_optima(t, val - 1e-12, 0, SamplerConfig())
    assert admission_violations(t, ns.eta, ns.solutions) == 0
    bad = np.stack([gs.astype(np.int8), -gs.astype(np.int8)])
    with pytest.raises(IntegrityError):
        NearOptimumSet(model=t, eta=val + 1.0, solutions=bad, sampler="exhaustive")


def test_unreachable_level_sets_budget_flag():
    t = gen_tensor(12, 2, STREAM.child("budget"))
    _, val = brute_force_ground_state(t)
    cfg = SamplerConfig(mode="annealed", restarts=4, sweeps=5)
    ns = sample_near_optima(t, val + 10.0, 1, cfg, STREAM.child("budget/rng"))
    assert ns.count == 0 and ns.budget_exhausted


def test_exhaustive_ksat_levels_match_truth_table():
    f = gen_ksat(11, 30, 3, STREAM.child("klev"))
    full = sample_near_optima(f, f.m, 0, SamplerConfig())
    assert full.count == enumerate_solutions(f).size
    # level m-1 against a direct scan
    part = sample_near_optima(f, f.m - 1, 0, SamplerConfig())
    masks = np.arange(1 << f.n, dtype=np.int64)
    a = ((masks[:, None] >> np.arange(f.n)) & 1).astype(bool)
    av = a[:, np.abs(f.clauses) - 1]
    counts = np.where(f.clauses > 0, av, ~av).any(axis=2).sum(axis=1)
    assert part.count == int((counts >= f.m - 1).sum())
    assert all(eval_clauses(f, row > 0) >= f.m - 1 for row in part.solutions)


def test_five_cycle_independent_pairs():
    c5 = cycle_graph(5)
    cfg = SamplerConfig(subset_kind="independent_set")
    ns = sample_near_optima(c5, 2, 0, cfg)
    got = {frozenset(np.nonzero(r)[0].tolist()) for r in ns.solutions}
    want = {frozenset(((i, (i + 2) % 5))) for i in range(5)}
    assert got == want
    # pairwise Hamming distances: 2 when the pairs share a vertex, else 4
    d = hamming_matrix(ns.solutions)
    iu = np.triu_indices(5, 1)
    assert sorted(d[iu].tolist()) == [2, 2, 2, 2, 2, 4, 4, 4, 4, 4]


def test_annealed_graph_sampling_admits_only_large_subsets():
    g = gen_er_graph(64, "1/2", STREAM.child("gg"))
    cfg = SamplerConfig(mode="annealed", restarts=40, subset_kind="clique")
    ns = sample_near_optima(g, 5, 8, cfg, STREAM.child("gg/rng"))
    assert ns.count >= 1
    for row in ns.solutions:
        assert eval_config(g, row, "clique") >= 5


def test_sampler_validation():
    with pytest.raises(ParameterError):
        SamplerConfig(mode="quantum")
    with pytest.raises(ParameterError):
        SamplerConfig(restarts=0)
    t = gen_tensor(8, 2, STREAM.child("val"))
    with pytest.raises(ParameterError):
        sample_near_optima(t, 0.0, 1, SamplerConfig(mode="annealed"))  # no rng


# -- histograms -------------------------------------------------------------------


def test_duplicate_pair_all_mass_at_plus_one():
    t = gen_tensor(8, 2, STREAM.child("dup"))
    s = np.ones(8, dtype=np.int8)
    ns = NearOptimumSet(model=t, eta=float("-inf"),
                        solutions=np.stack([s, s]), sampler="annealed")
    h = overlap_histogram(ns, "overlap", 41)
    assert h.masses[-1] == 1.0 and h.sample_count == 1
    assert abs(h.masses.sum() - 1.0) <= 1e-12


def test_antipodal_pair_all_mass_at_minus_one():
    t = gen_tensor(8, 2, STREAM.child("anti"))
    s = np.ones(8, dtype=np.int8)
    ns = NearOptimumSet(model=t, eta=float("-inf"),
                        solutions=np.stack([s, -s]), sampler="annealed")
    h = overlap_histogram(ns, "overlap", 41)
    assert h.masses[0] == 1.0
    hh = overlap_histogram(ns, "hamming", 40)
    assert hh.masses[-1] == 1.0  # normalized distance 1


def test_singleton_set_is_insufficient():
    t = gen_tensor(8, 2, STREAM.child("single"))
    ns = NearOptimumSet(model=t, eta=float("-inf"),
                        solutions=np.ones((1, 8), dtype=np.int8), sampler="annealed")
    with pytest.raises(InsufficientDataError):
        overlap_histogram(ns)


def test_pair_subsample_reproducible():
    t = gen_tensor(10, 2, STREAM.child("sub"))
    gen = STREAM.child("sub/rows").generator()
    rows = (1 - 2 * gen.integers(0, 2, size=(80, 10))).astype(np.int8)
    ns = NearOptimumSet(model=t, eta=float("-inf"), solutions=rows, sampler="annealed")
    h1 = overlap_histogram(ns, "overlap", 21, pair_cap=100)
    h2 = overlap_histogram(ns, "overlap", 21, pair_cap=100)
    assert h1.sample_count <= 100
    assert np.array_equal(h1.masses, h2.masses)
    assert abs(h1.masses.sum() - 1.0) <= 1e-12


def test_histogram_validation():
    edges = np.linspace(0, 1, 11)
    good = np.full(10, 0.1)
    OverlapHistogram(metric="hamming", edges=edges, masses=good, sample_count=5)
    with pytest.raises(ParameterError):
        OverlapHistogram(metric="hamming", edges=edges, masses=good * 0.5, sample_count=5)
    with pytest.raises(ParameterError):
        OverlapHistogram(metric="overlap", edges=edges, masses=good, sample_count=5)
    with pytest.raises(ParameterError):
        OverlapHistogram(metric="hamming", edges=edges[::-1], masses=good, sample_count=5)


def test_histogram_provenance_and_serialization():
    f = gen_ksat(8, 12, 3, STREAM.child("prov"))
    ns = sample_near_optima(f, f.m, 0, SamplerConfig())
    assert ns.count >= 2
    h = overlap_histogram(ns, "hamming", 16)
    assert h.provenance["instance_hash"] == __import__("randopt.serialize", fromlist=["content_hash"]).content_hash(f)
    assert h.provenance["seed"] == STREAM.seed
    csv = h.to_csv()
    lines = csv.splitlines()
    assert lines[0] == "bin_lo,bin_hi,mass" and len(lines) == 17
    j = h.to_json()
    assert j["sample_count"] == h.sample_count and len(j["masses"]) == 16
    sj = ns.to_json()
    assert sj["count"] == ns.count and len(sj["solutions"]) == ns.count


# -- gap detection ------------------------------------------------------------------


def bimodal_hist() -> OverlapHistogram:
    edges = np.linspace(0, 1, 42)
    masses = np.zeros(41)
    masses[4] = 0.5   # bin containing 0.1
    masses[36] = 0.5  # bin containing 0.9
    return OverlapHistogram(metric="hamming", edges=edges, masses=masses, sample_count=10)


def test_bimodal_gap_detected():
    rep = detect_gap(bimodal_hist())
    assert rep.present and rep.nu1 <= 0.2 and rep.nu2 >= 0.8
    assert rep.mass_in_gap == 0.0
    assert rep.nu1 < rep.nu2


def test_uniform_histogram_has_no_gap():
    edges = np.linspace(-1, 1, 41)
    h = OverlapHistogram(metric="overlap", edges=edges,
                         masses=np.full(40, 1 / 40), sample_count=10)
    assert not detect_gap(h).present


def test_gap_monotone_in_ceiling_below_cluster_mass():
    h = bimodal_hist()
    was_present = False
    for ceiling in (1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.2):
        rep = detect_gap(h, mass_ceiling=ceiling)
        assert not (was_present and not rep.present)
        was_present = was_present or rep.present


def test_gap_validation_and_absent_fields():
    h = bimodal_hist()
    with pytest.raises(ParameterError):
        detect_gap(h, min_width=0.0)
    with pytest.raises(ParameterError):
        detect_gap(h, mass_ceiling=-0.1)
    rep = detect_gap(h, min_width=0.9)  # nothing that wide
    assert not rep.present and np.isnan(rep.nu1)
    with pytest.raises(ParameterError):
        GapReport(present=True, nu1=0.5, nu2=0.4, mass_in_gap=0.0,
                  min_width=0.05, mass_ceiling=1e-3)


def test_planted_suite_detection():
    hits = 0
    cases = 0
    for i in range(40):
        gap = i % 2 == 0
        noise = (i % 4) * 3e-4  # 0 .. 9e-4, at or below the 1e-3 ceiling
        hist, truth = planted_gap_histogram(
            STREAM.child(f"plant/{i}"), gap=gap, noise_mass=noise if gap else 0.0
        )
        rep = detect_gap(hist)
        bw = hist.edges[1] - hist.edges[0]
        if gap:
            ok = rep.present and abs(rep.nu1 - truth[0]) <= 2 * bw and abs(rep.nu2 - truth[1]) <= 2 * bw
        else:
            ok = not rep.present
        hits += ok
        cases += 1
    assert hits / cases >= 0.95


# -- clustering -----------------------------------------------------------------------


def bfs_partition(sols: np.ndarray, radius: int) -> list[frozenset]:
    """Independent oracle: BFS over explicitly built adjacency."""
    k = sols.shape[0]
    adj = [[] for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if int(((sols[i] > 0) != (sols[j] > 0)).sum()) <= radius:
                adj[i].append(j)
                adj[j].append(i)
    seen = [False] * k
    comps = []
    for s in range(k):
        if seen[s]:
            continue
        queue, members = [s], []
        seen[s] = True
        while queue:
            v = queue.pop()
            members.append(v)
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        comps.append(frozenset(members))
    return comps


def test_cluster_two_variable_clause():
    sols = np.array([[0, 1], [1, 0], [1, 1]], dtype=np.int8)
    rep = cluster_solutions(sols, 1)
    assert rep.components == (3,) and rep.separation is None
    assert rep.outlier_mass == 0.0


def test_cluster_antipodal_singletons():
    n = 30
    sols = np.stack([np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)])
    rep = cluster_solutions(sols, 1)
    assert rep.components == (1, 1)
    assert rep.separation == n
    assert rep.outlier_mass == 1.0  # both below the default size floor


def test_cluster_outlier_mass_and_empty():
    base = np.zeros((5, 12), dtype=np.int8)
    for i in range(5):
        base[i, : i % 2] = 1  # sizes cluster around all-zeros
    lone = np.ones((1, 12), dtype=np.int8)
    rep = cluster_solutions(np.concatenate([base, lone]), 1, size_floor=2)
    assert sum(rep.components) == 6
    assert rep.outlier_mass == pytest.approx(1 / 6)
    empty = cluster_solutions(np.empty((0, 12), dtype=np.int8), 1)
    assert empty.components == () and empty.separation is None


def test_cluster_matches_bfs_oracle():
    for i in range(30):
        n = 6 + i % 7
        f = gen_ksat(n, int(2.5 * n), 3, STREAM.child(f"clus/{i}"))
        masks = enumerate_solutions(f)
        if masks.size < 2:
            continue
        sols = ((masks[:, None] >> np.arange(n)) & 1).astype(np.int8)
        radius = 1 + i % 3
        rep = cluster_solutions(sols, radius)
        want = bfs_partition(sols, radius)
        got = {}
        for idx, lab in enumerate(rep.labels):
            got.setdefault(int(lab), set()).add(idx)
        assert {frozenset(v) for v in got.values()} == set(want)
        assert sum(rep.components) == sols.shape[0]
        if rep.separation is not None:
            assert rep.separation > radius
            d = hamming_matrix(sols)
            cross = rep.labels[:, None] != rep.labels[None, :]
            assert rep.separation == int(d[cross].min())


def test_cluster_validation():
    with pytest.raises(ParameterError):
        cluster_solutions(np.zeros(5, dtype=np.int8), 1)
    with pytest.raises(ParameterError):
        cluster_solutions(np.zeros((2, 5), dtype=np.int8), -1)


# -- interpolation experiments ---------------------------------------------------------


def test_same_position_tuple_has_unit_overlap():
    g = gen_er_graph(32, "1/2", STREAM.child("same"))
    path = make_interpolation_path(g, STREAM.child("same/path"))
    cfg = SamplerConfig(mode="annealed", restarts=10, subset_kind="clique")
    exp = interpolation_overlap_experiment(
        path, 2, 2, cfg, STREAM.child("same/rng"), positions=(0, 0), rounds=2
    )
    for s in exp.samples:
        assert s.overlaps[0, 1] == pytest.approx(1.0)


def test_endpoint_summary_near_zero_overlap():
    overlaps = []
    for i in range(25):
        g = gen_er_graph(128, "1/2", STREAM.child(f"ep/{i}"))
        path = make_interpolation_path(g, STREAM.child(f"ep/{i}/path"))
        cfg = SamplerConfig(mode="annealed", restarts=25, subset_kind="clique")
        exp = interpolation_overlap_experiment(
            path, 7, 2, cfg, STREAM.child(f"ep/{i}/rng"),
            positions=(0, path.total_units), rounds=1,
        )
        assert exp.endpoint is not None and exp.endpoint.rounds == 1
        overlaps.append(exp.endpoint.mean_overlap)
    assert abs(float(np.mean(overlaps))) <= 0.15


def test_failure_annotation_partial_result():
    t = gen_tensor(16, 2, STREAM.child("fail"))
    _, val = brute_force_ground_state(t)
    path = make_interpolation_path(t, STREAM.child("fail/path"))
    cfg = SamplerConfig(mode="annealed", restarts=3, sweeps=5)
    exp = interpolation_overlap_experiment(
        path, val + 5.0, 3, cfg, STREAM.child("fail/rng"), rounds=1
    )
    s = exp.samples[0]
    assert len(s.failed_positions) == 3 and s.sampled_positions == ()
    assert s.overlaps.shape == (0, 0)


def test_multioverlap_validation():
    with pytest.raises(ParameterError):
        MultiOverlapSample(positions=(0, 1), sampled_positions=(0, 1),
                           overlaps=np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ParameterError):
        MultiOverlapSample(positions=(1, 0), sampled_positions=(0, 1),
                           overlaps=np.eye(2))
    with pytest.raises(ParameterError):
        interpolation_overlap_experiment(
            make_interpolation_path(gen_er_graph(8, "1/2", STREAM.child("mv")),
                                    STREAM.child("mv/p")),
            1, 1, SamplerConfig(), STREAM.child("mv/rng"))


def test_stability_profile_shape_and_determinism():
    g = gen_er_graph(32, "1/2", STREAM.child("stab"))
    path = make_interpolation_path(g, STREAM.child("stab/path"))
    p1 = algorithm_stability_profile(path, STREAM.child("stab/rng"), max_positions=17)
    p2 = algorithm_stability_profile(path, STREAM.child("stab/rng"), max_positions=17)
    assert p1.positions == p2.positions
    assert np.array_equal(p1.distances, p2.distances)
    assert len(p1.distances) == len(p1.positions) - 1
    assert p1.max_distance == int(p1.distances.max())
    assert p1.positions[0] == 0 and p1.positions[-1] == path.total_units
    csv = p1.to_csv()
    assert csv.splitlines()[0] == "position,next_position,distance"
    t = gen_tensor(6, 2, STREAM.child("stab/t"))
    with pytest.raises(ParameterError):
        algorithm_stability_profile(
            make_interpolation_path(t, STREAM.child("stab/tp")), STREAM.child("stab/trng")
        )


# -- misc ------------------------------------------------------------------------------


def test_model_kind_and_eval():
    t = gen_tensor(6, 2, STREAM.child("mk"))
    f = gen_ksat(6, 10, 3, STREAM.child("mk2"))
    g = gen_er_graph(6, "1/2", STREAM.child("mk3"))
    assert model_kind(t) == "spin" and model_kind(f) == "ksat" and model_kind(g) == "graph"
    s = np.ones(6, dtype=np.int8)
    assert eval_config(t, s) == pytest.approx(energy(t, s.astype(float)))
    assert eval_config(f, s) == eval_clauses(f, s > 0)
    # invalid subset scores -inf
    full = np.ones(6, dtype=np.int8)
    if eval_config(g, full, "clique") != float("-inf"):
        assert g.complement().num_edges == 0
    with pytest.raises(ParameterError):
        model_kind(42)
    with pytest.raises(ParameterError):
        eval_config(t, np.ones(5, dtype=np.int8))


def test_overlap_matrix_properties():
    gen = STREAM.child("om").generator()
    rows = (1 - 2 * gen.integers(0, 2, size=(12, 20))).astype(np.int8)
    g = overlap_matrix(rows, "spin")
    assert np.allclose(g, g.T) and np.allclose(np.diag(g), 1.0)
    assert g.min() >= -1.0 and g.max() <= 1.0
    inds = (gen.integers(0, 2, size=(6, 20))).astype(np.int8)
    inds[0] = 0  # degenerate all-zero indicator
    inds[1] = inds[0]
    gp = overlap_matrix(inds, "graph")
    assert gp[0, 1] == 1.0  # identical degenerate rows still match
    assert np.allclose(np.diag(gp), 1.0)
    with pytest.raises(ParameterError):
        overlap_matrix(rows, "mystery")


def test_capacity_guards():
    with pytest.raises(CapacityError):
        hamming_matrix(np.zeros((40_001, 4), dtype=np.int8))
    f = gen_ksat(23, 30, 3, STREAM.child("cap"))
    with pytest.raises(CapacityError):
        sample_near_optima(f, 1, 0, SamplerConfig())
