"""K-SAT evaluation, DPLL, WalkSAT, enumeration, moments, DIMACS.

The exact-solver oracle is full 2^n truth-table evaluation; the fixture
formula has a hand-checkable satisfying family (x2 false, x3 true, x9 false,
the other seven variables free).
"""

from math import log

import numpy as np
import pytest

from randopt import RngStream
from randopt.errors import (
    BudgetExceededError,
    CapacityError,
    FormatError,
    InsufficientDataError,
    ParameterError,
)
from randopt.instances import KSatFormula, gen_ksat
from randopt.ksat import (
    dpll_sat_sweep,
    dpll_solve,
    empirical_crossing,
    enumerate_solutions,
    eval_clauses,
    first_moment_crossing,
    from_dimacs,
    is_satisfying,
    sat_moment_curve,
    sweep_to_csv,
    to_dimacs,
    walksat,
)

STREAM = RngStream(515151, "test/ksat")

FIXTURE = KSatFormula(
    n=10, k=3, clauses=np.array([[3, -7, -8], [-1, -2, 7], [-3, -7, -9]], dtype=np.int32)
)


def brute_solutions(f: KSatFormula) -> np.ndarray:
    """All satisfying bitmasks by full truth-table scan (bit v-1 = var v)."""
    n = f.n
    masks = np.arange(1 << n, dtype=np.int64)
    a = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    if f.m == 0:
        return masks
    av = a[:, np.abs(f.clauses) - 1]
    lit_true = np.where(f.clauses > 0, av, ~av)
    return masks[lit_true.any(axis=2).all(axis=1)]


# -- eval ---------------------------------------------------------------------------


def test_eval_fixture_satisfying_family():
    # x2 false, x3 true, x9 false satisfies all 3 clauses for every
    # completion of the remaining seven variables
    free = [0, 3, 4, 5, 6, 7, 9]  # 0-based indices of the free variables
    for sub in range(128):
        a = np.zeros(10, dtype=bool)
        a[2] = True
        for i, v in enumerate(free):
            a[v] = bool((sub >> i) & 1)
        assert eval_clauses(FIXTURE, a) == 3
        assert is_satisfying(FIXTURE, a)


def test_eval_empty_formula_vacuously_satisfied():
    empty = KSatFormula(n=4, k=2, clauses=np.empty((0, 2), dtype=np.int32))
    a = np.zeros(4, dtype=bool)
    assert eval_clauses(empty, a) == 0
    assert is_satisfying(empty, a)


def test_eval_validation():
    with pytest.raises(ParameterError):
        eval_clauses(FIXTURE, np.zeros(9, dtype=bool))


def test_eval_mean_fraction_matches_per_clause_probability():
    # each clause is falsified with probability 2^-3 under a uniform assignment
    gen = STREAM.child("meanfrac").generator()
    total = 0.0
    trials = 0
    for i in range(100):
        f = gen_ksat(30, 60, 3, STREAM.child(f"meanfrac/{i}"))
        for _ in range(100):
            a = gen.integers(0, 2, size=30).astype(bool)
            total += eval_clauses(f, a) / f.m
            trials += 1
    assert trials == 10_000
    assert abs(total / trials - 0.875) <= 0.01


# -- DPLL ---------------------------------------------------------------------------


def test_dpll_contradiction_is_unsat():
    f = KSatFormula(n=1, k=1, clauses=np.array([[1], [-1]], dtype=np.int32))
    res = dpll_solve(f)
    assert res.status == "UNSAT" and not res.satisfiable
    assert res.assignment is None


def test_dpll_fixture_is_sat_with_verified_witness():
    res = dpll_solve(FIXTURE)
    assert res.status == "SAT"
    assert eval_clauses(FIXTURE, res.assignment) == 3


def test_dpll_empty_formula():
    empty = KSatFormula(n=3, k=2, clauses=np.empty((0, 2), dtype=np.int32))
    res = dpll_solve(empty)
    assert res.status == "SAT" and res.decisions == 0


def test_dpll_matches_truth_table():
    for i in range(80):
        n = 5 + i % 10
        c = (2.0, 4.0, 6.0, 8.0)[i % 4]
        f = gen_ksat(n, int(c * n), 3, STREAM.child(f"oracle/{i}"))
        want_sat = brute_solutions(f).size > 0
        res = dpll_solve(f)
        assert res.satisfiable == want_sat
        if res.satisfiable:
            assert is_satisfying(f, res.assignment)


def test_dpll_pure_literal_flag_agrees():
    for i in range(20):
        f = gen_ksat(12, 55, 3, STREAM.child(f"pure/{i}"))
        assert dpll_solve(f).status == dpll_solve(f, use_pure=False).status


def test_dpll_budget_is_distinct_from_unsat():
    f = gen_ksat(30, 240, 3, STREAM.child("budget"))  # dense, deep refutation
    assert dpll_solve(f).status == "UNSAT"
    with pytest.raises(BudgetExceededError) as exc:
        dpll_solve(f, node_budget=2)
    assert exc.value.spent > 2
    with pytest.raises(ParameterError):
        dpll_solve(f, node_budget=-1)


# -- WalkSAT ------------------------------------------------------------------------


def test_walksat_unit_formula_immediate():
    f = KSatFormula(n=1, k=1, clauses=np.array([[1]], dtype=np.int32))
    res = walksat(f, 10, 0.5, STREAM.child("wunit"))
    assert res.found and res.flips <= 1
    assert is_satisfying(f, res.assignment)


def test_walksat_gives_up_on_unsat():
    f = KSatFormula(n=1, k=1, clauses=np.array([[1], [-1]], dtype=np.int32))
    res = walksat(f, 200, 0.5, STREAM.child("wunsat"))
    assert not res.found
    assert res.assignment is None
    assert res.flips == 200


def test_walksat_low_density_success_rate():
    found = 0
    for i in range(100):
        f = gen_ksat(150, 450, 3, STREAM.child(f"wlow/{i}"))
        res = walksat(f, 100_000, 0.5, STREAM.child(f"wlow/{i}/run"))
        if res.found:
            assert is_satisfying(f, res.assignment)
            found += 1
    assert found >= 95


def test_walksat_deterministic_and_validated():
    f = gen_ksat(40, 120, 3, STREAM.child("wdet"))
    a = walksat(f, 5000, 0.5, STREAM.child("wdet/run"))
    b = walksat(f, 5000, 0.5, STREAM.child("wdet/run"))
    assert a.found == b.found and a.flips == b.flips
    if a.found:
        assert np.array_equal(a.assignment, b.assignment)
    with pytest.raises(ParameterError):
        walksat(f, 100, 1.5, STREAM.child("wbad"))
    with pytest.raises(ParameterError):
        walksat(f, -1, 0.5, STREAM.child("wbad2"))


# -- enumeration --------------------------------------------------------------------


def test_enumerate_two_variable_clause():
    f = KSatFormula(n=2, k=2, clauses=np.array([[1, 2]], dtype=np.int32))
    assert enumerate_solutions(f).tolist() == [1, 2, 3]


def test_enumerate_unsat_is_empty():
    f = KSatFormula(n=1, k=1, clauses=np.array([[1], [-1]], dtype=np.int32))
    assert enumerate_solutions(f).size == 0


def test_enumerate_empty_formula_is_everything():
    f = KSatFormula(n=3, k=2, clauses=np.empty((0, 2), dtype=np.int32))
    assert enumerate_solutions(f).tolist() == list(range(8))


def test_enumerate_matches_truth_table():
    for i in range(100):
        n = 5 + i % 12
        c = (1.5, 3.5, 5.0, 7.0)[i % 4]
        f = gen_ksat(n, int(c * n), 3, STREAM.child(f"enum/{i}"))
        got = enumerate_solutions(f)
        want = brute_solutions(f)
        assert np.array_equal(got, want)


def test_enumerate_caps():
    with pytest.raises(CapacityError):
        enumerate_solutions(
            KSatFormula(n=31, k=2, clauses=np.array([[1, 2]], dtype=np.int32))
        )
    wide = KSatFormula(n=10, k=2, clauses=np.array([[1, 2]], dtype=np.int32))
    with pytest.raises(CapacityError):
        enumerate_solutions(wide, cap=100)


# -- moments ------------------------------------------------------------------------


def test_moment_curve_zero_density_counts_everything():
    crv = sat_moment_curve(20, 3, [0.0])
    assert crv.points[0, 1] == pytest.approx(20.0)  # E = 2^n


def test_first_moment_crossing_k3():
    want = log(2) / -log(1 - 0.125)  # root of n + c n log(1 - 2^-K) = 0
    got = first_moment_crossing(3)
    assert abs(got - want) < 1e-3
    crv = sat_moment_curve(50, 3, [got])
    assert abs(crv.points[0, 1]) < 1e-9  # log-count vanishes at the crossing
    with pytest.raises(ParameterError):
        first_moment_crossing(0)


def test_crossing_ratio_monotone_to_one():
    ratios = [first_moment_crossing(k) / (2**k * log(2)) for k in range(3, 13)]
    assert all(r < 1 for r in ratios)
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] > 0.999


# -- DIMACS -------------------------------------------------------------------------


def test_dimacs_roundtrip():
    text = to_dimacs(FIXTURE)
    assert text.startswith("p cnf 10 3\n")
    back = from_dimacs("c a comment\n" + text)
    assert back.n == 10 and back.k == 3
    assert np.array_equal(back.clauses, FIXTURE.clauses)


def test_dimacs_errors():
    with pytest.raises(FormatError):
        from_dimacs("1 2 0\n")  # clause before header
    with pytest.raises(FormatError):
        from_dimacs("p cnf 3 1\n1 2\n")  # missing terminator
    with pytest.raises(FormatError):
        from_dimacs("p cnf 3 2\n1 2 0\n")  # clause count mismatch
    with pytest.raises(FormatError):
        from_dimacs("p cnf 3 2\n1 2 0\n1 2 3 0\n")  # mixed widths
    with pytest.raises(FormatError):
        from_dimacs("p dnf 3 1\n1 2 0\n")


# -- sweeps -------------------------------------------------------------------------


def test_sweep_crossing_and_monotone_slope():
    pts = dpll_sat_sweep(40, 3, [2.0, 4.0, 6.0], 25, STREAM.child("sweep"))
    fracs = [p.sat_fraction for p in pts]
    assert fracs[0] == 1.0
    assert fracs[-1] <= 0.2
    # fitted slope negative at high confidence
    x = np.array([p.density for p in pts])
    y = np.array(fracs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    se = np.sqrt(resid @ resid / max(len(x) - 2, 1) / ((x - x.mean()) @ (x - x.mean())))
    assert slope + 2 * se < 0
    cross = empirical_crossing(pts)
    assert 2.0 < cross < 6.0
    csv = sweep_to_csv(pts)
    assert csv.splitlines()[0] == "density,trials,sat_fraction,mean_decisions"
    assert len(csv.splitlines()) == 4
    with pytest.raises(InsufficientDataError):
        empirical_crossing(pts[:1])
