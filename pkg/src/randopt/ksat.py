"""Random K-SAT: clause evaluation, exact and heuristic solving, moments.

Exact solving is an iterative DPLL (unit propagation, optional pure-literal
rule, MOMS branching) compiled via numba; the heuristic is WalkSAT. Both
verify any SAT verdict against eval_clauses before returning it. The
first-moment calculator gives log2 E[#solutions] = n + m*log2(1 - 2^-K)
exactly, and the density where it crosses zero upper-bounds the
satisfiability threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, log2
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    BudgetExceededError,
    CapacityError,
    FormatError,
    InsufficientDataError,
    ParameterError,
    RandoptError,
)
from .graphopt import MomentCurve
from .instances import KSatFormula, gen_ksat
from .rng import RngStream

ENUMERATION_VAR_CAP = 30


def eval_clauses(formula: KSatFormula, assignment) -> int:
    """Number of satisfied clauses under a Boolean assignment."""
    a = np.asarray(assignment)
    if a.shape != (formula.n,):
        raise ParameterError(f"assignment shape {a.shape} does not match n={formula.n}")
    a = a.astype(bool)
    if formula.m == 0:
        return 0
    cl = formula.clauses
    av = a[np.abs(cl) - 1]
    lit_true = np.where(cl > 0, av, ~av)
    return int(lit_true.any(axis=1).sum())


def is_satisfying(formula: KSatFormula, assignment) -> bool:
    return eval_clauses(formula, assignment) == formula.m


def _occurrence_csr(formula: KSatFormula):
    """Per-literal clause lists: literal id 2(v-1) for v, 2(v-1)+1 for -v."""
    cl = formula.clauses
    v = np.abs(cl) - 1
    li = (2 * v + (cl < 0)).ravel()
    order = np.argsort(li, kind="stable")
    ocls = np.repeat(np.arange(formula.m, dtype=np.int32), formula.k)[order]
    ostart = np.zeros(2 * formula.n + 1, dtype=np.int32)
    np.add.at(ostart, li + 1, 1)
    np.cumsum(ostart, out=ostart)
    return ostart.astype(np.int32), ocls.astype(np.int32), li.astype(np.int32)


@dataclass(frozen=True)
class DpllResult:
    """Complete-search outcome: verdict, witness (if SAT), and search effort."""

    status: str                      # "SAT" | "UNSAT"
    assignment: Optional[np.ndarray]
    decisions: int

    @property
    def satisfiable(self) -> bool:
        return self.status == "SAT"


def dpll_solve(
    formula: KSatFormula, node_budget: Optional[int] = None, use_pure: bool = True
) -> DpllResult:
    """Exact satisfiability via DPLL; SAT verdicts carry a verified witness.

    node_budget caps branching decisions; exceeding it raises a budget error
    (distinct from UNSAT, which is a definite verdict).
    """
    n, m = formula.n, formula.m
    if m == 0:
        return DpllResult("SAT", np.ones(n, dtype=bool), 0)
    budget = (1 << 62) if node_budget is None else int(node_budget)
    if budget < 0:
        raise ParameterError(f"node budget must be >= 0, got {node_budget}")
    cstart = np.arange(0, (m + 1) * formula.k, formula.k, dtype=np.int32)
    clits = formula.clauses.ravel().astype(np.int32)
    ostart, ocls, _ = _occurrence_csr(formula)
    status, assign, decisions = _kernels.dpll_kernel(
        n, m, cstart, clits, ostart, ocls, budget, use_pure
    )
    if status == 2:
        raise BudgetExceededError(
            f"DPLL budget of {budget} decisions exhausted", spent=int(decisions)
        )
    if status == 1:
        witness = assign[1:] > 0
        if not is_satisfying(formula, witness):
            raise RandoptError("DPLL returned a non-satisfying witness")
        return DpllResult("SAT", witness, int(decisions))
    return DpllResult("UNSAT", None, int(decisions))


@dataclass(frozen=True)
class WalkSatResult:
    """Local-search outcome; found=False is a give-up, not an UNSAT verdict."""

    found: bool
    assignment: Optional[np.ndarray]
    flips: int


def walksat(
    formula: KSatFormula, max_flips: int, noise: float, rng: RngStream
) -> WalkSatResult:
    """WalkSAT: flip within a random unsatisfied clause, min-break or random.

    With probability `noise` the flipped literal is uniform in the clause,
    otherwise it minimizes the number of newly broken clauses (ties broken
    uniformly). Randomness comes from a pre-drawn pool, k+2 draws per flip.
    """
    if not 0 <= noise <= 1:
        raise ParameterError(f"noise must be in [0,1], got {noise}")
    if max_flips < 0:
        raise ParameterError(f"max_flips must be >= 0, got {max_flips}")
    n, m, k = formula.n, formula.m, formula.k
    gen = rng.child("walksat").generator()
    init = np.empty(n + 1, dtype=np.int8)
    init[0] = 1
    init[1:] = 1 - 2 * gen.integers(0, 2, size=n)
    if m == 0:
        return WalkSatResult(True, init[1:] > 0, 0)
    pool = gen.random(size=max_flips * (k + 2) + 8)
    ostart, ocls, _ = _occurrence_csr(formula)
    found, flips, assign = _kernels.walksat_kernel(
        n, m, k, formula.clauses, ostart, ocls, init, max_flips, noise, pool
    )
    if not found:
        return WalkSatResult(False, None, int(flips))
    witness = assign[1:] > 0
    if not is_satisfying(formula, witness):
        raise RandoptError("WalkSAT returned a non-satisfying witness")
    return WalkSatResult(True, witness, int(flips))


# -- exhaustive solution sets ----------------------------------------------------


def enumerate_solutions(formula: KSatFormula, cap: int = 1 << 22) -> np.ndarray:
    """All satisfying assignments as sorted bitmasks (bit v-1 = variable v).

    Branch-and-propagate: unit clauses are forced before every branch (the
    pure-literal rule is deliberately absent here because it discards
    solutions), and once every clause is satisfied the remaining free
    variables expand combinatorially.
    """
    n, m = formula.n, formula.m
    if n > ENUMERATION_VAR_CAP:
        raise CapacityError(f"enumeration capped at n={ENUMERATION_VAR_CAP}, got n={n}")
    clauses = [formula.clauses[j] for j in range(m)]
    solutions: list[int] = []

    def expand(assign: np.ndarray, base: int) -> None:
        free = np.flatnonzero(assign == 0)
        if (len(solutions) + (1 << free.size)) > cap:
            raise CapacityError(f"solution set exceeds cap {cap}")
        for sub in range(1 << free.size):
            mask = base
            for i, v in enumerate(free):
                if (sub >> i) & 1:
                    mask |= 1 << int(v)
            solutions.append(mask)

    def search(assign: np.ndarray) -> None:
        assign = assign.copy()
        # unit propagation to fixpoint
        while True:
            unit_lit = 0
            done = True
            for cl in clauses:
                vs = np.abs(cl) - 1
                signs = cl > 0
                vals = assign[vs]
                if np.any((vals != 0) & ((vals > 0) == signs)):
                    continue  # clause satisfied
                open_pos = np.flatnonzero(vals == 0)
                if open_pos.size == 0:
                    return  # conflict: clause all-false
                done = False
                if open_pos.size == 1:
                    t = open_pos[0]
                    unit_lit = int(cl[t])
                    break
            if unit_lit != 0:
                assign[abs(unit_lit) - 1] = 1 if unit_lit > 0 else -1
                continue
            if done:
                base = sum(1 << int(v) for v in np.flatnonzero(assign > 0))
                expand(assign, base)
                return
            break
        # branch on the first open variable of the first unsatisfied clause
        for cl in clauses:
            vs = np.abs(cl) - 1
            signs = cl > 0
            vals = assign[vs]
            if np.any((vals != 0) & ((vals > 0) == signs)):
                continue
            v = int(vs[np.flatnonzero(vals == 0)[0]])
            for choice in (1, -1):
                assign[v] = choice
                search(assign)
            assign[v] = 0
            return

    search(np.zeros(n, dtype=np.int8))
    return np.sort(np.asarray(solutions, dtype=np.int64))


# -- first moment ------------------------------------------------------------------


def first_moment_crossing(k: int) -> float:
    """Density where E[#solutions] crosses 1: -1 / log2(1 - 2^-k)."""
    if k < 1:
        raise ParameterError(f"clause width must be >= 1, got {k}")
    return -1.0 / log2(1.0 - 2.0 ** -k)


def sat_moment_curve(n: int, k: int, densities: Sequence[float]) -> MomentCurve:
    """log2 E[#solutions] = n + c*n*log2(1 - 2^-k) along a density grid."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    slope = log2(1.0 - 2.0 ** -k)
    pts = np.array([[c, n + c * n * slope] for c in densities], dtype=float)
    return MomentCurve(
        model="ksat",
        params={"n": n, "k": k},
        points=pts,
        crossing=first_moment_crossing(k),
    )


# -- DIMACS ------------------------------------------------------------------------


def to_dimacs(formula: KSatFormula) -> str:
    lines = [f"p cnf {formula.n} {formula.m}"]
    for row in formula.clauses:
        lines.append(" ".join(str(int(l)) for l in row) + " 0")
    return "\n".join(lines) + "\n"


def from_dimacs(text: str) -> KSatFormula:
    """Parse fixed-width CNF; comment lines ('c ...') are skipped."""
    n = m = None
    rows: list[list[int]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError(f"malformed problem line: {line!r}")
            n, m = int(parts[2]), int(parts[3])
            continue
        if n is None:
            raise FormatError("clause before the problem line")
        toks = line.split()
        if toks[-1] != "0":
            raise FormatError(f"clause not terminated by 0: {line!r}")
        lits = [int(t) for t in toks[:-1]]
        if any(l == 0 for l in lits):
            raise FormatError("literal 0 inside a clause")
        rows.append(lits)
    if n is None:
        raise FormatError("missing problem line")
    if len(rows) != m:
        raise FormatError(f"problem line promises {m} clauses, found {len(rows)}")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise FormatError(f"mixed clause widths {sorted(widths)}; fixed width required")
    k = widths.pop() if widths else 1
    arr = np.asarray(rows, dtype=np.int32).reshape(-1, k)
    return KSatFormula(n=n, k=k, clauses=arr)


# -- density sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SatCurvePoint:
    """One density on an empirical satisfiability curve."""

    density: float
    trials: int
    sat_fraction: float
    mean_decisions: float


def dpll_sat_sweep(
    n: int,
    k: int,
    densities: Sequence[float],
    instances_per_point: int,
    rng: RngStream,
    node_budget: Optional[int] = None,
) -> list[SatCurvePoint]:
    """Empirical P(SAT) vs clause density via complete search."""
    if instances_per_point < 1:
        raise ParameterError("need at least one instance per density")
    points = []
    for c in densities:
        m = int(round(c * n))
        sat = 0
        decisions = 0
        for i in range(instances_per_point):
            f = gen_ksat(n, m, k, rng.child(f"c{c:g}/inst{i}"))
            res = dpll_solve(f, node_budget=node_budget)
            sat += res.satisfiable
            decisions += res.decisions
        points.append(
            SatCurvePoint(
                density=float(c),
                trials=instances_per_point,
                sat_fraction=sat / instances_per_point,
                mean_decisions=decisions / instances_per_point,
            )
        )
    return points


def empirical_crossing(points: Sequence[SatCurvePoint], level: float = 0.5) -> float:
    """Density where the empirical curve crosses `level`, linearly interpolated."""
    pts = sorted(points, key=lambda p: p.density)
    for a, b in zip(pts, pts[1:]):
        if a.sat_fraction >= level and b.sat_fraction < level:
            span = a.sat_fraction - b.sat_fraction
            frac = (a.sat_fraction - level) / span
            return a.density + frac * (b.density - a.density)
    raise InsufficientDataError(f"curve never crosses {level} within the sweep")


def sweep_to_csv(points: Sequence[SatCurvePoint]) -> str:
    lines = ["density,trials,sat_fraction,mean_decisions"]
    lines += [
        f"{p.density:.10g},{p.trials},{p.sat_fraction:.10g},{p.mean_decisions:.10g}"
        for p in points
    ]
    return "\n".join(lines) + "\n"
