"""Solution-space geometry probes.

Samples near-optimal configurations of a model instance (spin tensor,
K-SAT formula, or random graph), then inspects how those solutions sit
relative to each other: pairwise overlap/distance histograms, detection
of a forbidden middle band of distances, decomposition into well
separated clusters, and overlap tracking along instance interpolation
paths.

Configurations are stored row-wise in int8 matrices: +-1 entries for
spin models, 0/1 entries for assignments and vertex indicators. The
overlap of two spin or K-SAT configurations is the normalized +-1 inner
product (in [-1, 1]). Vertex subsets are sparse indicators, where that
inner product is dominated by shared absences, so for graph models the
overlap is the centered Pearson correlation of the indicator vectors
instead; independent subsets then score near 0 rather than near 1.

Every evaluated threshold comparison treats the model objective as
"larger is better": spin energy, number of satisfied clauses, subset
size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import graphopt, ksat as ksat_mod, spin as spin_mod
from .errors import (
    CapacityError,
    InsufficientDataError,
    IntegrityError,
    ParameterError,
)
from .instances import (
    ErGraph,
    GaussianTensor,
    InterpolationPath,
    KSatFormula,
    VertexSubset,
    instance_at,
    spins_from_mask,
)
from .rng import RngStream
from .serialize import content_hash

Model = Union[GaussianTensor, KSatFormula, ErGraph]

CLUSTER_SIZE_CAP = 40_000
EXHAUSTIVE_GRAPH_CAP = 1 << 18
KSAT_LEVEL_VAR_CAP = 22
DEFAULT_PAIR_CAP = 200_000


# -- model adapters ----------------------------------------------------------------


def model_kind(model: Model) -> str:
    if isinstance(model, GaussianTensor):
        return "spin"
    if isinstance(model, KSatFormula):
        return "ksat"
    if isinstance(model, ErGraph):
        return "graph"
    raise ParameterError(f"unsupported model type {type(model).__name__}")


def config_dim(model: Model) -> int:
    return model.n


def eval_config(model: Model, config: np.ndarray, subset_kind: str = "clique") -> float:
    """Objective value of one configuration; -inf for an invalid subset."""
    kind = model_kind(model)
    c = np.asarray(config)
    if c.shape != (model.n,):
        raise ParameterError(f"config shape {c.shape} does not match n={model.n}")
    if kind == "spin":
        return spin_mod.energy(model, c.astype(np.float64))
    if kind == "ksat":
        return float(ksat_mod.eval_clauses(model, c > 0))
    vertices = tuple(int(v) for v in np.nonzero(c > 0)[0])
    sub = VertexSubset(vertices=vertices, kind=subset_kind)
    return float(sub.size) if sub.is_valid(model) else float("-inf")


def _provenance_dict(model: Model) -> dict:
    d = {"instance_hash": content_hash(model)}
    prov = getattr(model, "provenance", None)
    if prov is not None:
        d["seed"] = prov.seed
        d["stream"] = prov.label
    return d


# -- sampling -----------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for near-optimum sampling.

    mode "exhaustive" enumerates the full level set (authoritative, small
    instances only); "annealed" draws independent randomized restarts and
    keeps those that clear the level.
    """

    mode: str = "exhaustive"
    restarts: int = 64
    sweeps: int = 80              # Metropolis sweeps per spin restart
    max_flips: int = 20_000       # WalkSAT flips per K-SAT restart
    noise: float = 0.5
    cap: int = 1 << 22            # exhaustive enumeration cap
    subset_kind: str = "clique"   # graph models: clique | independent_set

    def __post_init__(self):
        if self.mode not in ("exhaustive", "annealed"):
            raise ParameterError(f"unknown sampler mode {self.mode!r}")
        if self.restarts < 1:
            raise ParameterError("restarts must be >= 1")
        if self.subset_kind not in ("clique", "independent_set"):
            raise ParameterError(f"unknown subset kind {self.subset_kind!r}")


@dataclass(frozen=True, eq=False)
class NearOptimumSet:
    """Configurations of one instance at objective level >= eta.

    Admission is re-verified at construction: a member below the level is
    a broken contract, not a data point, and raises IntegrityError.
    Duplicates are legal (independent restarts may coincide).
    """

    model: Model
    eta: float
    solutions: np.ndarray         # (count, n) int8
    sampler: str                  # "exhaustive" | "annealed"
    budget_exhausted: bool = False
    subset_kind: str = "clique"

    def __post_init__(self):
        sols = np.ascontiguousarray(self.solutions, dtype=np.int8)
        if sols.ndim != 2 or sols.shape[1] != self.model.n:
            raise ParameterError(
                f"solutions must be (count, {self.model.n}), got {sols.shape}"
            )
        object.__setattr__(self, "solutions", sols)
        bad = admission_violations(self.model, self.eta, sols, self.subset_kind)
        if bad:
            raise IntegrityError(f"{bad} member(s) fall below the admission level {self.eta}")

    @property
    def count(self) -> int:
        return self.solutions.shape[0]

    def to_json(self) -> dict:
        masks = []
        for row in self.solutions:
            bits = (row < 0) if model_kind(self.model) == "spin" else (row > 0)
            masks.append(_mask_int(bits))
        return {
            "kind": model_kind(self.model),
            "n": self.model.n,
            "eta": self.eta,
            "sampler": self.sampler,
            "count": self.count,
            "budget_exhausted": self.budget_exhausted,
            "solutions": masks,
            **_provenance_dict(self.model),
        }


def _mask_int(bits: np.ndarray) -> int:
    mask = 0
    for i in np.nonzero(bits)[0]:
        mask |= 1 << int(i)
    return mask


def admission_violations(
    model: Model, eta: float, solutions: np.ndarray, subset_kind: str = "clique"
) -> int:
    """Count members with objective below eta (independent re-verification)."""
    return sum(
        1 for row in np.asarray(solutions) if eval_config(model, row, subset_kind) < eta
    )


def _ksat_level_scan(formula: KSatFormula, eta: float, cap: int) -> np.ndarray:
    """All assignments satisfying >= eta clauses, by chunked truth-table scan."""
    n = formula.n
    if n > KSAT_LEVEL_VAR_CAP:
        raise CapacityError(
            f"level scan capped at n={KSAT_LEVEL_VAR_CAP}, got n={n}"
        )
    rows = []
    total = 0
    chunk = 1 << 14
    cl = formula.clauses
    for lo in range(0, 1 << n, chunk):
        masks = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
        a = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
        av = a[:, np.abs(cl) - 1]
        counts = np.where(cl > 0, av, ~av).any(axis=2).sum(axis=1)
        keep = counts >= eta
        total += int(keep.sum())
        if total > cap:
            raise CapacityError(f"level set exceeds cap {cap}")
        if keep.any():
            rows.append(a[keep])
    if not rows:
        return np.empty((0, n), dtype=np.int8)
    return np.concatenate(rows).astype(np.int8)


def _graph_level_sets(graph: ErGraph, eta: float, subset_kind: str, cap: int) -> np.ndarray:
    """All cliques/independent sets of size >= eta as indicator rows."""
    g = graph.complement() if subset_kind == "independent_set" else graph
    n = g.n
    rows = g.adjacency_rows()
    if eta == float("-inf") or eta <= 0:
        need = 0
    else:
        need = int(np.ceil(eta))
    out: list[int] = []

    def extend(cur_mask: int, cur_size: int, cand: int):
        if cur_size >= need:
            out.append(cur_mask)
            if len(out) > cap:
                raise CapacityError(f"subset enumeration exceeds cap {cap}")
        if cur_size + bin(cand).count("1") < need:
            return
        c = cand
        while c:
            v = (c & -c).bit_length() - 1
            c &= c - 1
            extend(cur_mask | (1 << v), cur_size + 1, c & rows[v])

    extend(0, 0, (1 << n) - 1)
    sols = np.zeros((len(out), n), dtype=np.int8)
    for i, mask in enumerate(out):
        # masks are arbitrary-precision ints; bit 63 overflows int64 at n=64
        sols[i] = np.frombuffer(
            mask.to_bytes((n + 7) // 8, "little"), dtype=np.uint8
        )[np.arange(n) >> 3] >> (np.arange(n) & 7) & 1
    return sols


def sample_near_optima(
    model: Model,
    eta: float,
    count: int,
    sampler: SamplerConfig,
    rng: Optional[RngStream] = None,
) -> NearOptimumSet:
    """Collect configurations with objective >= eta.

    Exhaustive mode returns the complete level set (count is ignored) and
    needs no rng. Annealed mode draws up to sampler.restarts independent
    randomized runs, keeps admissible finals until `count` are in hand,
    and flags budget_exhausted when the restart budget ran out first; an
    unreachable level yields an empty, flagged set. eta = -inf admits
    everything sampled.
    """
    kind = model_kind(model)
    if sampler.mode == "exhaustive":
        if kind == "spin":
            masks = spin_mod.level_set(model, eta, cap=sampler.cap)
            sols = np.zeros((masks.size, model.n), dtype=np.int8)
            for i, m in enumerate(masks):
                sols[i] = spins_from_mask(int(m), model.n)
        elif kind == "ksat":
            if eta >= model.m:
                masks = ksat_mod.enumerate_solutions(model, cap=sampler.cap)
                sols = ((masks[:, None] >> np.arange(model.n)) & 1).astype(np.int8)
            else:
                sols = _ksat_level_scan(model, eta, sampler.cap)
        else:
            sols = _graph_level_sets(model, eta, sampler.subset_kind, sampler.cap)
        return NearOptimumSet(
            model=model, eta=eta, solutions=sols, sampler="exhaustive",
            subset_kind=sampler.subset_kind,
        )

    if rng is None:
        raise ParameterError("annealed sampling needs an rng")
    if count < 1:
        raise ParameterError("count must be >= 1")
    kept: list[np.ndarray] = []
    for i in range(sampler.restarts):
        sub = rng.child(f"restart/{i}")
        if kind == "spin":
            sched = spin_mod.anneal_schedule(sweeps=sampler.sweeps)
            res = spin_mod.metropolis_chain(model, sched, sampler.sweeps, sub)
            cand = res.best_spins.astype(np.int8)
        elif kind == "ksat":
            res = ksat_mod.walksat(model, sampler.max_flips, sampler.noise, sub)
            if not res.found:
                continue
            cand = res.assignment.astype(np.int8)
        else:
            sub_set = graphopt.karp_greedy(model, sampler.subset_kind, sub)
            cand = np.zeros(model.n, dtype=np.int8)
            cand[list(sub_set.vertices)] = 1
        if eval_config(model, cand, sampler.subset_kind) >= eta:
            kept.append(cand)
            if len(kept) >= count:
                break
    sols = (
        np.stack(kept).astype(np.int8)
        if kept
        else np.empty((0, model.n), dtype=np.int8)
    )
    return NearOptimumSet(
        model=model, eta=eta, solutions=sols, sampler="annealed",
        budget_exhausted=len(kept) < count, subset_kind=sampler.subset_kind,
    )


# -- pairwise geometry ---------------------------------------------------------------


def _pack_rows(rows_bool: np.ndarray) -> np.ndarray:
    bits = np.packbits(rows_bool, axis=1, bitorder="little")
    pad = (-bits.shape[1]) % 8
    if pad:
        bits = np.pad(bits, ((0, 0), (0, pad)))
    return bits.view(np.uint64)


def hamming_matrix(solutions: np.ndarray) -> np.ndarray:
    """(K, K) Hamming distances. Rows are +-1 or 0/1 configurations."""
    sols = np.asarray(solutions)
    if sols.ndim != 2:
        raise ParameterError("solutions must be a 2-d array")
    k = sols.shape[0]
    if k > CLUSTER_SIZE_CAP:
        raise CapacityError(f"pairwise matrix capped at {CLUSTER_SIZE_CAP} rows, got {k}")
    packed = _pack_rows(sols > 0)
    out = np.zeros((k, k), dtype=np.int32)
    step = max(1, (1 << 22) // max(packed.shape[1] * k, 1))
    for lo in range(0, k, step):
        hi = min(lo + step, k)
        xor = packed[lo:hi, None, :] ^ packed[None, :, :]
        out[lo:hi] = np.bitwise_count(xor).sum(axis=2, dtype=np.int32)
    return out


def overlap_matrix(solutions: np.ndarray, kind: str) -> np.ndarray:
    """(K, K) overlaps: normalized +-1 inner product, or centered Pearson
    correlation for sparse vertex indicators ("graph")."""
    sols = np.asarray(solutions, dtype=np.float64)
    k, n = sols.shape
    if kind in ("spin", "ksat"):
        pm = np.where(sols > 0, 1.0, -1.0)
        return np.clip(pm @ pm.T / n, -1.0, 1.0)
    if kind != "graph":
        raise ParameterError(f"unknown model kind {kind!r}")
    ind = (sols > 0).astype(np.float64)
    centered = ind - ind.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    g = (centered / safe[:, None]) @ (centered / safe[:, None]).T
    # degenerate rows (all-zero / all-one indicators) have no direction;
    # identical pairs are still a perfect match
    if np.any(norms == 0):
        dead = norms == 0
        g[dead, :] = 0.0
        g[:, dead] = 0.0
        same = hamming_matrix(sols.astype(np.int8)) == 0
        g[np.ix_(dead, np.arange(k))] = np.where(same[dead], 1.0, 0.0)
        g[np.ix_(np.arange(k), dead)] = np.where(same[:, dead], 1.0, 0.0)
    np.fill_diagonal(g, 1.0)
    return np.clip(g, -1.0, 1.0)


# -- histograms ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OverlapHistogram:
    """Distribution of a pairwise statistic over unordered solution pairs."""

    metric: str                   # "overlap" | "hamming"
    edges: np.ndarray
    masses: np.ndarray
    sample_count: int
    provenance: Optional[dict] = None

    def __post_init__(self):
        edges = np.ascontiguousarray(self.edges, dtype=np.float64)
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        if self.metric not in ("overlap", "hamming"):
            raise ParameterError(f"unknown metric {self.metric!r}")
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ParameterError("edges must be strictly increasing")
        lo, hi = _metric_range(self.metric)
        if edges[0] > lo + 1e-12 or edges[-1] < hi - 1e-12:
            raise ParameterError(
                f"edges must cover [{lo}, {hi}] for metric {self.metric!r}"
            )
        if masses.shape != (edges.size - 1,) or np.any(masses < 0):
            raise ParameterError("masses must be nonnegative, one per bin")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise ParameterError(f"masses sum to {masses.sum()}, expected 1")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "masses", masses)

    def to_csv(self) -> str:
        lines = ["bin_lo,bin_hi,mass"]
        for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.masses):
            lines.append(f"{lo:.12g},{hi:.12g},{m:.12g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "edges": self.edges.tolist(),
            "masses": self.masses.tolist(),
            "sample_count": self.sample_count,
            "provenance": self.provenance,
        }


def _metric_range(metric: str) -> tuple[float, float]:
    return (-1.0, 1.0) if metric == "overlap" else (0.0, 1.0)


def overlap_histogram(
    nos: NearOptimumSet,
    metric: str = "overlap",
    bins: Union[int, Sequence[float]] = 41,
    pair_cap: int = DEFAULT_PAIR_CAP,
    rng: Optional[RngStream] = None,
) -> OverlapHistogram:
    """Histogram the pairwise overlap (or normalized Hamming distance) over
    all unordered pairs, or a uniform pair subsample above pair_cap.

    The subsample stream defaults to a fixed internal seed so repeated calls
    on the same set are reproducible.
    """
    k = nos.count
    if k < 2:
        raise InsufficientDataError("need at least 2 solutions to histogram pairs")
    n = nos.model.n
    kind = model_kind(nos.model)
    total_pairs = k * (k - 1) // 2
    if total_pairs <= pair_cap:
        if metric == "hamming":
            d = hamming_matrix(nos.solutions)
            iu = np.triu_indices(k, 1)
            vals = d[iu] / n
        else:
            g = overlap_matrix(nos.solutions, kind)
            iu = np.triu_indices(k, 1)
            vals = g[iu]
        count = total_pairs
    else:
        gen = (rng or RngStream(0, "ogp/pair-subsample")).generator()
        ii = gen.integers(0, k, size=2 * pair_cap)
        jj = gen.integers(0, k, size=2 * pair_cap)
        keep = ii < jj
        ii, jj = ii[keep][:pair_cap], jj[keep][:pair_cap]
        a, b = nos.solutions[ii], nos.solutions[jj]
        if metric == "hamming":
            vals = ((a > 0) != (b > 0)).sum(axis=1) / n
        elif kind == "graph":
            ca = (a > 0).astype(np.float64)
            cb = (b > 0).astype(np.float64)
            ca -= ca.mean(axis=1, keepdims=True)
            cb -= cb.mean(axis=1, keepdims=True)
            den = np.linalg.norm(ca, axis=1) * np.linalg.norm(cb, axis=1)
            num = (ca * cb).sum(axis=1)
            equal = ((a > 0) == (b > 0)).all(axis=1)
            vals = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                            np.where(equal, 1.0, 0.0))
            vals = np.clip(vals, -1.0, 1.0)
        else:
            pm_a = np.where(a > 0, 1.0, -1.0)
            pm_b = np.where(b > 0, 1.0, -1.0)
            vals = np.clip((pm_a * pm_b).sum(axis=1) / n, -1.0, 1.0)
        count = int(vals.size)
    lo, hi = _metric_range(metric)
    if isinstance(bins, (int, np.integer)):
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=np.float64)
    hist, _ = np.histogram(vals, bins=edges)
    return OverlapHistogram(
        metric=metric,
        edges=edges,
        masses=hist / count,
        sample_count=count,
        provenance=_provenance_dict(nos.model),
    )


# -- gap detection -------------------------------------------------------------------


@dataclass(frozen=True)
class GapReport:
    """Widest low-mass band of the pairwise statistic, if one exists."""

    present: bool
    nu1: float
    nu2: float
    mass_in_gap: float
    min_width: float
    mass_ceiling: float

    def __post_init__(self):
        if self.present and not self.nu1 < self.nu2:
            raise ParameterError("gap interval must have nu1 < nu2")

    def to_json(self) -> dict:
        def fin(x):
            return float(x) if math.isfinite(x) else None

        return {
            "present": self.present,
            "nu1": fin(self.nu1),
            "nu2": fin(self.nu2),
            "mass_in_gap": fin(self.mass_in_gap),
            "min_width": self.min_width,
            "mass_ceiling": self.mass_ceiling,
        }


def detect_gap(
    hist: OverlapHistogram,
    min_width: Optional[float] = None,
    mass_ceiling: Optional[float] = None,
) -> GapReport:
    """Find the widest bin-aligned interval (nu1, nu2) of width >= min_width
    whose interior mass is <= mass_ceiling, with mass >= mass_ceiling (and
    > 0) on each side of it. Defaults: min_width = 5% of the metric range,
    mass_ceiling = 1e-3.

    Raising the ceiling loosens the interior test but tightens the flank
    test, so presence is only guaranteed monotone in the ceiling while the
    ceiling stays below the cluster masses themselves.
    """
    edges, masses = hist.edges, hist.masses
    span = edges[-1] - edges[0]
    if min_width is None:
        min_width = 0.05 * span
    if mass_ceiling is None:
        mass_ceiling = 1e-3
    if min_width <= 0 or min_width > span:
        raise ParameterError(f"min_width must be in (0, {span}], got {min_width}")
    if mass_ceiling < 0:
        raise ParameterError("mass_ceiling must be >= 0")
    prefix = np.concatenate([[0.0], np.cumsum(masses)])
    total = prefix[-1]
    nb = masses.size
    best = None  # (width, i, j, interior)
    for i in range(nb):
        left = prefix[i]
        if left < mass_ceiling or left <= 0:
            continue
        for j in range(i + 1, nb + 1):
            interior = prefix[j] - prefix[i]
            if interior > mass_ceiling + 1e-15:
                break  # interior only grows with j
            width = edges[j] - edges[i]
            if width < min_width - 1e-12:
                continue
            right = total - prefix[j]
            if right < mass_ceiling or right <= 0:
                continue
            if best is None or width > best[0] + 1e-15:
                best = (width, i, j, interior)
    if best is None:
        return GapReport(
            present=False, nu1=float("nan"), nu2=float("nan"),
            mass_in_gap=float("nan"), min_width=min_width, mass_ceiling=mass_ceiling,
        )
    _, i, j, interior = best
    return GapReport(
        present=True, nu1=float(edges[i]), nu2=float(edges[j]),
        mass_in_gap=float(interior), min_width=min_width, mass_ceiling=mass_ceiling,
    )


def planted_gap_histogram(
    rng: RngStream,
    gap: bool = True,
    noise_mass: float = 0.0,
    bins: int = 60,
    metric: str = "hamming",
) -> tuple[OverlapHistogram, Optional[tuple[float, float]]]:
    """Synthetic histogram with a known truth, for detector calibration.

    With gap=True: two occupied bands flank an empty band of 3..24 bins
    (widths 0.05..0.4 of the range for the default 60 bins), with
    noise_mass sprinkled uniformly inside it; returns the planted (nu1,
    nu2). With gap=False: one contiguous occupied band, truth None. Every
    occupied bin carries mass well above the default detection ceiling.
    """
    if not 0 <= noise_mass < 0.5:
        raise ParameterError(f"noise_mass must be in [0, 0.5), got {noise_mass}")
    gen = rng.child("plant").generator()
    lo, hi = _metric_range(metric)
    edges = np.linspace(lo, hi, bins + 1)
    masses = np.zeros(bins)
    if gap:
        w_gap = int(gen.integers(3, 25))
        w_l = int(gen.integers(5, 16))
        w_r = int(gen.integers(5, 16))
        s = int(gen.integers(0, bins - (w_l + w_gap + w_r) + 1))
        g0, g1 = s + w_l, s + w_l + w_gap
        split = 0.35 + 0.3 * gen.random()
        bulk = 1.0 - noise_mass
        left = 1.0 + gen.random(w_l)
        right = 1.0 + gen.random(w_r)
        masses[s:g0] = left / left.sum() * bulk * split
        masses[g1:g1 + w_r] = right / right.sum() * bulk * (1.0 - split)
        if noise_mass > 0:
            masses[g0:g1] = noise_mass / w_gap
        truth = (float(edges[g0]), float(edges[g1]))
    else:
        w = int(gen.integers(45, bins + 1))
        s = int(gen.integers(0, bins - w + 1))
        body = 1.0 + gen.random(w)
        masses[s:s + w] = body / body.sum()
        truth = None
    masses = masses / masses.sum()
    hist = OverlapHistogram(
        metric=metric, edges=edges, masses=masses, sample_count=10_000,
        provenance={"synthetic": True},
    )
    return hist, truth


# -- clustering ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClusterReport:
    """Connected components of the solution set under Hamming radius r."""

    radius: int
    components: tuple[int, ...]        # sizes, largest first
    separation: Optional[int]          # min cross-component distance
    outlier_mass: float                # fraction in components below size_floor
    size_floor: int
    labels: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.separation is not None and self.separation <= self.radius:
            raise ParameterError("cross-component separation must exceed the radius")

    def to_json(self) -> dict:
        return {
            "radius": self.radius,
            "components": list(self.components),
            "separation": self.separation,
            "outlier_mass": self.outlier_mass,
            "size_floor": self.size_floor,
        }


class _UnionFind:
    def __init__(self, k: int):
        self.parent = list(range(k))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def cluster_solutions(
    solutions: np.ndarray, radius: int = 1, size_floor: int = 2
) -> ClusterReport:
    """Decompose a solution set into components under "Hamming <= radius"
    adjacency; report sizes, the minimum cross-component distance, and the
    mass held by components smaller than size_floor."""
    sols = np.asarray(solutions)
    if sols.ndim != 2:
        raise ParameterError("solutions must be a 2-d array")
    if radius < 0:
        raise ParameterError("radius must be >= 0")
    k = sols.shape[0]
    if k == 0:
        return ClusterReport(
            radius=radius, components=(), separation=None, outlier_mass=0.0,
            size_floor=size_floor, labels=np.empty(0, dtype=np.int64),
        )
    if k > CLUSTER_SIZE_CAP:
        raise CapacityError(f"clustering capped at {CLUSTER_SIZE_CAP} rows, got {k}")
    packed = _pack_rows(sols > 0)
    uf = _UnionFind(k)
    step = max(1, (1 << 22) // max(packed.shape[1] * k, 1))
    for lo in range(0, k, step):
        hi = min(lo + step, k)
        xor = packed[lo:hi, None, :] ^ packed[None, :, :]
        d = np.bitwise_count(xor).sum(axis=2, dtype=np.int32)
        ii, jj = np.nonzero(d <= radius)
        for a, b in zip(ii + lo, jj):
            if a < b:
                uf.union(int(a), int(b))
    roots = np.array([uf.find(i) for i in range(k)], dtype=np.int64)
    _, labels, sizes = np.unique(roots, return_inverse=True, return_counts=True)

    separation = None
    if sizes.size > 1:
        sep = np.iinfo(np.int32).max
        for lo in range(0, k, step):
            hi = min(lo + step, k)
            xor = packed[lo:hi, None, :] ^ packed[None, :, :]
            d = np.bitwise_count(xor).sum(axis=2, dtype=np.int32)
            cross = labels[lo:hi, None] != labels[None, :]
            if cross.any():
                sep = min(sep, int(d[cross].min()))
        separation = sep

    order = np.sort(sizes)[::-1]
    outliers = sizes[sizes < size_floor].sum()
    return ClusterReport(
        radius=radius,
        components=tuple(int(s) for s in order),
        separation=separation,
        outlier_mass=float(outliers / k),
        size_floor=size_floor,
        labels=labels,
    )


# -- interpolation-path experiments ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiOverlapSample:
    """Pairwise overlaps of one tuple of near-optima drawn along a path."""

    positions: tuple[int, ...]         # requested, nondecreasing
    sampled_positions: tuple[int, ...] # positions where sampling succeeded
    overlaps: np.ndarray               # square over sampled_positions
    failed_positions: tuple[int, ...] = ()

    def __post_init__(self):
        g = np.ascontiguousarray(self.overlaps, dtype=np.float64)
        m = len(self.sampled_positions)
        if g.shape != (m, m):
            raise ParameterError(f"overlap matrix must be {m}x{m}, got {g.shape}")
        if m:
            if not np.allclose(g, g.T, atol=1e-12):
                raise ParameterError("overlap matrix must be symmetric")
            if not np.allclose(np.diag(g), 1.0, atol=1e-12):
                raise ParameterError("overlap matrix diagonal must be 1")
            if g.min() < -1 - 1e-12 or g.max() > 1 + 1e-12:
                raise ParameterError("overlaps must lie in [-1, 1]")
        if list(self.positions) != sorted(self.positions):
            raise ParameterError("positions must be nondecreasing")
        object.__setattr__(self, "overlaps", g)

    def to_json(self) -> dict:
        return {
            "positions": list(self.positions),
            "sampled_positions": list(self.sampled_positions),
            "overlaps": self.overlaps.tolist(),
            "failed_positions": list(self.failed_positions),
        }


@dataclass(frozen=True, eq=False)
class EndpointSummary:
    """Endpoint-pair overlap statistics across rounds (positions 0 and T)."""

    rounds: int
    overlaps: np.ndarray
    mean_overlap: float
    mean_abs_overlap: float
    mean_hamming: float

    def to_json(self) -> dict:
        return {
            "rounds": self.rounds,
            "overlaps": self.overlaps.tolist(),
            "mean_overlap": self.mean_overlap,
            "mean_abs_overlap": self.mean_abs_overlap,
            "mean_hamming": self.mean_hamming,
        }


@dataclass(frozen=True, eq=False)
class InterpolationExperiment:
    samples: tuple[MultiOverlapSample, ...]
    endpoint: Optional[EndpointSummary]
    eta: float
    positions: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "eta": self.eta,
            "positions": list(self.positions),
            "samples": [s.to_json() for s in self.samples],
            "endpoint": None if self.endpoint is None else self.endpoint.to_json(),
        }


def interpolation_overlap_experiment(
    path: InterpolationPath,
    eta: float,
    m_tuple: int,
    sampler: SamplerConfig,
    rng: RngStream,
    positions: Optional[Sequence[int]] = None,
    rounds: int = 1,
) -> InterpolationExperiment:
    """Draw tuples of near-optima at positions along the path and record
    their pairwise overlaps.

    Each round samples one configuration per distinct position (duplicate
    positions share the draw, so a (0, 0) pair has overlap exactly 1) and
    assembles the overlap matrix over the positions that produced one.
    Failures are annotated, not fatal. With m_tuple == 2 at positions
    (0, T) an endpoint summary aggregates the per-round overlap and
    normalized Hamming distance of the two draws.
    """
    if m_tuple < 2:
        raise ParameterError("tuple size must be >= 2")
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    total = path.total_units
    if positions is None:
        pos = tuple(int(round(x)) for x in np.linspace(0, total, m_tuple))
    else:
        pos = tuple(int(x) for x in positions)
        if len(pos) != m_tuple:
            raise ParameterError(f"expected {m_tuple} positions, got {len(pos)}")
        if list(pos) != sorted(pos):
            raise ParameterError("positions must be nondecreasing")
        if pos and (pos[0] < 0 or pos[-1] > total):
            raise ParameterError(f"positions must lie in [0, {total}]")
    kind = model_kind(path.base)
    instances = {t: instance_at(path, t) for t in sorted(set(pos))}

    samples = []
    endpoint_overlaps = []
    endpoint_hamming = []
    is_endpoint_pair = m_tuple == 2 and pos == (0, total)
    for r in range(rounds):
        draws: dict[int, Optional[np.ndarray]] = {}
        for t in sorted(set(pos)):
            nos = sample_near_optima(
                instances[t], eta, 1, sampler, rng.child(f"round/{r}/pos/{t}")
            )
            draws[t] = nos.solutions[0] if nos.count else None
        ok = tuple(t for t in pos if draws[t] is not None)
        failed = tuple(t for t in pos if draws[t] is None)
        if ok:
            stack = np.stack([draws[t] for t in ok]).astype(np.int8)
            g = overlap_matrix(stack, kind)
        else:
            g = np.empty((0, 0))
        samples.append(
            MultiOverlapSample(
                positions=pos, sampled_positions=ok, overlaps=g,
                failed_positions=failed,
            )
        )
        if is_endpoint_pair and len(ok) == 2:
            endpoint_overlaps.append(float(g[0, 1]))
            a, b = draws[pos[0]], draws[pos[1]]
            endpoint_hamming.append(float(((a > 0) != (b > 0)).mean()))

    endpoint = None
    if is_endpoint_pair and endpoint_overlaps:
        arr = np.array(endpoint_overlaps)
        endpoint = EndpointSummary(
            rounds=len(endpoint_overlaps),
            overlaps=arr,
            mean_overlap=float(arr.mean()),
            mean_abs_overlap=float(np.abs(arr).mean()),
            mean_hamming=float(np.mean(endpoint_hamming)),
        )
    return InterpolationExperiment(
        samples=tuple(samples), endpoint=endpoint, eta=eta, positions=pos,
    )


# -- algorithm stability --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StabilityProfile:
    """Successive-output distances of one algorithm along a path.

    Exploratory: recorded and published, never asserted against.
    """

    positions: tuple[int, ...]
    distances: np.ndarray              # len(positions) - 1 successive Hamming
    max_distance: int
    mean_distance: float

    def to_json(self) -> dict:
        return {
            "positions": list(self.positions),
            "distances": [int(d) for d in self.distances],
            "max_distance": self.max_distance,
            "mean_distance": self.mean_distance,
        }

    def to_csv(self) -> str:
        lines = ["position,next_position,distance"]
        for a, b, d in zip(self.positions[:-1], self.positions[1:], self.distances):
            lines.append(f"{a},{b},{int(d)}")
        return "\n".join(lines) + "\n"


def algorithm_stability_profile(
    path: InterpolationPath,
    rng: RngStream,
    subset_kind: str = "clique",
    positions: Optional[Sequence[int]] = None,
    max_positions: int = 65,
) -> StabilityProfile:
    """Run the greedy subset scan with one shared seed at consecutive path
    positions and record the Hamming distance between successive outputs.

    Graph paths only: the probe measures instance sensitivity of a fixed
    algorithm, so the scan order is reused at every position.
    """
    if model_kind(path.base) != "graph":
        raise ParameterError("stability profile is defined for graph paths")
    total = path.total_units
    if positions is None:
        count = min(max_positions, total + 1)
        pos = tuple(sorted(set(int(round(x)) for x in np.linspace(0, total, count))))
    else:
        pos = tuple(int(x) for x in positions)
        if list(pos) != sorted(set(pos)):
            raise ParameterError("positions must be strictly increasing")
        if pos and (pos[0] < 0 or pos[-1] > total):
            raise ParameterError(f"positions must lie in [0, {total}]")
    if len(pos) < 2:
        raise ParameterError("need at least 2 positions")
    shared = rng.child("scan-seed")
    outputs = []
    for t in pos:
        g = instance_at(path, t)
        sub = graphopt.karp_greedy(g, subset_kind, shared)
        ind = np.zeros(g.n, dtype=np.int8)
        ind[list(sub.vertices)] = 1
        outputs.append(ind)
    stack = np.stack(outputs)
    dists = ((stack[:-1] > 0) != (stack[1:] > 0)).sum(axis=1)
    return StabilityProfile(
        positions=pos,
        distances=dists.astype(np.int64),
        max_distance=int(dists.max()),
        mean_distance=float(dists.mean()),
    )


def report_to_json_str(report) -> str:
    """Canonical JSON text for any report object with a to_json method."""
    return json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"
