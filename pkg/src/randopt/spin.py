"""Mean-field spin glass Hamiltonians and optimizers over the hypercube.

The Hamiltonian is the order-p multilinear form
    H(s) = n^{-(p+1)/2} * sum_{i_1<...<i_p} J_{i_1...i_p} s_{i_1}...s_{i_p}
with i.i.d. standard normal couplings. With this scale the maximum over
{-1,1}^n converges to an order-one constant, so energies from different n
are directly comparable.

Included: exact energy/gradient of the multilinear extension, brute-force
ground states (Gray-code kernel with a naive full-enumeration oracle),
single-spin-flip Metropolis with optional annealing, and the incremental
orthogonal-step walk that climbs the energy surface from the cube center.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CapacityError, ParameterError, StalledWalkError
from .instances import GaussianTensor, tuple_unrank
from .rng import RngStream
from . import _kernels

GRAY_CAP_P2 = 24
GRAY_CAP_HIGH = 18
NAIVE_CAP = 14


def _scale(n: int, p: int) -> float:
    return float(n) ** (-(p + 1) / 2)


@lru_cache(maxsize=64)
def _index_matrix(n: int, p: int) -> np.ndarray:
    """(C(n,p), p) matrix of index tuples in colex rank order."""
    c = comb(n, p)
    idx = np.empty((c, p), dtype=np.int64)
    for r in range(c):
        idx[r] = tuple_unrank(r, p)
    return idx


@lru_cache(maxsize=64)
def _incidence(n: int, p: int):
    """CSR arrays: for each variable, the tuples containing it and the
    other p-1 members of each such tuple. Feeds the Gray-code kernels."""
    idx = _index_matrix(n, p)
    counts = np.zeros(n + 1, dtype=np.int64)
    for row in idx:
        for i in row:
            counts[i + 1] += 1
    start = np.cumsum(counts)
    entry = np.empty(start[-1], dtype=np.int64)
    others = np.empty(start[-1] * (p - 1), dtype=np.int64)
    fill = start[:-1].copy()
    for r in range(idx.shape[0]):
        row = idx[r]
        for i in row:
            t = fill[i]
            entry[t] = r
            q = 0
            for j in row:
                if j != i:
                    others[t * (p - 1) + q] = j
                    q += 1
            fill[i] += 1
    return start, entry, others


def _check_config(tensor: GaussianTensor, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tensor.n,):
        raise ParameterError(f"config shape {x.shape} does not match n={tensor.n}")
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ParameterError("coordinates must lie in [-1, 1]")
    return x


def energy(tensor: GaussianTensor, config) -> float:
    """Energy of a spin configuration, or the multilinear extension for
    fractional coordinates in [-1,1]^n."""
    x = _check_config(tensor, config)
    n, p = tensor.n, tensor.p
    if p == 2:
        a = tensor.as_matrix()
        return float(0.5 * x @ (a @ x)) * _scale(n, p)
    idx = _index_matrix(n, p)
    prods = np.prod(x[idx], axis=1)
    return float(tensor.entries @ prods) * _scale(n, p)


def energy_gradient(tensor: GaussianTensor, config) -> np.ndarray:
    """Exact gradient of the multilinear extension of energy at x."""
    x = _check_config(tensor, config)
    n, p = tensor.n, tensor.p
    if p == 2:
        return tensor.as_matrix() @ x * _scale(n, p)
    idx = _index_matrix(n, p)
    grad = np.zeros(n)
    cols = np.arange(p)
    for k in range(p):
        rest = idx[:, cols != k]
        loo = np.prod(x[rest], axis=1) * tensor.entries
        np.add.at(grad, idx[:, k], loo)
    return grad * _scale(n, p)


def overlap(s1, s2) -> float:
    """Normalized inner product in [-1, 1]; 1 - 2 d_Hamming/n for spins."""
    a = np.asarray(s1, dtype=np.float64)
    b = np.asarray(s2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError(f"overlap needs equal-length vectors, got {a.shape} vs {b.shape}")
    return float(a @ b) / a.size


# -- ground states -------------------------------------------------------------

def brute_force_ground_state(tensor: GaussianTensor) -> tuple[np.ndarray, float]:
    """Exact maximum over all 2^n configurations via Gray-code enumeration.

    For even p the maximizer pair {s, -s} is reported by the representative
    with first spin +1.
    """
    n, p = tensor.n, tensor.p
    cap = GRAY_CAP_P2 if p == 2 else GRAY_CAP_HIGH
    if n > cap:
        raise CapacityError(f"brute force capped at n={cap} for p={p}, got n={n}")
    start, entry, others = _incidence(n, p)
    best_raw, mask = _kernels.gray_ground_state(n, tensor.entries, start, entry, others, p - 1)
    bits = (int(mask) >> np.arange(n)) & 1
    spins = (1 - 2 * bits).astype(np.int8)
    if p % 2 == 0 and spins[0] < 0:
        spins = -spins
    return spins, float(best_raw) * _scale(n, p)


def naive_ground_state(tensor: GaussianTensor) -> tuple[np.ndarray, float]:
    """Independent oracle: re-evaluate every configuration from scratch
    (no incremental updates). Capped at n=14."""
    n, p = tensor.n, tensor.p
    if n > NAIVE_CAP:
        raise CapacityError(f"naive enumeration capped at n={NAIVE_CAP}, got n={n}")
    idx = _index_matrix(n, p)
    masks = np.arange(2**n, dtype=np.uint32)
    spins = 1 - 2 * ((masks[:, None] >> np.arange(n)) & 1).astype(np.int8)
    best_raw = -np.inf
    best = None
    for lo in range(0, 2**n, 4096):
        block = spins[lo : lo + 4096].astype(np.float64)
        vals = np.prod(block[:, idx], axis=2) @ tensor.entries
        j = int(np.argmax(vals))
        if vals[j] > best_raw:
            best_raw = float(vals[j])
            best = spins[lo + j]
    out = best.astype(np.int8)
    if p % 2 == 0 and out[0] < 0:
        out = -out
    return out, best_raw * _scale(n, p)


def level_set(tensor: GaussianTensor, eta: float, cap: int = 1 << 22) -> np.ndarray:
    """All state masks with energy >= eta (exhaustive). Bit i set: spin i = -1."""
    n, p = tensor.n, tensor.p
    hard_cap = GRAY_CAP_P2 if p == 2 else GRAY_CAP_HIGH
    if n > hard_cap:
        raise CapacityError(f"level-set enumeration capped at n={hard_cap}, got n={n}")
    start, entry, others = _incidence(n, p)
    eta_raw = eta / _scale(n, p)
    masks, cnt, overflow = _kernels.gray_level_set(
        n, tensor.entries, start, entry, others, p - 1, eta_raw, cap
    )
    if overflow:
        raise CapacityError(f"level set exceeds cap {cap}; raise the cap or the threshold")
    return np.sort(masks[:cnt].copy())


# -- extrapolation fit -----------------------------------------------------------

@dataclass(frozen=True)
class ExtrapolationFit:
    """Least-squares fit of mean ground states against n^exponent."""

    ns: tuple[int, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    exponent: float
    constant: float          # fitted value at n -> infinity
    slope: float
    constant_stderr: float


def extrapolate_ground_state(
    rng: RngStream,
    ns: Sequence[int] = (14, 17, 20),
    seeds_per_n: int = 30,
    p: int = 2,
    exponent: float = -2.0 / 3.0,
) -> ExtrapolationFit:
    """Brute-force mean ground state at several n, extrapolated to n = inf.

    Fits mean(n) = constant + slope * n^exponent by weighted least squares
    (weights from per-n standard errors).
    """
    if len(ns) < 2:
        raise ParameterError("need at least two sizes to extrapolate")
    if seeds_per_n < 2:
        raise ParameterError("need at least two seeds per size")
    from .instances import gen_tensor

    means, ses = [], []
    for n in ns:
        vals = np.empty(seeds_per_n)
        for s in range(seeds_per_n):
            t = gen_tensor(n, p, rng.child(f"n{n}/seed{s}"))
            _, vals[s] = brute_force_ground_state(t)
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / np.sqrt(seeds_per_n)))
    x = np.array(ns, dtype=float) ** exponent
    w = 1.0 / np.array(ses)
    a = np.column_stack([np.ones_like(x), x]) * w[:, None]
    b = np.array(means) * w
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    cov = np.linalg.inv(a.T @ a)
    return ExtrapolationFit(
        ns=tuple(int(n) for n in ns),
        means=tuple(means),
        stderrs=tuple(ses),
        exponent=exponent,
        constant=float(coef[0]),
        slope=float(coef[1]),
        constant_stderr=float(np.sqrt(cov[0, 0])),
    )


# -- Metropolis ------------------------------------------------------------------

@dataclass
class ChainResult:
    """Summary of one Metropolis run."""

    best_spins: np.ndarray
    best_energy: float
    energies: np.ndarray        # per sweep
    acceptance_rate: float
    final_spins: np.ndarray

    def trace_csv(self) -> str:
        lines = ["sweep,energy"]
        lines += [f"{i},{e:.12g}" for i, e in enumerate(self.energies)]
        return "\n".join(lines) + "\n"


def acceptance_probability(tensor: GaussianTensor, spins, flip: int, beta: float) -> float:
    """Metropolis acceptance for flipping one spin, target exp(beta*n*energy)."""
    s = np.asarray(spins, dtype=np.float64)
    e0 = energy(tensor, s)
    s2 = s.copy()
    s2[flip] = -s2[flip]
    e1 = energy(tensor, s2)
    return float(min(1.0, np.exp(beta * tensor.n * (e1 - e0))))


def metropolis_chain(
    tensor: GaussianTensor,
    beta: Union[float, Sequence[float]],
    sweeps: int,
    rng: RngStream,
    init: Optional[np.ndarray] = None,
) -> ChainResult:
    """Single-spin-flip Metropolis targeting the Gibbs weight exp(beta*n*energy).

    beta may be a scalar or a per-sweep schedule (annealing). One sweep is n
    proposed flips at uniformly random sites. The energy scale is intensive,
    hence the extensive beta*n in the exponent.
    """
    n, p = tensor.n, tensor.p
    if sweeps < 1:
        raise ParameterError("sweeps must be >= 1")
    betas = np.full(sweeps, float(beta)) if np.ndim(beta) == 0 else np.asarray(beta, dtype=float)
    if betas.shape != (sweeps,):
        raise ParameterError(f"schedule length {betas.shape} != sweeps {sweeps}")
    if np.any(betas < 0):
        raise ParameterError("beta must be >= 0")

    gen = rng.child("chain").generator()
    if init is None:
        s = (1 - 2 * gen.integers(0, 2, size=n)).astype(np.float64)
    else:
        s = np.asarray(init, dtype=np.float64).copy()
        if s.shape != (n,) or np.any(np.abs(s) != 1):
            raise ParameterError("init must be a +-1 vector of length n")

    scale = _scale(n, p)
    if p == 2:
        a = tensor.as_matrix()
        field = a @ s
        e_raw = 0.5 * float(s @ field)
    else:
        start, entry, others = _incidence(n, p)
        idx = _index_matrix(n, p)
        e_raw = float(tensor.entries @ np.prod(s[idx], axis=1))

    best_raw = e_raw
    best = s.copy()
    energies = np.empty(sweeps)
    accepted = 0
    sites = gen.integers(0, n, size=sweeps * n)
    coins = gen.random(size=sweeps * n)
    t = 0
    for sw in range(sweeps):
        b_ext = betas[sw] * n * scale
        for _ in range(n):
            i = sites[t]
            if p == 2:
                delta_raw = -2.0 * s[i] * field[i]
            else:
                lo, hi = start[i], start[i + 1]
                pr = tensor.entries[entry[lo:hi]].copy()
                oth = others[lo * (p - 1) : hi * (p - 1)].reshape(-1, p - 1)
                delta_raw = -2.0 * s[i] * float(pr @ np.prod(s[oth], axis=1))
            if delta_raw >= 0 or coins[t] < np.exp(b_ext * delta_raw):
                if p == 2:
                    field += (-2.0 * s[i]) * a[:, i]
                s[i] = -s[i]
                e_raw += delta_raw
                accepted += 1
                if e_raw > best_raw:
                    best_raw = e_raw
                    best = s.copy()
            t += 1
        energies[sw] = e_raw * scale
    return ChainResult(
        best_spins=best.astype(np.int8),
        best_energy=best_raw * scale,
        energies=energies,
        acceptance_rate=accepted / (sweeps * n),
        final_spins=s.astype(np.int8),
    )


def anneal_schedule(beta_min: float = 0.2, beta_max: float = 12.0, sweeps: int = 80) -> np.ndarray:
    """Geometric annealing schedule used by the ground-state search tests."""
    return np.geomspace(beta_min, beta_max, sweeps)


# -- guided walk -------------------------------------------------------------------

@dataclass
class WalkResult:
    """Trajectory summary of the orthogonal-step energy ascent."""

    spins: np.ndarray
    energy: float
    energies: np.ndarray           # multilinear energy after each step
    frozen_counts: np.ndarray
    ortho_max: float               # max |<u_t, u_{t-1}>| over consecutive steps
    stalls: int
    completed: bool
    directions: Optional[list] = None

    def trace_csv(self) -> str:
        lines = ["step,energy,frozen_count"]
        lines += [
            f"{i},{e:.12g},{f}" for i, (e, f) in enumerate(zip(self.energies, self.frozen_counts))
        ]
        return "\n".join(lines) + "\n"


def guided_walk(
    tensor: GaussianTensor,
    delta: float,
    rng: RngStream,
    max_steps: Optional[int] = None,
    record_directions: bool = False,
    orthogonalize: str = "previous",
) -> WalkResult:
    """Climb the multilinear energy from the cube center to a corner.

    Each step moves by (delta/sqrt(n)) * u where u is the unit vector along
    the gradient component orthogonal to the previous step direction (or to
    all previous directions with orthogonalize="history"), restricted to the
    still-free coordinates. Coordinates reaching +-1 are clamped and frozen.
    The recorded step directions carry the orthogonality contract; energy is
    kept nondecreasing by halving the step when a clamped move would lose
    ground.

    The gradient at the exact center is zero for every p, so the first
    direction always comes from the stall rule: a seeded random unit vector.
    A second stall aborts with the partial trajectory attached.

    With orthogonalize="history" the step directions form an orthonormal
    family, so the walk exhausts the free subspace after at most n steps and
    then aborts through the stall rule with whatever partial trajectory it
    built. The mode exists to compare against the default single-step
    orthogonality; it generally cannot reach a corner.

    Endgame: once a single free coordinate remains, no nonzero direction can
    be orthogonal to the previous step, so the walk finishes that coordinate
    by exact line maximization (clamp to the gradient sign), which keeps the
    energy trace monotone; this terminal clamp is not a recorded direction.
    """
    n = tensor.n
    if not (0 < delta < 1):
        raise ParameterError("delta must be in (0, 1)")
    if orthogonalize not in ("previous", "history"):
        raise ParameterError(f"unknown orthogonalize mode {orthogonalize!r}")
    if max_steps is None:
        max_steps = int(6 * n / delta)

    gen = rng.child("walk").generator()
    x = np.zeros(n)
    free = np.ones(n, dtype=bool)
    alpha0 = delta / np.sqrt(n)
    stall_tol = 1e-10 * np.sqrt(n)
    freeze_tol = 1e-12

    prev_u: Optional[np.ndarray] = None
    history: list[np.ndarray] = []
    energies = [energy(tensor, x)]
    frozen_counts = [0]
    directions: Optional[list] = [] if record_directions else None
    ortho_max = 0.0
    stalls = 0

    def _partial(completed: bool) -> WalkResult:
        spins = np.where(x >= 0, 1, -1).astype(np.int8)
        return WalkResult(
            spins=spins,
            energy=energy(tensor, spins),
            energies=np.array(energies),
            frozen_counts=np.array(frozen_counts),
            ortho_max=ortho_max,
            stalls=stalls,
            completed=completed,
            directions=directions,
        )

    def _random_free_unit() -> Optional[np.ndarray]:
        v = gen.standard_normal(n)
        v[~free] = 0.0
        v = _orthogonalized(v)
        nv = np.linalg.norm(v)
        return None if nv < 1e-30 else v / nv

    def _try_step(u: np.ndarray, e_old: float):
        """Largest halved step along u that keeps the energy nondecreasing."""
        alpha = alpha0
        for _ in range(40):
            x_new = np.clip(x + alpha * u, -1.0, 1.0)
            e_new = energy(tensor, x_new)
            if e_new >= e_old - 1e-15 and alpha * np.linalg.norm(u) > 1e-13:
                return x_new, e_new
            alpha *= 0.5
        return None, None

    def _orthogonalized(v: np.ndarray) -> np.ndarray:
        basis = history if orthogonalize == "history" else ([prev_u] if prev_u is not None else [])
        w = v.copy()
        for b in basis:
            bm = b.copy()
            bm[~free] = 0.0
            nb = np.linalg.norm(bm)
            if nb > 1e-30:
                bm /= nb
                w -= (w @ bm) * bm
        return w

    for _ in range(max_steps):
        nfree = int(free.sum())
        if nfree == 0:
            return _partial(True)
        if nfree == 1:
            # orthogonality to the previous step leaves no room in a
            # 1-dimensional free subspace: finish by line maximization
            i = int(np.flatnonzero(free)[0])
            gi = float(energy_gradient(tensor, x)[i])
            if gi != 0.0:
                x[i] = 1.0 if gi > 0 else -1.0
            else:
                x[i] = 1.0 if x[i] >= 0 else -1.0
            free[i] = False
            energies.append(energy(tensor, x))
            frozen_counts.append(n)
            return _partial(True)
        g = energy_gradient(tensor, x)
        g[~free] = 0.0
        g_orth = _orthogonalized(g)
        norm = np.linalg.norm(g_orth)

        u = x_new = e_new = None
        if norm >= stall_tol:
            u = g_orth / norm
            e_old = energies[-1]
            x_new, e_new = _try_step(u, e_old)
        if x_new is None:
            # stall: gradient direction gone or unable to keep energy monotone;
            # one re-randomization event is allowed, drawing until some free
            # direction admits a monotone step
            stalls += 1
            if stalls > 1:
                raise StalledWalkError("walk stalled twice", trajectory=_partial(False))
            e_old = energies[-1]
            for _ in range(64):
                u = _random_free_unit()
                if u is None:
                    raise StalledWalkError("no free directions left", trajectory=_partial(False))
                x_new, e_new = _try_step(u, e_old)
                if x_new is not None:
                    break
            if x_new is None:
                raise StalledWalkError("no monotone step exists", trajectory=_partial(False))

        if prev_u is not None:
            ortho_max = max(ortho_max, abs(float(u @ prev_u)))
        x = x_new
        newly = free & (np.abs(x) >= 1 - freeze_tol)
        if newly.any():
            x[newly] = np.sign(x[newly])
            free &= ~newly
        prev_u = u
        if orthogonalize == "history":
            history.append(u)
        if directions is not None:
            directions.append(u.copy())
        energies.append(e_new)
        frozen_counts.append(int(n - free.sum()))

    return _partial(not free.any())
