"""Zero-temperature Parisi PDE solver and functional minimization.

The PDE is
    d/dt Psi + (xi''(t)/2) * (d2/dx2 Psi + mu(t) * (d/dx Psi)^2) = 0
on t in [0,1], x in R, with boundary condition Psi(1,x) = |x|, where mu is a
nonnegative piecewise-constant order parameter. The functional is

    P(mu) = Psi_mu(0,0) - (1/2) * integral_0^1 t * xi''(t) * mu(t) dt

whose infimum over nondecreasing mu (class U) gives the limiting ground-state
constant of the matching mean-field Hamiltonian; class L drops monotonicity
and bounds total variation instead.

Solved backward in time interval by interval. On an interval where mu = m is
constant the Cole-Hopf substitution u = exp(m*Psi) makes the PDE linear heat
flow in the variance variable v = xi'(t), so

    Psi(t_{j-1}, x) = (1/m) * log E[exp(m * Psi(t_j, x + sqrt(dv_j) Z))],
    dv_j = xi'(t_j) - xi'(t_{j-1}),

with plain Gaussian smoothing when m = 0. This per-interval recursion is
exact in time; the only discretization is the x-grid, the spline
interpolation, and the Gauss-Hermite quadrature of the expectation. The final
interval (boundary data |x|) has a closed form and needs no grid at all.
A crude explicit finite-difference march of the nonlinear PDE is kept as an
independent cross-check oracle at coarse tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, factorial, sqrt
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize as _nm_minimize
from scipy.special import log_ndtr, logsumexp, ndtr

from .errors import GridError, ParameterError
from .rng import RngStream

# below this the Cole-Hopf exponent is indistinguishable from m = 0 in
# float64 and the plain-smoothing branch is both exact and stable
M_EPS = 1e-8

_SQRT_2PI = sqrt(2.0 * np.pi)


# -- mixture ---------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureSpec:
    """Covariance function xi(s) = sum_q c_q s^q of the mean-field model.

    The single-term defaults cover the two conventions in circulation for a
    pure p-interaction: xi(s) = s^p / p! matches the Hamiltonian summed over
    increasing index tuples with unit-variance couplings (the convention the
    spin module's brute-force experiments realize), while xi(s) = s^p is the
    common normalization in closed-form constants like Psi(0,0) = sqrt(2p/pi).
    """

    p: int
    xi_coefficients: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.p < 2:
            raise ParameterError(f"interaction order must be >= 2, got p={self.p}")
        coeffs = self.xi_coefficients
        if not coeffs:
            coeffs = ((self.p, 1.0 / factorial(self.p)),)
        norm = []
        seen = set()
        for order, c in coeffs:
            order = int(order)
            c = float(c)
            if order < 1:
                raise ParameterError(f"mixture orders must be >= 1, got {order}")
            if order in seen:
                raise ParameterError(f"duplicate mixture order {order}")
            if c <= 0 or not np.isfinite(c):
                raise ParameterError(f"mixture coefficients must be positive, got {c}")
            seen.add(order)
            norm.append((order, c))
        object.__setattr__(self, "xi_coefficients", tuple(sorted(norm)))

    @classmethod
    def normalized(cls, p: int) -> "MixtureSpec":
        """xi(s) = s^p / p!  (default convention)."""
        return cls(p)

    @classmethod
    def pure(cls, p: int) -> "MixtureSpec":
        """xi(s) = s^p."""
        return cls(p, ((p, 1.0),))

    def xi(self, s):
        return sum(c * np.asarray(s, dtype=float) ** q for q, c in self.xi_coefficients)

    def xi_prime(self, s):
        return sum(c * q * np.asarray(s, dtype=float) ** (q - 1) for q, c in self.xi_coefficients)

    def xi_second(self, s):
        s = np.asarray(s, dtype=float)
        total = np.zeros_like(s)
        for q, c in self.xi_coefficients:
            if q >= 2:
                total = total + c * q * (q - 1) * s ** (q - 2)
        return total if total.ndim else float(total)

    def penalty_primitive(self, t: float, form: str = "t_weighted") -> float:
        """Antiderivative at t of the penalty integrand.

        "t_weighted": (1/2) * s * xi''(s)  ->  sum c (q-1)/2 * t^q
        "unweighted": (1/2) * xi''(s)      ->  sum c q/2 * t^(q-1)
        """
        if form == "t_weighted":
            return sum(c * (q - 1) / 2.0 * t**q for q, c in self.xi_coefficients)
        if form == "unweighted":
            return sum(c * q / 2.0 * t ** (q - 1) for q, c in self.xi_coefficients if q >= 2)
        raise ParameterError(f"unknown penalty form {form!r}")


# -- order parameter ----------------------------------------------------------------


@dataclass(frozen=True)
class OrderParam:
    """Piecewise-constant nonnegative function mu on [0,1].

    values[j] is the value on (breakpoints[j], breakpoints[j+1]]; breakpoints
    run from 0 to 1. Class "U" requires nondecreasing values; class "L" drops
    monotonicity but bounds the total variation by tv_budget.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    class_tag: str = "U"
    tv_budget: float = 100.0

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) < 2 or len(vals) != len(bp) - 1:
            raise ParameterError(
                f"{len(bp)} breakpoints need {max(len(bp) - 1, 1)} values, got {len(vals)}"
            )
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ParameterError("breakpoints must start at 0 and end at 1")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ParameterError("breakpoints must be strictly increasing")
        if any(v < 0 or not np.isfinite(v) for v in vals):
            raise ParameterError("values must be finite and nonnegative")
        if self.class_tag == "U":
            if any(v2 < v1 for v1, v2 in zip(vals, vals[1:])):
                raise ParameterError("class U requires nondecreasing values")
        elif self.class_tag == "L":
            if self.total_variation() > self.tv_budget + 1e-12:
                raise ParameterError(
                    f"total variation {self.total_variation():.6g} exceeds budget {self.tv_budget}"
                )
        else:
            raise ParameterError(f"class tag must be 'U' or 'L', got {self.class_tag!r}")

    @classmethod
    def constant(cls, m: float, class_tag: str = "U", **kw) -> "OrderParam":
        return cls((0.0, 1.0), (m,), class_tag, **kw)

    @classmethod
    def zero(cls, class_tag: str = "U", **kw) -> "OrderParam":
        return cls.constant(0.0, class_tag, **kw)

    @property
    def k(self) -> int:
        """Number of interior breakpoints (atom budget)."""
        return len(self.breakpoints) - 2

    def value_at(self, t: float) -> float:
        if not 0 <= t <= 1:
            raise ParameterError(f"t must be in [0,1], got {t}")
        if t == 0.0:
            return self.values[0]
        j = int(np.searchsorted(np.asarray(self.breakpoints), t, side="left")) - 1
        return self.values[j]

    def total_variation(self) -> float:
        return float(sum(abs(v2 - v1) for v1, v2 in zip(self.values, self.values[1:])))

    def effective_atoms(self) -> int:
        """Pieces after merging equal consecutive values."""
        n = 1
        for v1, v2 in zip(self.values, self.values[1:]):
            if v2 != v1:
                n += 1
        return n

    def to_json(self) -> str:
        return json.dumps(
            {
                "breakpoints": list(self.breakpoints),
                "values": list(self.values),
                "class_tag": self.class_tag,
                "tv_budget": self.tv_budget,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "OrderParam":
        d = json.loads(text)
        return cls(
            tuple(d["breakpoints"]), tuple(d["values"]), d["class_tag"], d.get("tv_budget", 100.0)
        )


# -- grid ------------------------------------------------------------------------


@dataclass(frozen=True)
class PdeGrid:
    """Uniform symmetric x-grid plus the Gauss-Hermite node count."""

    half_width: float
    spacing: float
    quad_points: int

    def __post_init__(self):
        if self.spacing <= 0 or not np.isfinite(self.spacing):
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if self.half_width < 4 * self.spacing:
            raise GridError("half width too small for the spacing")
        if self.quad_points < 8:
            raise GridError(f"need >= 8 quadrature points, got {self.quad_points}")
        if self.half_width / self.spacing > 200_000:
            raise GridError("grid too fine: over 200k nodes per side")

    @classmethod
    def for_mixture(
        cls, spec: MixtureSpec, spacing: float = 0.01, quad_points: int = 64, margin: float = 2.0
    ) -> "PdeGrid":
        """Half-width 6 standard deviations of the accumulated variance plus margin."""
        width = ceil(6.0 * sqrt(float(spec.xi_prime(1.0))) + margin)
        return cls(float(width), spacing, quad_points)

    def xs(self) -> np.ndarray:
        half = int(round(self.half_width / self.spacing))
        return np.arange(-half, half + 1) * self.spacing

    def refined(self) -> "PdeGrid":
        return PdeGrid(self.half_width, self.spacing / 2, self.quad_points * 2)

    def coarsened(self) -> "PdeGrid":
        return PdeGrid(self.half_width, self.spacing * 2, max(self.quad_points // 2, 16))


# -- PDE solve ----------------------------------------------------------------------


@lru_cache(maxsize=8)
def _hermgauss(q: int):
    return np.polynomial.hermite.hermgauss(q)


def _boundary_step(xs: np.ndarray, m: float, s: float) -> np.ndarray:
    """Exact Psi after one Cole-Hopf interval applied to boundary data |x|.

    m = 0:  E|x + sZ| = 2 s phi(x/s) + x (2 Phi(x/s) - 1)
    m > 0:  (1/m) log E exp(m|x + sZ|)
          = m s^2/2 + (1/m) log[ e^{mx} Phi(x/s + ms) + e^{-mx} Phi(-x/s + ms) ]
    """
    if s == 0.0:
        return np.abs(xs)
    a = xs / s
    if m < M_EPS:
        return 2 * s * np.exp(-0.5 * a * a) / _SQRT_2PI + xs * (2 * ndtr(a) - 1)
    return m * s * s / 2 + np.logaddexp(m * xs + log_ndtr(a + m * s), -m * xs + log_ndtr(-a + m * s)) / m


def _interior_step(
    xs: np.ndarray, psi: np.ndarray, m: float, dv: float, quad_points: int
) -> np.ndarray:
    """One Cole-Hopf interval on gridded data via quadrature and splines.

    Splits the interval so the log-integrand slope m*sqrt(dv_sub) stays small
    enough for the quadrature (Gaussian convolutions compose exactly, so the
    split costs accuracy nothing). Off-grid points use the slope +-1 linear
    extension, exact up to the Gaussian tail since Psi(t,x) - |x| flattens.
    """
    nsub = 1
    if m >= M_EPS:
        nsub = min(max(1, ceil(dv * (m / 4.0) ** 2)), 1000)
    sub = dv / nsub
    y, w = _hermgauss(quad_points)
    shift = sqrt(2.0 * sub) * y[:, None]
    logw = (np.log(w) - 0.5 * np.log(np.pi))[:, None]
    plainw = np.exp(logw)
    x0, x1 = xs[0], xs[-1]
    for _ in range(nsub):
        pts = xs[None, :] + shift
        vals = CubicSpline(xs, psi)(np.clip(pts, x0, x1))
        vals += np.maximum(pts - x1, 0.0) + np.maximum(x0 - pts, 0.0)
        if m < M_EPS:
            psi = (plainw * vals).sum(axis=0)
        else:
            psi = logsumexp(logw + m * vals, axis=0) / m
    return psi


def solve_parisi_pde(
    mu: OrderParam,
    spec: MixtureSpec,
    grid: Optional[PdeGrid] = None,
    profile: bool = False,
):
    """Psi_mu(0,0) by the backward interval recursion.

    With profile=True returns (psi00, xs, profiles) where profiles is the
    list of (t_j, Psi(t_j, xs)) from the boundary t=1 down to t=0.
    """
    if grid is None:
        grid = PdeGrid.for_mixture(spec)
    need = 6.0 * sqrt(float(spec.xi_prime(1.0)))
    if grid.half_width < need:
        raise GridError(
            f"half width {grid.half_width} below 6 accumulated stddevs ({need:.3f})"
        )
    xs = grid.xs()
    bp = np.asarray(mu.breakpoints)
    vprime = spec.xi_prime(bp)
    psi = np.abs(xs)
    profiles = [(1.0, psi.copy())]
    k = len(mu.values)
    for j in range(k, 0, -1):
        m = mu.values[j - 1]
        dv = float(vprime[j] - vprime[j - 1])
        if dv > 1e-15:
            if j == k:
                psi = _boundary_step(xs, m, sqrt(dv))
            else:
                psi = _interior_step(xs, psi, m, dv, grid.quad_points)
        if profile:
            profiles.append((float(bp[j - 1]), psi.copy()))
    psi00 = float(psi[xs.size // 2])
    if profile:
        return psi00, xs, profiles
    return psi00


def finite_difference_psi00(
    mu: OrderParam,
    spec: MixtureSpec,
    half_width: Optional[float] = None,
    spacing: float = 0.05,
    safety: float = 0.4,
) -> float:
    """Independent oracle: explicit finite-difference march of the nonlinear PDE.

    First-order in time, second-order centered in space, slope +-1 at the
    edges. Deliberately crude (coarse tolerance ~1e-2); exists only to
    cross-check the spectral interval recursion through different numerics.
    """
    if half_width is None:
        half_width = ceil(6.0 * sqrt(float(spec.xi_prime(1.0))) + 2.0)
    xs = np.arange(-int(round(half_width / spacing)), int(round(half_width / spacing)) + 1)
    xs = xs * spacing
    psi = np.abs(xs)
    dmax = max(float(spec.xi_second(1.0)), 1e-12) / 2.0
    dt = safety * spacing * spacing / dmax
    steps = max(int(ceil(1.0 / dt)), 1)
    dt = 1.0 / steps
    inv_h2 = 1.0 / (spacing * spacing)
    inv_2h = 1.0 / (2.0 * spacing)
    t = 1.0
    for _ in range(steps):
        diff = float(spec.xi_second(t)) / 2.0
        m = mu.value_at(t)
        lap = np.empty_like(psi)
        lap[1:-1] = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) * inv_h2
        lap[0] = lap[-1] = 0.0
        grad = np.empty_like(psi)
        grad[1:-1] = (psi[2:] - psi[:-2]) * inv_2h
        grad[0], grad[-1] = -1.0, 1.0
        psi = psi + dt * diff * (lap + m * grad * grad)
        t -= dt
    return float(psi[xs.size // 2])


# -- functional --------------------------------------------------------------------


def penalty_term(mu: OrderParam, spec: MixtureSpec, form: str = "t_weighted") -> float:
    """Closed-form penalty integral for piecewise-constant mu.

    t_weighted (default): (1/2) integral t xi''(t) mu(t) dt. This is the form
    under which the functional stays above the model's ground state (checked
    against small-n extrapolation); the unweighted variant
    (1/2) integral xi''(t) mu(t) dt is kept for comparison.
    """
    total = 0.0
    for j, m in enumerate(mu.values):
        a0 = spec.penalty_primitive(mu.breakpoints[j], form)
        a1 = spec.penalty_primitive(mu.breakpoints[j + 1], form)
        total += m * (a1 - a0)
    return total


@dataclass(frozen=True)
class FunctionalValue:
    """P(mu) evaluation with its pieces and a grid-error estimate."""

    psi00: float
    penalty: float
    value: float
    grid_error: float
    spacing: float
    quad_points: int
    half_width: float

    def as_json(self) -> str:
        return json.dumps(
            {
                "psi00": self.psi00,
                "penalty": self.penalty,
                "value": self.value,
                "grid_error": self.grid_error,
                "grid": {
                    "spacing": self.spacing,
                    "quad_points": self.quad_points,
                    "half_width": self.half_width,
                },
            }
        )


def parisi_functional(
    mu: OrderParam,
    spec: MixtureSpec,
    grid: Optional[PdeGrid] = None,
    penalty_form: str = "t_weighted",
    diagnostics: str = "coarse",
) -> FunctionalValue:
    """P(mu) = Psi_mu(0,0) - penalty, with a discretization-error estimate.

    diagnostics="coarse" estimates the grid error cheaply by re-solving on a
    grid twice as coarse; "halving" re-solves on a grid twice as fine (the
    convergence-test mode, ~10x the cost).
    """
    if grid is None:
        grid = PdeGrid.for_mixture(spec)
    psi00 = solve_parisi_pde(mu, spec, grid)
    if diagnostics == "coarse":
        other = solve_parisi_pde(mu, spec, grid.coarsened())
    elif diagnostics == "halving":
        other = solve_parisi_pde(mu, spec, grid.refined())
    else:
        raise ParameterError(f"unknown diagnostics mode {diagnostics!r}")
    pen = penalty_term(mu, spec, penalty_form)
    return FunctionalValue(
        psi00=psi00,
        penalty=pen,
        value=psi00 - pen,
        grid_error=abs(psi00 - other),
        spacing=grid.spacing,
        quad_points=grid.quad_points,
        half_width=grid.half_width,
    )


def grid_refinement_delta(mu: OrderParam, spec: MixtureSpec, grid: PdeGrid) -> float:
    """|psi00(h/2, 2q) - psi00(h, q)|: the halving convergence check."""
    return abs(solve_parisi_pde(mu, spec, grid.refined()) - solve_parisi_pde(mu, spec, grid))


def convergence_table(
    mu: OrderParam, spec: MixtureSpec, grid: PdeGrid, levels: int = 3
) -> str:
    """CSV of psi00 under successive grid refinements: h,q,psi00."""
    lines = ["h,q,psi00"]
    g = grid
    for _ in range(levels):
        lines.append(f"{g.spacing:.10g},{g.quad_points},{solve_parisi_pde(mu, spec, g):.12g}")
        g = g.refined()
    return "\n".join(lines) + "\n"


# -- minimization ------------------------------------------------------------------


@dataclass
class MinimizeResult:
    """Best order parameter found, with the search record."""

    mu: OrderParam
    functional: FunctionalValue
    value: float
    search_value: float
    evaluations: list
    trace: list
    start_index: int
    warning: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "mu": json.loads(self.mu.to_json()),
                "functional": json.loads(self.functional.as_json()),
                "value": self.value,
                "search_value": self.search_value,
                "n_evaluations": len(self.evaluations),
                "trace": self.trace,
                "start_index": self.start_index,
                "warning": self.warning,
            }
        )


_MIN_GAP = 1e-3


def _project_params(
    theta: np.ndarray, k: int, class_tag: str, m_max: float, tv_budget: float
) -> OrderParam:
    """Map a raw parameter vector to a feasible OrderParam.

    Layout: theta[:k] interior breakpoints, theta[k:] the k+1 values.
    Breakpoints are sorted and pushed apart to a minimum gap; values are
    clipped to [0, m_max]; class U takes the running maximum, class L rescales
    its increments to fit the total-variation budget.
    """
    t = np.sort(np.clip(theta[:k], _MIN_GAP, 1.0 - _MIN_GAP))
    for i in range(1, k):
        if t[i] < t[i - 1] + _MIN_GAP:
            t[i] = t[i - 1] + _MIN_GAP
    t = np.clip(t, _MIN_GAP, 1.0 - _MIN_GAP)
    for i in range(k - 2, -1, -1):
        if t[i] > t[i + 1] - _MIN_GAP:
            t[i] = t[i + 1] - _MIN_GAP
    vals = np.clip(theta[k:], 0.0, m_max)
    if class_tag == "U":
        vals = np.maximum.accumulate(vals)
    else:
        for _ in range(2):
            jumps = np.diff(vals)
            tv = float(np.abs(jumps).sum())
            if tv > tv_budget:
                vals = np.concatenate([[vals[0]], vals[0] + np.cumsum(jumps * (tv_budget / tv))])
                vals = np.clip(vals, 0.0, m_max)
    bp = (0.0, *[float(v) for v in t], 1.0)
    return OrderParam(bp, tuple(float(v) for v in vals), class_tag, tv_budget=tv_budget)


def _starts(k: int, class_tag: str, n_starts: int, gen) -> list[np.ndarray]:
    """Deterministic seeded start list: zero, two ramps, then random."""
    uniform_t = np.linspace(0, 1, k + 2)[1:-1]
    starts = [
        np.concatenate([uniform_t, np.zeros(k + 1)]),
        np.concatenate([uniform_t, np.linspace(0.2, 2.0, k + 1)]),
        np.concatenate([uniform_t, np.linspace(0.5, 8.0, k + 1)]),
    ]
    while len(starts) < n_starts:
        t = np.sort(gen.uniform(0.05, 0.95, size=k))
        v = gen.uniform(0.0, 3.0, size=k + 1)
        if class_tag == "U":
            v = np.sort(v)
        starts.append(np.concatenate([t, v]))
    return starts[:n_starts]


def minimize_functional(
    spec: MixtureSpec,
    class_tag: str = "U",
    k: int = 3,
    grid: Optional[PdeGrid] = None,
    fine_grid: Optional[PdeGrid] = None,
    n_starts: int = 8,
    rng: Optional[RngStream] = None,
    m_max: float = 100.0,
    tv_budget: float = 100.0,
    penalty_form: str = "t_weighted",
    maxiter: int = 300,
    warm_start: Optional[OrderParam] = None,
) -> MinimizeResult:
    """Locally minimize P(mu) over k interior breakpoints in class U or L.

    Derivative-free Nelder-Mead from several seeded starts, each evaluation
    projected to the feasible class first. k = 0 means mu is a single constant
    piece and no search runs at all: the constant starts (the zero function,
    plus warm_start if given) are evaluated and the best is returned.

    The search runs on `grid` (default: the mixture default coarsened once);
    finalists are re-evaluated on `fine_grid` (default: the mixture default)
    and ranked by (value, effective atoms, start index). A warm_start is
    always a finalist, so with matched budgets a class-L run warm-started from
    a class-U winner can never end above it.
    """
    if k < 0:
        raise ParameterError(f"atom budget must be >= 0, got k={k}")
    if class_tag not in ("U", "L"):
        raise ParameterError(f"class tag must be 'U' or 'L', got {class_tag!r}")
    if rng is None:
        rng = RngStream(0, "parisi/minimize")
    if grid is None:
        grid = PdeGrid.for_mixture(spec, spacing=0.02, quad_points=64)
    if fine_grid is None:
        fine_grid = PdeGrid.for_mixture(spec, spacing=0.01, quad_points=64)

    evaluations: list[float] = []
    cache: dict[tuple, float] = {}

    def search_value(mu: OrderParam) -> float:
        key = (mu.breakpoints, mu.values)
        if key not in cache:
            val = solve_parisi_pde(mu, spec, grid) - penalty_term(mu, spec, penalty_form)
            cache[key] = val
            evaluations.append(val)
        return cache[key]

    trace: list[dict] = []
    # candidates: (search value, mu, start index, converged)
    candidates: list[tuple[float, OrderParam, int, bool]] = []

    if k == 0:
        consts = [OrderParam.zero(class_tag, tv_budget=tv_budget)]
        if warm_start is not None:
            consts.append(warm_start)
        for i, mu0 in enumerate(consts):
            val = search_value(mu0)
            candidates.append((val, mu0, i, True))
            trace.append({"start": i, "value": val, "nfev": 1, "converged": True})
    else:
        gen = rng.child("starts").generator()
        theta_starts = _starts(k, class_tag, n_starts, gen)
        if warm_start is not None and warm_start.k == k:
            bp = np.asarray(warm_start.breakpoints[1:-1])
            theta_starts.append(np.concatenate([bp, np.asarray(warm_start.values)]))

        def objective(theta: np.ndarray) -> float:
            return search_value(_project_params(theta, k, class_tag, m_max, tv_budget))

        for i, theta0 in enumerate(theta_starts):
            res = _nm_minimize(
                objective,
                theta0,
                method="Nelder-Mead",
                options={"maxiter": maxiter, "xatol": 1e-4, "fatol": 1e-7},
            )
            mu_i = _project_params(res.x, k, class_tag, m_max, tv_budget)
            val = search_value(mu_i)
            candidates.append((val, mu_i, i, bool(res.success)))
            trace.append(
                {"start": i, "value": val, "nfev": int(res.nfev), "converged": bool(res.success)}
            )

    if warm_start is not None and not any(mu == warm_start for _, mu, _, _ in candidates):
        candidates.append((search_value(warm_start), warm_start, len(candidates), True))

    # finalists: everything within 1e-4 of the best search value, re-ranked
    # on the fine grid by (value, effective atoms, start index)
    best_search = min(c[0] for c in candidates)
    finalists = [c for c in candidates if c[0] <= best_search + 1e-4]
    ranked = []
    for val, mu_c, i, conv in finalists:
        fine = parisi_functional(mu_c, spec, fine_grid, penalty_form)
        ranked.append((fine.value, mu_c.effective_atoms(), i, mu_c, fine, val, conv))
    ranked.sort(key=lambda r: (round(r[0] / 1e-6), r[1], r[2]))
    fval, _, idx, mu_best, fine_best, sval, converged = ranked[0]
    return MinimizeResult(
        mu=mu_best,
        functional=fine_best,
        value=fine_best.value,
        search_value=sval,
        evaluations=evaluations,
        trace=trace,
        start_index=idx,
        warning=not converged,
    )
