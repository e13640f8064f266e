"""Clique and independent-set optimization on random graphs.

Three layers: a single-pass greedy scan (the classical linear heuristic,
which on G(n, 1/2) reaches about half the optimal clique size), an exact
branch-and-bound with greedy-coloring upper bounds for small graphs, and
first-moment curves that locate where the expected count of size-x cliques
crosses one.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, lgamma, log, log2
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CapacityError, ParameterError, RandoptError
from .instances import ErGraph, VertexSubset
from .rng import RngStream

EXACT_SIZE_CAP = 80


def _checked(graph: ErGraph, vertices, kind: str) -> VertexSubset:
    sub = VertexSubset(tuple(int(v) for v in vertices), kind)
    if not sub.is_valid(graph):
        raise RandoptError(f"internal error: produced an invalid {kind}")
    return sub


# -- greedy scan ---------------------------------------------------------------

def karp_greedy(
    graph: ErGraph,
    kind: str = "clique",
    rng: Optional[RngStream] = None,
    order: Union[None, str, Sequence[int]] = None,
) -> VertexSubset:
    """Single left-to-right scan: keep a vertex iff it stays a valid clique/IS.

    The scan order is a seeded uniform permutation by default; pass
    order="index" for the fixed order 0..n-1, or an explicit sequence.
    """
    if order is None:
        if rng is None:
            raise ParameterError("karp_greedy needs an rng unless an order is given")
        scan = rng.child("scan").generator().permutation(graph.n)
    elif isinstance(order, str):
        if order != "index":
            raise ParameterError(f"unknown order spec {order!r}")
        scan = range(graph.n)
    else:
        scan = [int(v) for v in order]
        if sorted(scan) != list(range(graph.n)):
            raise ParameterError("explicit order must be a permutation of all vertices")

    rows = graph.adjacency_rows()
    chosen_mask = 0
    chosen = []
    want_clique = kind == "clique"
    if kind not in ("clique", "independent_set"):
        raise ParameterError(f"unknown subset kind {kind!r}")
    for v in scan:
        v = int(v)
        hit = rows[v] & chosen_mask
        if (hit == chosen_mask) if want_clique else (hit == 0):
            chosen.append(v)
            chosen_mask |= 1 << v
    return _checked(graph, chosen, kind)


# -- exact branch and bound -----------------------------------------------------

def exact_optimum(graph: ErGraph, kind: str = "clique", size_cap: int = EXACT_SIZE_CAP) -> VertexSubset:
    """Maximum clique / independent set by branch and bound.

    Candidates are greedily colored at every node; a branch is cut when the
    current clique plus the color bound cannot beat the incumbent. Runtime is
    exponential in the worst case, so graphs above size_cap are refused.
    Deterministic for a given graph.
    """
    if graph.n > size_cap:
        raise CapacityError(f"exact optimum capped at n={size_cap}, got n={graph.n} (raise size_cap to override)")
    if kind == "independent_set":
        sub = exact_optimum(graph.complement(), "clique", size_cap)
        return _checked(graph, sub.vertices, kind)
    if kind != "clique":
        raise ParameterError(f"unknown subset kind {kind!r}")

    n = graph.n
    rows = graph.adjacency_rows()
    best: list = [0, ()]  # size, vertex tuple

    full = (1 << n) - 1

    def color_order(cand: int) -> tuple[list[int], list[int]]:
        # greedy coloring; vertices come out grouped by color class,
        # each vertex tagged with its color number = clique-size bound
        order: list[int] = []
        bounds: list[int] = []
        color = 0
        left = cand
        while left:
            color += 1
            avail = left
            while avail:
                v = (avail & -avail).bit_length() - 1
                order.append(v)
                bounds.append(color)
                left &= ~(1 << v)
                avail &= ~(1 << v)
                avail &= ~rows[v]
        return order, bounds

    def expand(cur: tuple, cand: int):
        order, bounds = color_order(cand)
        allowed = cand
        for i in range(len(order) - 1, -1, -1):
            if len(cur) + bounds[i] <= best[0]:
                return  # bounds only shrink leftward: the whole node is cut
            v = order[i]
            bit = 1 << v
            nxt = allowed & rows[v]
            new = cur + (v,)
            if not nxt:
                if len(new) > best[0]:
                    best[0] = len(new)
                    best[1] = tuple(sorted(new))
            else:
                expand(new, nxt)
            allowed &= ~bit

    if n:
        expand((), full)
    return _checked(graph, best[1], "clique")


# -- first-moment curves ---------------------------------------------------------

@dataclass(frozen=True)
class MomentCurve:
    """Sampled log2 of the expected count of solutions at each size/density."""

    model: str
    params: dict
    points: np.ndarray        # rows (x, log2 expected count)
    crossing: float           # largest x with nonnegative log-count

    def as_csv(self) -> str:
        name = "x" if self.model == "clique" else "density"
        lines = [f"{name},log2_expected_count"]
        lines += [f"{x:.10g},{y:.10g}" for x, y in self.points]
        return "\n".join(lines) + "\n"


def _log2_binom(n: int, x: int) -> float:
    return (lgamma(n + 1) - lgamma(x + 1) - lgamma(n - x + 1)) / log(2)


def clique_count_log2(n: int, x: int, edge_prob: Fraction) -> float:
    """log2 E[number of x-cliques] in G(n, p): log2 C(n,x) + C(x,2) log2 p."""
    if not (0 <= x <= n):
        raise ParameterError(f"clique size {x} outside 0..{n}")
    if x <= 1:
        return _log2_binom(n, x)
    p = float(edge_prob)
    if p == 0.0:
        return float("-inf")
    return _log2_binom(n, x) + comb(x, 2) * log2(p)


def clique_moment_curve(n: int, edge_prob: Union[Fraction, float, str] = Fraction(1, 2)) -> MomentCurve:
    """First-moment curve for cliques in G(n, p) and its crossing point.

    The crossing is the largest integer x with E[count] >= 1; above it the
    expected count is below one and size-x cliques are unlikely to exist.
    """
    prob = Fraction(edge_prob)
    if not (0 < prob <= 1):
        raise ParameterError("edge probability must be in (0, 1] for a moment curve")
    if n < 1:
        raise ParameterError("need n >= 1")

    def f(x: int) -> float:
        return clique_count_log2(n, x, prob)

    # f is concave in x with f(1) = log2 n >= 0: double out, then bisect
    hi = 1
    while hi < n and f(hi) >= 0:
        hi = min(n, hi * 2)
    if f(hi) >= 0:
        crossing = hi
    else:
        lo = max(1, hi // 2)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if f(mid) >= 0:
                lo = mid
            else:
                hi = mid
        crossing = lo

    x_hi = min(n, max(2 * crossing + 10, 40))
    xs = np.arange(1, x_hi + 1)
    pts = np.array([[x, f(int(x))] for x in xs], dtype=float)
    return MomentCurve(
        model="clique",
        params={"n": n, "edge_prob": f"{prob.numerator}/{prob.denominator}"},
        points=pts,
        crossing=float(crossing),
    )
