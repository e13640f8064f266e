"""Random instance types, seeded generators, and interpolation paths.

Three instance families share one discipline: an instance is a plain
dataclass over numpy payloads, generation is a pure function of an
RngStream, and every randomly generated object carries provenance
(seed + stream label) so it can be regenerated bit-for-bit.

Index conventions. Vertex pairs and order-p index tuples are stored in
colexicographic rank order: the pair (i, j) with i < j (0-based) lives at
rank C(j,2) + i, and the general increasing tuple (c_1, ..., c_p) at
sum_k C(c_k, k). This gives a stable bijection between flat array slots
and index tuples that does not depend on n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CapacityError, ParameterError
from .rng import RngStream

GraphInstance = "ErGraph"


# -- colex indexing ----------------------------------------------------------

def pair_index(i: int, j: int) -> int:
    """Colex rank of the unordered pair {i, j}, 0-based vertices."""
    if i == j:
        raise ParameterError("pair needs two distinct endpoints")
    if i > j:
        i, j = j, i
    return comb(j, 2) + i


def pair_unrank(r: int) -> tuple[int, int]:
    """Inverse of pair_index."""
    # largest j with C(j,2) <= r; solve j(j-1)/2 <= r then adjust
    j = int((1 + 8 * r) ** 0.5 + 1) // 2
    while comb(j, 2) > r:
        j -= 1
    while comb(j + 1, 2) <= r:
        j += 1
    return r - comb(j, 2), j


def tuple_rank(t: Sequence[int]) -> int:
    """Colex rank of a strictly increasing index tuple."""
    rank = 0
    prev = -1
    for k, c in enumerate(t):
        if c <= prev:
            raise ParameterError(f"tuple must be strictly increasing, got {tuple(t)}")
        prev = c
        rank += comb(c, k + 1)
    return rank


def tuple_unrank(r: int, p: int) -> tuple[int, ...]:
    """Inverse of tuple_rank for tuples of length p."""
    if r < 0 or p < 1:
        raise ParameterError("rank and length must be non-negative/positive")
    out = [0] * p
    for k in range(p, 0, -1):
        c = k - 1
        while comb(c + 1, k) <= r:
            c += 1
        out[k - 1] = c
        r -= comb(c, k)
    return tuple(out)


# -- provenance --------------------------------------------------------------

@dataclass(frozen=True)
class Provenance:
    """Where an instance came from: the stream that generated it."""

    seed: int
    label: str


# -- Erdos-Renyi graphs ------------------------------------------------------

@dataclass(eq=False)
class ErGraph:
    """Undirected graph on vertices 0..n-1 with edges in a packed pair bitset.

    Bit k of `bits` (little bit order within each byte) is the indicator of
    the pair with colex rank k.
    """

    n: int
    edge_prob: Fraction
    bits: np.ndarray
    mean_degree: Optional[float] = None
    provenance: Optional[Provenance] = None
    _rows: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"graph needs at least one vertex, got n={self.n}")
        if not (0 <= self.edge_prob <= 1):
            raise ParameterError(f"edge probability {self.edge_prob} outside [0,1]")
        npairs = comb(self.n, 2)
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.size != (npairs + 7) // 8:
            raise ParameterError(
                f"packed bitset has {self.bits.size} bytes, expected {(npairs + 7) // 8}"
            )
        if npairs % 8 and self.bits.size:
            tail = int(self.bits[-1]) >> (npairs % 8)
            if tail:
                raise ParameterError("trailing bits past the last pair must be zero")

    @property
    def num_pairs(self) -> int:
        return comb(self.n, 2)

    def has_edge(self, i: int, j: int) -> bool:
        k = pair_index(i, j)
        return bool((self.bits[k >> 3] >> (k & 7)) & 1)

    def edge_count(self) -> int:
        return int(np.bitwise_count(self.bits).sum())

    def edge_list(self) -> list[tuple[int, int]]:
        flat = np.unpackbits(self.bits, bitorder="little")[: self.num_pairs]
        ranks = np.nonzero(flat)[0]
        if ranks.size == 0:
            return []
        # vectorized pair_unrank: j = largest with C(j,2) <= rank
        j = ((1 + np.sqrt(1 + 8 * ranks.astype(np.float64))) / 2).astype(np.int64)
        j -= (j * (j - 1)) // 2 > ranks
        i = ranks - (j * (j - 1)) // 2
        return list(zip(i.tolist(), j.tolist()))

    def dense_adjacency(self) -> np.ndarray:
        """Symmetric boolean adjacency matrix (fresh copy each call)."""
        flat = np.unpackbits(self.bits, bitorder="little")[: self.num_pairs]
        a = np.zeros((self.n, self.n), dtype=bool)
        if self.n > 1:
            iu, ju = np.triu_indices(self.n, k=1)
            a[iu, ju] = flat[ju * (ju - 1) // 2 + iu]
            a |= a.T
        return a

    def adjacency_rows(self) -> list[int]:
        """Row bitmasks: bit j of row i set iff {i,j} is an edge. Cached."""
        if self._rows is None:
            dense = self.dense_adjacency()
            packed = np.packbits(dense, axis=1, bitorder="little")
            self._rows = [
                int.from_bytes(packed[i].tobytes(), "little") for i in range(self.n)
            ]
        return self._rows

    def degrees(self) -> np.ndarray:
        rows = self.adjacency_rows()
        return np.array([r.bit_count() for r in rows], dtype=np.int64)

    def complement(self) -> "ErGraph":
        flat = np.unpackbits(self.bits, bitorder="little")[: self.num_pairs]
        return ErGraph(
            n=self.n,
            edge_prob=1 - self.edge_prob,
            bits=_pack_pair_bits(1 - flat, self.n),
            provenance=self.provenance,
        )


def _pack_pair_bits(flat: np.ndarray, n: int) -> np.ndarray:
    npairs = comb(n, 2)
    if npairs == 0:
        return np.zeros(0, dtype=np.uint8)
    return np.packbits(flat.astype(np.uint8), bitorder="little")


def _bernoulli_bits(gen: np.random.Generator, prob: Fraction, size: int) -> np.ndarray:
    """Exact Bernoulli(prob) indicators via integer thresholding."""
    num, den = prob.numerator, prob.denominator
    if den == 1:
        return np.full(size, bool(num), dtype=np.uint8)
    return (gen.integers(0, den, size=size) < num).astype(np.uint8)


def gen_er_graph(
    n: int,
    edge_prob: Union[Fraction, float, int, str, None] = None,
    rng: Optional[RngStream] = None,
    mean_degree: Optional[float] = None,
) -> ErGraph:
    """Sample G(n, p). Give either edge_prob or mean_degree (p = d/n).

    Each pair is an independent Bernoulli(p); p is kept as an exact rational
    so that p = 0, 1/2, 1 have exact marginals.
    """
    if rng is None:
        raise ParameterError("gen_er_graph requires an RngStream")
    if (edge_prob is None) == (mean_degree is None):
        raise ParameterError("give exactly one of edge_prob and mean_degree")
    if edge_prob is None:
        prob = Fraction(float(mean_degree)) / n
    else:
        prob = Fraction(edge_prob)
    if not (0 <= prob <= 1):
        raise ParameterError(f"edge probability {prob} outside [0,1]")
    flat = _bernoulli_bits(rng.child("edges").generator(), prob, comb(n, 2))
    return ErGraph(
        n=n,
        edge_prob=prob,
        bits=_pack_pair_bits(flat, n),
        mean_degree=float(mean_degree) if mean_degree is not None else None,
        provenance=Provenance(rng.seed, rng.label),
    )


# -- Gaussian interaction tensors --------------------------------------------

@dataclass(eq=False)
class GaussianTensor:
    """Order-p symmetric Gaussian couplings over increasing index tuples.

    entries[r] is the coupling of the tuple with colex rank r; there are
    C(n,p) of them, i.i.d. standard normal when generated.
    """

    n: int
    p: int
    entries: np.ndarray
    provenance: Optional[Provenance] = None
    _matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.p < 2:
            raise ParameterError(f"interaction order must be >= 2, got p={self.p}")
        if self.n < self.p:
            raise ParameterError(f"need n >= p, got n={self.n}, p={self.p}")
        self.entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        want = comb(self.n, self.p)
        if self.entries.shape != (want,):
            raise ParameterError(f"expected {want} entries, got shape {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ParameterError("tensor entries must be finite")

    def as_matrix(self) -> np.ndarray:
        """For p=2: the symmetric coupling matrix with zero diagonal. Cached."""
        if self.p != 2:
            raise ParameterError("as_matrix is only defined for p=2")
        if self._matrix is None:
            a = np.zeros((self.n, self.n))
            iu = np.triu_indices(self.n, k=1)
            # triu_indices enumerates row-major; map each (i,j) to its colex slot
            ranks = np.array([pair_index(int(i), int(j)) for i, j in zip(*iu)])
            a[iu] = self.entries[ranks]
            a = a + a.T
            self._matrix = a
        return self._matrix


def gen_tensor(n: int, p: int, rng: RngStream) -> GaussianTensor:
    """Sample the i.i.d. N(0,1) coupling tensor for the order-p model."""
    entries = rng.child("entries").generator().standard_normal(comb(n, p))
    return GaussianTensor(n=n, p=p, entries=entries, provenance=Provenance(rng.seed, rng.label))


# -- K-SAT formulas ----------------------------------------------------------

@dataclass(eq=False)
class KSatFormula:
    """CNF with m clauses of exactly k distinct variables each.

    clauses[j] holds signed DIMACS-style literals (variable indices 1..n,
    negative for negated), sorted by variable within each clause.
    """

    n: int
    k: int
    clauses: np.ndarray
    provenance: Optional[Provenance] = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"formula needs n >= 1 variables, got {self.n}")
        if self.k < 1:
            raise ParameterError(f"clause width must be >= 1, got {self.k}")
        if self.k > self.n:
            raise ParameterError(f"clause width {self.k} exceeds variable count {self.n}")
        self.clauses = np.ascontiguousarray(self.clauses, dtype=np.int32).reshape(-1, self.k)
        v = np.abs(self.clauses)
        if self.clauses.size:
            if v.min() < 1 or v.max() > self.n:
                raise ParameterError("literal variable index outside 1..n")
            if np.any(np.diff(np.sort(v, axis=1), axis=1) == 0):
                raise ParameterError("clause contains a repeated variable")

    @property
    def m(self) -> int:
        return self.clauses.shape[0]

    @property
    def density(self) -> float:
        return self.m / self.n


def _sample_clause(gen: np.random.Generator, n: int, k: int) -> np.ndarray:
    vars_ = np.sort(gen.choice(n, size=k, replace=False)) + 1
    signs = 1 - 2 * gen.integers(0, 2, size=k)
    return (vars_ * signs).astype(np.int32)


def gen_ksat(n: int, m: int, k: int, rng: RngStream) -> KSatFormula:
    """Sample m clauses: uniform k-subset of variables, fair negation coins.

    Clause j is drawn from the sub-stream `clause/<j>`, so a single clause
    can be redrawn later without touching the others.
    """
    if m < 0:
        raise ParameterError(f"clause count must be >= 0, got {m}")
    clauses = np.empty((m, k), dtype=np.int32)
    for j in range(m):
        clauses[j] = _sample_clause(rng.child(f"clause/{j}").generator(), n, k)
    return KSatFormula(n=n, k=k, clauses=clauses, provenance=Provenance(rng.seed, rng.label))


# -- vertex subsets and spin configurations ----------------------------------

@dataclass(frozen=True)
class VertexSubset:
    """A set of vertices tagged with the structure it claims to be."""

    vertices: tuple[int, ...]
    kind: str  # "clique" or "independent_set"

    def __post_init__(self):
        if self.kind not in ("clique", "independent_set"):
            raise ParameterError(f"unknown subset kind {self.kind!r}")
        vs = tuple(sorted(set(int(v) for v in self.vertices)))
        if len(vs) != len(self.vertices):
            raise ParameterError("subset vertices must be distinct")
        object.__setattr__(self, "vertices", vs)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def is_valid(self, graph: ErGraph) -> bool:
        """Check the claimed structure against the graph."""
        if self.vertices and not (0 <= self.vertices[0] and self.vertices[-1] < graph.n):
            return False
        rows = graph.adjacency_rows()
        mask = 0
        for v in self.vertices:
            mask |= 1 << v
        for v in self.vertices:
            others = mask & ~(1 << v)
            adj = rows[v] & others
            if self.kind == "clique" and adj != others:
                return False
            if self.kind == "independent_set" and adj != 0:
                return False
        return True


def as_spins(x, n: Optional[int] = None) -> np.ndarray:
    """Validate and return a +-1 spin vector as int8."""
    s = np.asarray(x)
    if s.ndim != 1 or (n is not None and s.size != n):
        raise ParameterError(f"spin vector has shape {s.shape}, expected ({n},)")
    out = s.astype(np.int8)
    if not np.all(np.abs(out) == 1) or not np.all(out == s):
        raise ParameterError("spins must be exactly +-1")
    return out


def spins_from_mask(mask: int, n: int) -> np.ndarray:
    """Bit i of mask set -> spin i is -1 (bit 0 is spin 0)."""
    bits = (mask >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def mask_from_spins(s: np.ndarray) -> int:
    mask = 0
    for i, v in enumerate(s):
        if v < 0:
            mask |= 1 << i
    return mask


# -- interpolation paths -----------------------------------------------------

_UNIT_CAP = 2_000_000


@dataclass(eq=False)
class InterpolationPath:
    """A between-instances path that resamples one unit at a time.

    The unit is a vertex pair (graphs), a tensor entry, or a whole clause
    (K-SAT). Step t resamples the first t units of `unit_order`, each from
    its own sub-stream keyed by the unit's index, so the value a unit gets
    does not depend on t and the endpoint t = total_units is a fully
    independent instance.
    """

    base: Union[ErGraph, GaussianTensor, KSatFormula]
    stream: RngStream
    unit_order: np.ndarray

    def __post_init__(self):
        self.unit_order = np.ascontiguousarray(self.unit_order, dtype=np.int64)
        t = _total_units(self.base)
        if self.unit_order.shape != (t,) or sorted(self.unit_order.tolist()) != list(range(t)):
            raise ParameterError("unit_order must be a permutation of all units")

    @property
    def total_units(self) -> int:
        return self.unit_order.size

    def step_seed_label(self, unit: int) -> str:
        return self.stream.child(f"unit/{unit}").label

    def instance_at(self, t: int):
        return instance_at(self, t)


def _total_units(base) -> int:
    if isinstance(base, ErGraph):
        return base.num_pairs
    if isinstance(base, GaussianTensor):
        return base.entries.size
    if isinstance(base, KSatFormula):
        return base.m
    raise ParameterError(f"no interpolation units defined for {type(base).__name__}")


def make_interpolation_path(base, rng: RngStream) -> InterpolationPath:
    """Pick a uniform unit order for the path from base to a fresh instance."""
    t = _total_units(base)
    if t > _UNIT_CAP:
        raise CapacityError(f"{t} interpolation units exceeds cap {_UNIT_CAP}")
    order = rng.child("order").generator().permutation(t)
    return InterpolationPath(base=base, stream=rng, unit_order=order)


def instance_at(path: InterpolationPath, t: int):
    """Instance after resampling units unit_order[:t]. t=0 is the base, bit for bit."""
    total = path.total_units
    if not (0 <= t <= total):
        raise ParameterError(f"path position {t} outside [0, {total}]")
    base = path.base
    prov = Provenance(path.stream.seed, f"{path.stream.label}/at/{t}" if path.stream.label else f"at/{t}")
    if isinstance(base, ErGraph):
        flat = np.unpackbits(base.bits, bitorder="little")[: base.num_pairs].copy()
        for u in path.unit_order[:t]:
            gen = path.stream.child(f"unit/{int(u)}").generator()
            flat[u] = _bernoulli_bits(gen, base.edge_prob, 1)[0]
        return ErGraph(
            n=base.n,
            edge_prob=base.edge_prob,
            bits=_pack_pair_bits(flat, base.n),
            mean_degree=base.mean_degree,
            provenance=prov,
        )
    if isinstance(base, GaussianTensor):
        entries = base.entries.copy()
        for u in path.unit_order[:t]:
            entries[u] = path.stream.child(f"unit/{int(u)}").generator().standard_normal()
        return GaussianTensor(n=base.n, p=base.p, entries=entries, provenance=prov)
    if isinstance(base, KSatFormula):
        clauses = base.clauses.copy()
        for u in path.unit_order[:t]:
            gen = path.stream.child(f"unit/{int(u)}").generator()
            clauses[u] = _sample_clause(gen, base.n, base.k)
        return KSatFormula(n=base.n, k=base.k, clauses=clauses, provenance=prov)
    raise ParameterError(f"cannot interpolate {type(base).__name__}")
