"""Finite metric graphs and decay functions.

A :class:`MetricGraph` is a finite truncation of the (possibly infinite)
vertex set on which the lattice system lives.  A :class:`DecayFunction`
bundles a non-increasing positive base function ``F``, the exponential
weight ``mu`` and the two summability constants::

    ||F|| = sup_x sum_y F(d(x, y))
    C     = sup_{x,y} sum_z F(d(x, z)) F(d(z, y)) / F(d(x, y))

Over an infinite lattice these constants can only be lower-bounded by
finite truncations, so every constant is carried together with a
provenance flag and, for power laws on Z^d, a rigorous analytic value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "MetricGraph",
    "DecayFunction",
    "SubsetFamily",
    "Constant",
    "chain",
    "centered_chain",
    "grid",
    "power_law",
    "f_norm_estimate",
    "c_constant_estimate",
    "c_constant_analytic",
    "f_norm_analytic",
    "f_mu",
    "enumerate_subsets",
    "graph_from_points",
    "MAX_GRAPH_VERTICES",
    "SUBSET_CAP",
]

MAX_GRAPH_VERTICES = 4096
SUBSET_CAP = 200_000

FINITE_TRUNCATION = "finite-truncation"
ANALYTIC_BOUND = "analytic-bound"


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Finite vertex set with a dense distance matrix.

    ``family_tag`` names the infinite lattice the graph truncates
    (``"chain-Z1"``, ``"grid-Z2"``) or ``"custom"``.  Analytic constants
    are only available for the lattice families.
    """

    vertices: tuple
    dist: np.ndarray
    family_tag: str = "custom"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vertices = tuple(self.vertices)
        dist = np.array(self.dist, dtype=float)
        n = len(vertices)
        if n == 0:
            raise ValueError("graph must have at least one vertex")
        if n > MAX_GRAPH_VERTICES:
            raise ValueError(f"graph has {n} vertices, cap is {MAX_GRAPH_VERTICES}")
        if len(set(vertices)) != n:
            raise ValueError("duplicate vertex identifiers")
        if dist.shape != (n, n):
            raise ValueError(f"distance matrix has shape {dist.shape}, expected {(n, n)}")
        if np.any(np.diag(dist) != 0):
            raise ValueError("d(x, x) must be 0")
        if not np.array_equal(dist, dist.T):
            raise ValueError("distance matrix must be symmetric")
        off = dist[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("d(x, y) must be positive for x != y")
        dist.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(vertices)})

    def __len__(self) -> int:
        return len(self.vertices)

    def index(self, vertex: Hashable) -> int:
        try:
            return self._index[vertex]
        except KeyError:
            raise KeyError(f"vertex {vertex!r} not in graph") from None

    def indices(self, vertices) -> list[int]:
        return [self.index(v) for v in vertices]

    def d(self, x: Hashable, y: Hashable) -> float:
        return float(self.dist[self.index(x), self.index(y)])

    def set_distance(self, xs, ys) -> float:
        """Distance between two vertex sets (min over pairs)."""
        ix, iy = self.indices(xs), self.indices(ys)
        return float(self.dist[np.ix_(ix, iy)].min())

    def diameter(self, vertices) -> float:
        idx = self.indices(vertices)
        if len(idx) < 2:
            return 0.0
        return float(self.dist[np.ix_(idx, idx)].max())

    def triangle_violation(self) -> float:
        """Largest violation of d(x,z) <= d(x,y) + d(y,z) over all triples."""
        d = self.dist
        # worst[x, z] = min_y d(x,y) + d(y,z)
        worst = np.min(d[:, :, None] + d[None, :, :], axis=1)
        return float(max(0.0, np.max(d - worst)))

    def subgraph(self, vertices) -> "MetricGraph":
        idx = self.indices(vertices)
        return MetricGraph(tuple(vertices), self.dist[np.ix_(idx, idx)], self.family_tag)

    @property
    def dimension(self) -> int | None:
        return {"chain-Z1": 1, "grid-Z2": 2}.get(self.family_tag)


def chain(n: int) -> MetricGraph:
    """Open chain with sites ``0..n-1``."""
    pos = np.arange(n)
    return MetricGraph(tuple(range(n)), np.abs(pos[:, None] - pos[None, :]), "chain-Z1")


def centered_chain(half_width: int) -> MetricGraph:
    """Chain on the integers ``-half_width..half_width``.

    Site labels are the integer coordinates so that nested intervals
    share vertex identifiers.
    """
    pos = np.arange(-half_width, half_width + 1)
    return MetricGraph(tuple(int(p) for p in pos), np.abs(pos[:, None] - pos[None, :]), "chain-Z1")


def grid(nx: int, ny: int, origin: tuple[int, int] = (0, 0)) -> MetricGraph:
    """Rectangular patch of Z^2 with the l1 (path) metric, row-major."""
    coords = [(origin[0] + i, origin[1] + j) for i in range(nx) for j in range(ny)]
    c = np.array(coords)
    dist = np.abs(c[:, None, :] - c[None, :, :]).sum(axis=-1)
    return MetricGraph(tuple(coords), dist, "grid-Z2")


# -- decay functions ---------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """A summability constant and where it came from."""

    value: float
    provenance: str  # FINITE_TRUNCATION or ANALYTIC_BOUND

    @property
    def rigorous(self) -> bool:
        return self.provenance == ANALYTIC_BOUND


@dataclass(frozen=True)
class DecayFunction:
    """Base function ``F`` with exponential weight ``mu``.

    ``kind="power"`` means ``F(r) = (1 + r)**(-alpha)``; ``kind="custom"``
    wraps an arbitrary callable, for which no analytic constants exist.
    """

    alpha: float = 2.0
    mu: float = 1.0
    kind: str = "power"
    base: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.kind == "power":
            if self.alpha < 0:
                raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        elif self.kind == "custom":
            if self.base is None:
                raise ValueError("custom decay function needs a base callable")
        else:
            raise ValueError(f"unknown decay kind {self.kind!r}")

    def F(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return (1.0 + r) ** (-self.alpha)
        return np.asarray(self.base(r), dtype=float)

    def F_mu(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("distance must be nonnegative")
        return np.exp(-self.mu * r) * self.F(r)

    def with_mu(self, mu: float) -> "DecayFunction":
        return DecayFunction(self.alpha, mu, self.kind, self.base)

    def weighted(self) -> "DecayFunction":
        """``F_mu`` as a custom base (for truncation estimates of C_mu)."""
        return DecayFunction(self.alpha, 0.0, "custom", base=self.F_mu)

    # constants ----------------------------------------------------------

    def f_norm(self, graph: MetricGraph) -> Constant:
        """Rigorous ||F|| for the graph's lattice family, else the truncation value."""
        if self.kind == "power" and graph.dimension is not None:
            return Constant(f_norm_analytic(self.alpha, graph.dimension), ANALYTIC_BOUND)
        return Constant(f_norm_estimate(self, graph), FINITE_TRUNCATION)

    def c_const(self, graph: MetricGraph) -> Constant:
        """Upper bound for C (and hence for C_mu <= C)."""
        if self.kind == "power" and graph.dimension is not None:
            fn = f_norm_analytic(self.alpha, graph.dimension)
            return Constant(c_constant_analytic(self.alpha, fn), ANALYTIC_BOUND)
        return Constant(c_constant_estimate(self.weighted(), graph), FINITE_TRUNCATION)

    def c_upper(self, f_norm: float) -> float:
        if self.kind != "power":
            raise ValueError("analytic C bound requires a power-law base")
        return c_constant_analytic(self.alpha, f_norm)


def power_law(alpha: float = 2.0, mu: float = 1.0) -> DecayFunction:
    return DecayFunction(alpha=alpha, mu=mu)


def _distance_weights(F: DecayFunction, G: MetricGraph) -> np.ndarray:
    return F.F(G.dist)


def f_norm_estimate(F: DecayFunction, G: MetricGraph) -> float:
    """``sup_x sum_y F(d(x, y))`` on the finite graph (a lower estimate of the lattice value)."""
    return float(_distance_weights(F, G).sum(axis=1).max())


def c_constant_estimate(F: DecayFunction, G: MetricGraph) -> float:
    """``sup_{x,y} sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y))`` on the finite graph."""
    W = _distance_weights(F, G)
    return float(np.max((W @ W) / W))


def c_constant_analytic(alpha: float, f_norm: float) -> float:
    """``2**alpha * f_norm``, an upper bound for C of ``(1+r)**-alpha`` on Z^d.

    Uses ``1 + d(x,y) <= (1 + d(x,z)) + (1 + d(z,y))`` and convexity of
    ``s -> s**alpha``, which needs ``alpha >= 1`` (always true when
    ``alpha`` exceeds the lattice dimension).
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return float(2.0**alpha * f_norm)


def f_norm_analytic(alpha: float, dimension: int) -> float:
    """Exact ``sum_{n in Z^d} (1 + |n|_1)**-alpha`` for d = 1, 2.

    The number of lattice points at l1-distance k >= 1 is 2 in one
    dimension and 4k in two, which turns the sums into zeta values.
    """
    if alpha <= dimension:
        raise ValueError(f"(1+r)^-alpha is not summable on Z^{dimension} for alpha={alpha}")
    if dimension == 1:
        return float(2.0 * special.zeta(alpha) - 1.0)
    if dimension == 2:
        return float(1.0 + 4.0 * (special.zeta(alpha - 1.0) - special.zeta(alpha)))
    raise ValueError(f"no closed form for dimension {dimension}")


def f_mu(F: DecayFunction, r: float) -> float:
    if r < 0:
        raise ValueError(f"distance must be nonnegative, got {r}")
    return float(F.F_mu(r))


# -- subset enumeration ------------------------------------------------------


@dataclass(frozen=True)
class SubsetFamily:
    volume: MetricGraph
    subsets: tuple[tuple, ...]

    def __post_init__(self):
        verts = set(self.volume.vertices)
        seen = set()
        for Z in self.subsets:
            if not set(Z) <= verts:
                raise ValueError(f"subset {Z} not contained in the volume")
            key = frozenset(Z)
            if key in seen:
                raise ValueError(f"duplicate subset {Z}")
            seen.add(key)

    def __len__(self):
        return len(self.subsets)

    def __iter__(self):
        return iter(self.subsets)


def enumerate_subsets(
    G: MetricGraph, R_max: float, k_max: int, cap: int = SUBSET_CAP
) -> SubsetFamily:
    """All vertex subsets with at most ``k_max`` sites and diameter <= ``R_max``.

    Ordered by size, then lexicographically by sorted site index.
    """
    if R_max < 0:
        raise ValueError("R_max must be >= 0")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    n = len(G)
    total = sum(special.comb(n, k, exact=True) for k in range(1, min(k_max, n) + 1))
    if total > cap:
        raise ValueError(f"{total} candidate subsets exceed the cap of {cap}")
    out = []
    close = G.dist <= R_max
    for k in range(1, min(k_max, n) + 1):
        for combo in itertools.combinations(range(n), k):
            if all(close[i, j] for i, j in itertools.combinations(combo, 2)):
                out.append(tuple(G.vertices[i] for i in combo))
    return SubsetFamily(G, tuple(out))


def graph_from_points(vertices: Sequence[Hashable], dist) -> MetricGraph:
    return MetricGraph(tuple(vertices), np.asarray(dist, dtype=float), "custom")
