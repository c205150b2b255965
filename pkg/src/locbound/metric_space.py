"""Finite metric vertex sets and decay profiles.

All sums and suprema over the vertex set are taken exhaustively, which is
what makes every downstream bound exactly checkable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import DivisionByZeroProfile, EmptySet, UnsupportedGeometry

GEOMETRY_KINDS = ("path", "ring", "grid", "torus-row")


@dataclass(eq=False)
class SiteSpace:
    """A finite set of sites with a metric and per-site Hilbert dimensions.

    Sites are the integers ``0 .. n-1``; ``labels`` keeps the human-readable
    coordinates (e.g. ``(column, row)`` for strips).  Instances hash by
    identity so constants derived from them can be cached.
    """

    distance: np.ndarray
    local_dims: tuple[int, ...]
    labels: tuple = ()
    geometry: "Geometry | None" = None

    def __post_init__(self):
        d = np.asarray(self.distance, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise ValueError("distance must be a nonempty square table")
        n = d.shape[0]
        if not np.array_equal(d, d.T):
            raise ValueError("distance table is not symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("d(x, x) must be 0")
        off = d[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("d(x, y) must be positive for x != y")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance table has infinite entries (disconnected graph?)")
        for z in range(n):
            if np.any(d > d[:, [z]] + d[[z], :] + 1e-12):
                raise ValueError("triangle inequality violated")
        d.setflags(write=False)
        self.distance = d
        dims = tuple(int(k) for k in self.local_dims)
        if len(dims) != n:
            raise ValueError("local_dims must list one dimension per site")
        if any(k < 2 for k in dims):
            raise ValueError("every local dimension must be at least 2")
        self.local_dims = dims
        if not self.labels:
            self.labels = tuple(range(n))

    @property
    def vertices(self) -> range:
        return range(self.distance.shape[0])

    @property
    def size(self) -> int:
        return self.distance.shape[0]

    def dim(self, sites: Iterable[int] | None = None) -> int:
        """Hilbert space dimension of ``sites`` (all sites by default)."""
        sites = self.vertices if sites is None else sites
        return math.prod(self.local_dims[x] for x in sites)

    def distance_to_set(self, X: Iterable[int]) -> np.ndarray:
        """Vector of ``d(x, X)`` over all sites ``x``."""
        X = sorted(set(X))
        if not X:
            raise EmptySet("set must be nonempty")
        return self.distance[:, X].min(axis=1)

    @classmethod
    def from_table(cls, table, local_dims) -> "SiteSpace":
        table = np.asarray(table, dtype=float)
        if np.isscalar(local_dims) or isinstance(local_dims, int):
            local_dims = (int(local_dims),) * table.shape[0]
        return cls(distance=table, local_dims=tuple(local_dims))


@dataclass(frozen=True)
class Geometry:
    """Lattice shape: ``kind`` in path, ring, grid, torus-row.

    ``size`` is ``(L,)`` for path/ring and ``(L, W)`` for grid/torus-row,
    where ``L`` is the horizontal (column) count and ``W`` the column height.
    Strip sites are numbered column by column: ``index = n * W + v``.
    """

    kind: str
    size: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GEOMETRY_KINDS:
            raise UnsupportedGeometry(f"unknown geometry kind {self.kind!r}")
        size = tuple(int(s) for s in self.size)
        if self.kind in ("path", "ring"):
            if len(size) != 1:
                raise ValueError(f"{self.kind} takes a single size")
        elif len(size) != 2:
            raise ValueError(f"{self.kind} takes sizes (L, W)")
        if any(s < 1 for s in size):
            raise ValueError("sizes must be positive")
        object.__setattr__(self, "size", size)

    @property
    def length(self) -> int:
        return self.size[0]

    @property
    def width(self) -> int:
        return self.size[1] if len(self.size) == 2 else 1

    @property
    def periodic(self) -> bool:
        return self.kind in ("ring", "torus-row")

    @property
    def n_sites(self) -> int:
        return self.length * self.width

    def index(self, column: int, row: int = 0) -> int:
        return (column % self.length) * self.width + row

    def column(self, n: int) -> list[int]:
        """Sites of horizontal column ``n`` (taken modulo ``L`` when periodic)."""
        if not self.periodic and not 0 <= n < self.length:
            raise IndexError(n)
        return [self.index(n, v) for v in range(self.width)]

    def edges(self) -> list[tuple[int, int]]:
        """Nearest-neighbour bonds, horizontal first, as ``(x, y)`` with ``y`` to the right/up."""
        L, W = self.length, self.width
        out = []
        last = L if self.periodic else L - 1
        for n in range(last):
            for v in range(W):
                out.append((self.index(n, v), self.index(n + 1, v)))
        for n in range(L):
            for v in range(W - 1):
                out.append((self.index(n, v), self.index(n, v + 1)))
        seen = set()
        unique = []
        for x, y in out:
            key = frozenset((x, y))
            if x != y and key not in seen:
                seen.add(key)
                unique.append((x, y))
        return unique

    def labels(self) -> tuple:
        if len(self.size) == 1:
            return tuple(range(self.length))
        return tuple((n, v) for n in range(self.length) for v in range(self.width))

    def build(self, local_dims, distance_table=None) -> SiteSpace:
        """Graph-distance ``SiteSpace`` for this geometry."""
        n = self.n_sites
        if np.isscalar(local_dims):
            local_dims = (int(local_dims),) * n
        if distance_table is None:
            distance_table = graph_distance(n, self.edges())
        return SiteSpace(distance=np.asarray(distance_table, dtype=float),
                         local_dims=tuple(local_dims), labels=self.labels(), geometry=self)


def graph_distance(n: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """All-pairs shortest path lengths on an unweighted graph."""
    if n == 1:
        return np.zeros((1, 1))
    rows = [x for x, _ in edges]
    cols = [y for _, y in edges]
    adj = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n)).tocsr()
    return shortest_path(adj, directed=False, unweighted=True)


@dataclass(frozen=True)
class DecayProfile:
    """Nonincreasing positive ``F`` together with a rate ``a``.

    Calling the profile evaluates ``F_a(r) = exp(-a r) F(r)``.  Presets:
    ``power`` gives ``(1 + r)^-p`` and ``exponential`` gives ``exp(-b r)``.
    A custom vectorised ``fn`` may be supplied with ``kind="custom"``.
    """

    kind: str = "power"
    param: float = 2.0
    rate: float = 0.0
    fn: Callable | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.kind not in ("power", "exponential", "custom"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom profile needs fn")
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if self.kind != "custom" and self.param < 0:
            raise ValueError("profile parameter must be nonnegative")

    @classmethod
    def power(cls, p: float = 2.0, rate: float = 0.0) -> "DecayProfile":
        return cls("power", float(p), float(rate))

    @classmethod
    def exponential(cls, b: float = 1.0, rate: float = 0.0) -> "DecayProfile":
        return cls("exponential", float(b), float(rate))

    def with_rate(self, a: float) -> "DecayProfile":
        return DecayProfile(self.kind, self.param, float(a), self.fn)

    def base(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return (1.0 + r) ** (-self.param)
        if self.kind == "exponential":
            return np.exp(-self.param * r)
        return np.asarray(self.fn(r), dtype=float)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-self.rate * r) * self.base(r)

    def check_on(self, space: SiteSpace) -> None:
        """Raise if ``F`` is not positive and nonincreasing on the space's distances."""
        r = np.unique(space.distance)
        values = self.base(r)
        if np.any(values <= 0):
            raise ValueError("F must be positive")
        if np.any(np.diff(values) > 0):
            raise ValueError("F must be nonincreasing")

    def table(self, space: SiteSpace) -> np.ndarray:
        """``F_a(d(x, y))`` for all pairs; raises if any entry underflows to 0."""
        values = self(space.distance)
        if np.any(values <= 0):
            raise DivisionByZeroProfile(
                f"F_a underflows to 0 on this space (rate={self.rate})")
        return values


@lru_cache(maxsize=None)
def pair_sum_norm(space: SiteSpace, profile: DecayProfile) -> float:
    """``||F_a|| = sup_x sum_y F_a(d(x, y))``."""
    return float(profile(space.distance).sum(axis=1).max())


@lru_cache(maxsize=None)
def convolution_constant(space: SiteSpace, profile: DecayProfile) -> float:
    """``C_a = sup_{x,y} sum_z F_a(d(x,z)) F_a(d(z,y)) / F_a(d(x,y))``."""
    f = profile.table(space)
    return float(((f @ f) / f).max())


def set_distance(space: SiteSpace, X: Iterable[int], Y: Iterable[int]) -> float:
    X, Y = sorted(set(X)), sorted(set(Y))
    if not X or not Y:
        raise EmptySet("set_distance needs two nonempty sets")
    return float(space.distance[np.ix_(X, Y)].min())
