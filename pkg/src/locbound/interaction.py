"""Interactions, their weighted norms, surfaces and boundaries, and Heisenberg presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import UnsupportedGeometry
from .metric_space import DecayProfile, Geometry, SiteSpace
from .quantum import (
    DEFAULT_DENSE_CAP,
    ObservableWithSupport,
    _reorder,
    check_cap,
    embed,
    embed_local,
    positions,
    site_kron,
    spectral_decompose,
)

HERMITIAN_TOL = 1e-12


@lru_cache(maxsize=None)
def spin_matrices(S: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(S1, S2, S3)`` for spin ``S`` in the basis ``m = S, S-1, ..., -S``."""
    two_s = round(2 * S)
    if two_s < 1 or abs(two_s - 2 * S) > 1e-12:
        raise ValueError(f"spin must be a positive half-integer or integer, got {S}")
    m = S - np.arange(two_s + 1)
    s3 = np.diag(m).astype(complex)
    sp_ = np.zeros((two_s + 1, two_s + 1), dtype=complex)
    for k in range(1, two_s + 1):
        sp_[k - 1, k] = math.sqrt(S * (S + 1) - m[k] * (m[k] + 1))
    s1 = 0.5 * (sp_ + sp_.conj().T)
    s2 = -0.5j * (sp_ - sp_.conj().T)
    for mat in (s1, s2, s3):
        mat.setflags(write=False)
    return s1, s2, s3


def spin_of_dim(n: int) -> float:
    return (n - 1) / 2


def heisenberg_bond(S: float, coupling: float = 1.0) -> np.ndarray:
    """Block of ``J S_x · S_y`` on two sites of spin ``S``."""
    return coupling * sum(np.kron(s, s) for s in spin_matrices(S))


def spin_component(space: SiteSpace, site: int, component: int = 3) -> ObservableWithSupport:
    """``S^j`` on one site, sized from the site's local dimension."""
    mats = spin_matrices(spin_of_dim(space.local_dims[site]))
    return ObservableWithSupport((site,), mats[component - 1])


def _canonical_block(support: Sequence[int], block: np.ndarray, dims: Sequence[int]):
    """Re-express a block given in ``support`` order over the sorted support."""
    support = list(support)
    order = sorted(range(len(support)), key=lambda i: support[i])
    if order == list(range(len(support))):
        return tuple(support), block
    rank = {i: r for r, i in enumerate(order)}
    dims_by_rank = [dims[i] for i in order]
    perm = _reorder(dims_by_rank, [rank[i] for i in range(len(support) - 1, -1, -1)])
    return tuple(sorted(support)), block[np.ix_(perm, perm)]


@dataclass(eq=False)
class Interaction:
    """Finite list of Hermitian terms ``Phi(X)``.

    Terms sharing a support are kept separately for assembly but combined
    when norms are taken, since ``Phi(X)`` is their sum.
    """

    terms: tuple[tuple[tuple[int, ...], np.ndarray], ...]
    space: SiteSpace

    def __init__(self, terms: Iterable[tuple[Sequence[int], np.ndarray]], space: SiteSpace):
        clean = []
        for support, block in terms:
            support = tuple(int(x) for x in support)
            if not support:
                raise ValueError("term supports must be nonempty")
            if len(set(support)) != len(support):
                raise ValueError(f"support {support} repeats a site")
            if any(x < 0 or x >= space.size for x in support):
                raise ValueError(f"support {support} is not inside the site space")
            block = np.asarray(block, dtype=complex)
            d = space.dim(support)
            if block.shape != (d, d):
                raise ValueError(f"block for {support} has shape {block.shape}, expected {(d, d)}")
            if np.abs(block - block.conj().T).max(initial=0.0) > HERMITIAN_TOL:
                raise ValueError(f"block for {support} is not Hermitian")
            support, block = _canonical_block(support, block,
                                              [space.local_dims[x] for x in support])
            block.setflags(write=False)
            clean.append((support, block))
        self.terms = tuple(clean)
        self.space = space

    def __len__(self):
        return len(self.terms)

    @cached_property
    def grouped(self) -> dict[tuple[int, ...], np.ndarray]:
        out: dict[tuple[int, ...], np.ndarray] = {}
        for support, block in self.terms:
            out[support] = out[support] + block if support in out else block
        return out

    @cached_property
    def norms(self) -> dict[tuple[int, ...], float]:
        return {X: float(np.abs(np.linalg.eigvalsh(B)).max()) for X, B in self.grouped.items()}

    def restricted(self, keep) -> "Interaction":
        """Terms for which ``keep(support)`` is true."""
        return Interaction([(X, B) for X, B in self.terms if keep(X)], self.space)

    def __add__(self, other: "Interaction") -> "Interaction":
        if other.space is not self.space:
            raise ValueError("interactions live on different spaces")
        return Interaction(self.terms + other.terms, self.space)


@lru_cache(maxsize=None)
def interaction_norm_a(phi: Interaction, space: SiteSpace, profile: DecayProfile) -> float:
    """``||Phi||_a = sup_{x,y} sum_{X ∋ x,y} ||Phi(X)|| / F_a(d(x,y))``."""
    if not phi.norms:
        return 0.0
    W = np.zeros((space.size, space.size))
    for X, w in phi.norms.items():
        W[np.ix_(X, X)] += w
    return float((W / profile.table(space)).max())


def surface_sets(phi: Interaction, X: Iterable[int]) -> list[tuple[int, ...]]:
    """Supports ``Z`` that meet both ``X`` and its complement."""
    X = set(X)
    return [Z for Z in phi.grouped if X.intersection(Z) and not X.issuperset(Z)]


def local_surface_norm(phi: Interaction, space: SiteSpace, profile: DecayProfile,
                       x: int, X: Iterable[int]) -> float:
    """``||Phi||_a(x; X)``: surface-restricted analogue of the interaction norm."""
    X = set(X)
    if x not in X:
        return 0.0
    w = np.zeros(space.size)
    for Z in surface_sets(phi, X):
        if x in Z:
            w[list(Z)] += phi.norms[Z]
    if not w.any():
        return 0.0
    return float((w / profile.table(space)[x]).max())


def phi_boundary(phi: Interaction, X: Iterable[int]) -> set[int]:
    """Sites of ``X`` touched by a nonzero surface term."""
    X = set(X)
    out = set()
    for Z in surface_sets(phi, X):
        if phi.norms[Z] > 1e-14:
            out.update(X.intersection(Z))
    return out


def assemble_hamiltonian(phi: Interaction, volume: Iterable[int] | None = None,
                         dense_cap: int = DEFAULT_DENSE_CAP, sparse: bool = False):
    """``H_Λ = sum_{X ⊂ Λ} Phi(X)`` on the sorted volume.

    ``sparse=True`` returns a CSR matrix and skips the dense cap.
    """
    space = phi.space
    volume = sorted(space.vertices if volume is None else set(volume))
    dims = [space.local_dims[x] for x in volume]
    D = math.prod(dims)
    vset = set(volume)
    if sparse:
        H = sp.csr_matrix((D, D), dtype=complex)
        for support, block in phi.terms:
            if vset.issuperset(support):
                H = H + _embed_sparse(block, positions(support, volume), dims)
        return H.tocsr()
    check_cap(D, dense_cap)
    H = np.zeros((D, D), dtype=complex)
    for support, block in phi.terms:
        if vset.issuperset(support):
            H += embed(block, positions(support, volume), dims)
    return H


def _embed_sparse(block: np.ndarray, support: Sequence[int], dims: Sequence[int]):
    rest = [k for k in range(len(dims)) if k not in support]
    d_rest = math.prod(dims[k] for k in rest)
    big = sp.kron(sp.identity(d_rest, format="csr"), sp.csr_matrix(block)).tocoo()
    perm = _reorder(dims, rest[::-1] + list(support)[::-1])
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return sp.csr_matrix((big.data, (inv[big.row], inv[big.col])), shape=big.shape)


@dataclass(eq=False)
class SpinModelSpec:
    """Heisenberg-type model on a geometry.

    ``H = J sum_{<xy>} S_x · S_y + h sum_x (-1)^x S^3_x``; the staggered
    field uses the parity of ``column + row``.
    """

    geometry: Geometry
    spin: float = 0.5
    coupling: float = 1.0
    staggered_field: float = 0.0
    distance_table: np.ndarray | None = None
    twist: object | None = None

    def __post_init__(self):
        two_s = 2 * self.spin
        if abs(two_s - round(two_s)) > 1e-12 or round(two_s) < 1:
            raise ValueError("2S must be a positive integer")

    @property
    def local_dim(self) -> int:
        return round(2 * self.spin) + 1

    @cached_property
    def space(self) -> SiteSpace:
        return self.geometry.build(self.local_dim, self.distance_table)

    def site_parity(self, x: int) -> int:
        label = self.space.labels[x]
        return (sum(label) if isinstance(label, tuple) else label) % 2


def heisenberg_preset(spec: SpinModelSpec) -> Interaction:
    """Nearest-neighbour Heisenberg interaction (plus optional staggered field)."""
    geom = spec.geometry
    if geom.kind not in ("path", "ring", "torus-row"):
        raise UnsupportedGeometry(
            f"Heisenberg preset supports path, ring and torus-row, not {geom.kind!r}")
    space = spec.space
    bond = heisenberg_bond(spec.spin, spec.coupling)
    terms = [((x, y), bond) for x, y in geom.edges()]
    if spec.staggered_field:
        s3 = spin_matrices(spec.spin)[2]
        for x in space.vertices:
            sign = -1.0 if spec.site_parity(x) else 1.0
            terms.append(((x,), sign * spec.staggered_field * s3))
    return Interaction(terms, space)


@dataclass(eq=False)
class SpinModel:
    """An interaction on a finite volume with its (lazily computed) spectrum."""

    interaction: Interaction
    volume: tuple[int, ...] | None = None
    dense_cap: int = DEFAULT_DENSE_CAP

    def __post_init__(self):
        space = self.interaction.space
        self.volume = tuple(sorted(space.vertices if self.volume is None else set(self.volume)))
        check_cap(space.dim(self.volume), self.dense_cap)

    @property
    def space(self) -> SiteSpace:
        return self.interaction.space

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return assemble_hamiltonian(self.interaction, self.volume, self.dense_cap)

    @cached_property
    def spectrum(self):
        return spectral_decompose(self.hamiltonian)

    def embed(self, obs: ObservableWithSupport) -> np.ndarray:
        return embed_local(obs, self.volume, self.space, self.dense_cap)

    def vector_from_product(self, factors: Sequence[np.ndarray]) -> np.ndarray:
        """Tensor product of one local vector per volume site (ascending order)."""
        return site_kron([np.asarray(f, dtype=complex).reshape(-1, 1) for f in factors]).ravel()
