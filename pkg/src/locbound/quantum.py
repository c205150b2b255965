"""Dense finite-dimensional quantum mechanics on tensor-product spaces.

Basis convention: for sites ``0 .. N-1`` with dimensions ``n_k`` the
computational basis index is ``sum_k s_k * prod_{j<k} n_j``, i.e. site 0
varies fastest.  Blocks attached to a support use the same convention over
the sorted support.  For two sites ``(x, y)`` with ``x < y`` the block of
``A_x B_y`` is therefore ``np.kron(B, A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import (
    DimensionCap,
    DimensionMismatch,
    NotHermitian,
    OverflowRisk,
    SupportNotContained,
)
from .metric_space import SiteSpace

DEFAULT_DENSE_CAP = 2**14


def site_kron(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of per-site operators listed in ascending site order."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(op, out)
    return out


def _reorder(dims: Sequence[int], order_slow_to_fast: Sequence[int]) -> np.ndarray:
    """Index map ``perm`` with ``target[j] = current[perm[j]]``.

    ``current`` is a vector laid out with the sites in ``order_slow_to_fast``;
    ``target`` uses the standard layout (site ``N-1`` slowest, site 0 fastest).
    """
    n = len(dims)
    shape = [dims[k] for k in order_slow_to_fast]
    idx = np.arange(math.prod(dims)).reshape(shape)
    position = {site: ax for ax, site in enumerate(order_slow_to_fast)}
    axes = [position[k] for k in range(n - 1, -1, -1)]
    return idx.transpose(axes).ravel()


def embed(block: np.ndarray, support: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """``block ⊗ 1`` on the full space; ``support`` lists positions in ``dims``."""
    support = list(support)
    if sorted(support) != support or len(set(support)) != len(support):
        raise ValueError("support positions must be strictly increasing")
    d_block = math.prod(dims[k] for k in support)
    if block.shape != (d_block, d_block):
        raise DimensionMismatch(
            f"block shape {block.shape} does not match support dimension {d_block}")
    rest = [k for k in range(len(dims)) if k not in support]
    if not rest:
        return np.array(block, dtype=complex)
    d_rest = math.prod(dims[k] for k in rest)
    big = np.kron(np.eye(d_rest), block)
    perm = _reorder(dims, rest[::-1] + support[::-1])
    return big[np.ix_(perm, perm)]


def partial_trace(A: np.ndarray, keep: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Trace out every position not in ``keep``; result uses the sorted ``keep`` order."""
    keep = sorted(keep)
    n = len(dims)
    D = math.prod(dims)
    if A.shape != (D, D):
        raise DimensionMismatch(f"operator shape {A.shape} does not match dimension {D}")
    out = [k for k in range(n) if k not in keep]
    if not out:
        return np.array(A, dtype=complex)
    rev = list(dims[::-1])
    T = np.asarray(A).reshape(rev + rev)
    ax = {k: n - 1 - k for k in range(n)}
    order = [ax[k] for k in keep[::-1]] + [ax[k] for k in out[::-1]]
    T = T.transpose(order + [o + n for o in order])
    dk = math.prod(dims[k] for k in keep)
    do = math.prod(dims[k] for k in out)
    return np.einsum("iaja->ij", T.reshape(dk, do, dk, do))


@dataclass
class ObservableWithSupport:
    """A local operator ``block`` acting on the sorted site set ``support``."""

    support: tuple[int, ...]
    block: np.ndarray

    def __post_init__(self):
        self.support = tuple(sorted(self.support))
        self.block = np.asarray(self.block, dtype=complex)
        if len(set(self.support)) != len(self.support):
            raise ValueError("support has repeated sites")

    def check(self, space: SiteSpace) -> None:
        d = space.dim(self.support)
        if self.block.shape != (d, d):
            raise DimensionMismatch(
                f"block shape {self.block.shape} does not match support dimension {d}")

    @property
    def norm(self) -> float:
        return operator_norm(self.block)


def positions(sites: Sequence[int], volume: Sequence[int]) -> list[int]:
    """Positions of global ``sites`` inside the sorted ``volume``."""
    volume = sorted(volume)
    where = {x: i for i, x in enumerate(volume)}
    missing = [x for x in sites if x not in where]
    if missing:
        raise SupportNotContained(f"sites {missing} are not in the volume")
    return sorted(where[x] for x in sites)


def check_cap(dim: int, cap: int = DEFAULT_DENSE_CAP) -> None:
    if dim > cap:
        raise DimensionCap(f"Hilbert dimension {dim} exceeds the dense cap {cap}")


def embed_local(obs: ObservableWithSupport, volume: Sequence[int], space: SiteSpace,
                dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Embed ``obs`` into the Hilbert space of ``volume`` as ``A ⊗ 1``."""
    volume = sorted(volume)
    obs.check(space)
    check_cap(space.dim(volume), dense_cap)
    pos = positions(obs.support, volume)
    return embed(obs.block, pos, [space.local_dims[x] for x in volume])


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition ``H = U diag(E) U^†`` with ascending ``E``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    origin: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def to_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        U = self.eigenvectors
        return U.conj().T @ A @ U

    def from_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        U = self.eigenvectors
        return U @ A @ U.conj().T

    def reconstruction_error(self) -> float:
        rebuilt = self.from_eigenbasis(np.diag(self.eigenvalues))
        return float(np.abs(rebuilt - self.origin).max())


def is_hermitian(H: np.ndarray, tol: float = 1e-10) -> bool:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        return False
    scale = 1.0 + (np.abs(H).max() if H.size else 0.0)
    return bool(np.abs(H - H.conj().T).max(initial=0.0) <= tol * scale)


def spectral_decompose(H: np.ndarray) -> SpectralData:
    H = np.asarray(H)
    if not is_hermitian(H):
        raise NotHermitian("operator is not Hermitian within 1e-10")
    Hs = 0.5 * (H + H.conj().T)
    E, U = np.linalg.eigh(Hs)
    E.setflags(write=False)
    U.setflags(write=False)
    return SpectralData(E, U, H)


def _check_dims(sd: SpectralData, A: np.ndarray) -> None:
    if A.shape != (sd.dim, sd.dim):
        raise DimensionMismatch(f"operator shape {A.shape} vs spectrum dimension {sd.dim}")


def heisenberg_evolve(sd: SpectralData, A: np.ndarray, t: float) -> np.ndarray:
    """``exp(itH) A exp(-itH)``."""
    _check_dims(sd, A)
    if t == 0:
        return np.array(A, dtype=complex)
    E = sd.eigenvalues - sd.ground_energy
    phase = np.exp(1j * t * E)
    Ae = sd.to_eigenbasis(A)
    return sd.from_eigenbasis(phase[:, None] * Ae * phase.conj()[None, :])


def evolution_family(sd: SpectralData, A: np.ndarray) -> Callable[[float], np.ndarray]:
    """``t -> heisenberg_evolve(sd, A, t)`` with the eigenbasis transform of ``A`` done once."""
    _check_dims(sd, A)
    A = np.array(A, dtype=complex)
    Ae = sd.to_eigenbasis(A)
    E = sd.eigenvalues - sd.ground_energy
    U = sd.eigenvectors

    def at(t: float) -> np.ndarray:
        if t == 0:
            return A.copy()
        phase = np.exp(1j * t * E)
        return (U * phase[None, :]) @ Ae @ (U * phase[None, :]).conj().T

    return at


def complex_time_evolve(sd: SpectralData, A: np.ndarray, b: float) -> np.ndarray:
    """``exp(-bH) A exp(bH)`` with the ground energy shifted to zero."""
    _check_dims(sd, A)
    E = sd.eigenvalues - sd.ground_energy
    if abs(b) * (E[-1] if E.size else 0.0) > 300:
        raise OverflowRisk(f"b*(E_max - E_0) = {abs(b) * E[-1]:.3g} exceeds 300")
    if b == 0:
        return np.array(A, dtype=complex)
    Ae = sd.to_eigenbasis(A)
    return sd.from_eigenbasis(np.exp(-b * E)[:, None] * Ae * np.exp(b * E)[None, :])


def operator_norm(A: np.ndarray) -> float:
    """Largest singular value.

    Inputs within ``1e-13`` (Frobenius, absolute or relative) of Hermitian or
    anti-Hermitian use ``eigvalsh`` on the projected matrix; the projection
    moves the norm by no more than that distance.
    """
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    if A.shape[0] == A.shape[1]:
        fro = np.linalg.norm(A)
        if fro == 0:
            return 0.0
        tol = 1e-13 * max(1.0, fro)
        Ah = A.conj().T
        if 0.5 * np.linalg.norm(A - Ah) <= tol:
            return float(np.abs(np.linalg.eigvalsh(0.5 * (A + Ah))).max())
        if 0.5 * np.linalg.norm(A + Ah) <= tol:
            return float(np.abs(np.linalg.eigvalsh(0.5j * (A - Ah))).max())
    return float(np.linalg.norm(A, 2))


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``AB - BA``; diagonal ``B`` is applied elementwise."""
    if B.ndim == 2 and B.shape[0] == B.shape[1] and not np.count_nonzero(B - np.diag(np.diag(B))):
        b = np.diag(B)
        return A * b[None, :] - b[:, None] * A
    return A @ B - B @ A


def conditional_expectation(A: np.ndarray, X: Sequence[int], volume: Sequence[int],
                            space: SiteSpace) -> np.ndarray:
    """Normalized partial trace over ``volume \\ X``, re-embedded as ``(·) ⊗ 1``."""
    volume = sorted(volume)
    dims = [space.local_dims[x] for x in volume]
    keep = positions(sorted(set(X) & set(volume)), volume)
    if A.shape != (math.prod(dims),) * 2:
        raise DimensionMismatch("operator does not act on the given volume")
    out = [k for k in range(len(dims)) if k not in keep]
    d_out = math.prod(dims[k] for k in out)
    if not keep:
        return np.trace(A) / d_out * np.eye(math.prod(dims), dtype=complex)
    reduced = partial_trace(A, keep, dims) / d_out
    return embed(reduced, keep, dims)


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random unitary (QR of a complex Ginibre matrix with phase fix)."""
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(dim, random_state=rng)


def haar_average_mc(A: np.ndarray, X: Sequence[int], volume: Sequence[int], space: SiteSpace,
                    samples: int, seed: int | None = 0,
                    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None,
                    ) -> np.ndarray:
    """Monte Carlo estimate of ``∫ U* A U dU`` over unitaries on the complement of ``X``."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    volume = sorted(volume)
    dims = [space.local_dims[x] for x in volume]
    keep = positions(sorted(set(X) & set(volume)), volume)
    out = [k for k in range(len(dims)) if k not in keep]
    if not out:
        return np.array(A, dtype=complex)
    sampler = sampler or haar_unitary
    rng = np.random.default_rng(seed)
    d_out = math.prod(dims[k] for k in out)
    acc = np.zeros_like(A, dtype=complex)
    for _ in range(samples):
        U = embed(sampler(rng, d_out), out, dims)
        acc += U.conj().T @ A @ U
    return acc / samples


def expectation(psi: np.ndarray, A: np.ndarray) -> complex:
    return complex(np.vdot(psi, A @ psi))
