"""Twisted Heisenberg Hamiltonians, quasi-adiabatic continuation, and the variational gap bound.

Columns are 0-indexed.  A twist at column ``m`` conjugates every horizontal
bond ``((m, v), (m+1, v))`` by ``exp(-i theta S^3)`` on its right end; the
second twist sits at column ``m + L/2``.  ``U_n(theta)`` is the rotation
``exp(i theta S^3)`` over all of column ``n``.

Translation convention: ``T`` is the permutation unitary with
``T^† A_x T = A_{x+e1}`` (one column to the right).  With that convention the
twisted translation commuting with ``H_{theta,-theta}`` is
``U_m(theta) U_{m+L/2}(theta') T`` (rotations to the left of ``T``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy import integrate

from .clustering import DEGENERACY_TOL, kernel, spectral_gap
from .errors import (
    DegenerateGround,
    DimensionMismatch,
    NormDrift,
    OverlapTooLarge,
    PreconditionError,
    QuadratureFailure,
    UnsupportedGeometry,
)
from .interaction import (
    Interaction,
    SpinModelSpec,
    assemble_hamiltonian,
    heisenberg_bond,
    spin_matrices,
)
from .metric_space import Geometry
from .quantum import (
    DEFAULT_DENSE_CAP,
    SpectralData,
    check_cap,
    operator_norm,
    partial_trace,
    spectral_decompose,
)

TWO_PI = 2 * math.pi
LEVEL_TOL = 1e-12


@dataclass(frozen=True)
class TwistSpec:
    """Two twists: angle ``theta`` at column ``m`` and ``theta_prime`` at ``m + L/2``."""

    length: int
    m: int = 0
    theta: float = 0.0
    theta_prime: float = 0.0

    def __post_init__(self):
        if self.length % 2:
            raise ValueError("L must be even")
        if self.length < 4:
            raise ValueError("twists need L >= 4 so the two twisted columns differ")
        if not 0 <= self.m < self.length:
            raise ValueError(f"twist column m={self.m} outside [0, {self.length})")

    @property
    def second(self) -> int:
        return (self.m + self.length // 2) % self.length

    def at(self, theta: float, theta_prime: float) -> "TwistSpec":
        return TwistSpec(self.length, self.m, float(theta), float(theta_prime))


def _check_periodic(geom: Geometry) -> None:
    if geom.kind not in ("ring", "torus-row"):
        raise UnsupportedGeometry(f"twists need a horizontally periodic geometry, not {geom.kind!r}")


def unit_phase(angle) -> np.ndarray:
    """``exp(i angle)``, exact at multiples of ``pi/2``.

    Rotations by ``2 pi`` must give ``±1`` bit-for-bit, which ``np.exp`` misses
    by one ulp in the imaginary part.
    """
    angle = np.asarray(angle, dtype=float)
    quarter = angle / (math.pi / 2)
    q = np.round(quarter)
    snap = np.abs(quarter - q) < 1e-12
    exact = np.array([1, 1j, -1, -1j])[(q.astype(np.int64) % 4)]
    return np.where(snap, exact, np.exp(1j * angle))


def _rotation(theta: float, S3: np.ndarray) -> np.ndarray:
    """``exp(i theta S3)``; exact phases when ``S3`` is diagonal."""
    if not np.count_nonzero(S3 - np.diag(np.diag(S3))):
        return np.diag(unit_phase(theta * np.real(np.diag(S3))))
    return sla.expm(1j * theta * S3)


def twisted_bond(bond_block: np.ndarray, theta: float, S3_y: np.ndarray) -> np.ndarray:
    """``(1 ⊗ R) h (1 ⊗ R)^†`` with ``R = exp(-i theta S3_y)`` on the second site.

    The block uses the package basis convention (first site fastest), so the
    second-site factor is ``kron(R, 1)``.
    """
    S3_y = np.asarray(S3_y)
    dy = S3_y.shape[0]
    D = bond_block.shape[0]
    if bond_block.shape != (D, D) or D % dy:
        raise DimensionMismatch("bond block does not factor as (first site) x (second site)")
    if theta == 0:
        return np.array(bond_block, dtype=complex)
    R = np.kron(_rotation(-theta, S3_y), np.eye(D // dy))
    return R @ bond_block @ R.conj().T


def twisted_bond_derivative(bond_block: np.ndarray, theta: float, S3_y: np.ndarray) -> np.ndarray:
    """``d/dtheta`` of :func:`twisted_bond`: ``-i [1 ⊗ S3_y, h(theta)]``."""
    h = twisted_bond(bond_block, theta, S3_y)
    S = np.kron(np.asarray(S3_y), np.eye(bond_block.shape[0] // S3_y.shape[0]))
    out = -1j * (S @ h - h @ S)
    return 0.5 * (out + out.conj().T)


def horizontal_bonds(geom: Geometry, column: int) -> list[tuple[int, int]]:
    """Bonds ``((column, v), (column+1, v))`` in (left, right) order."""
    return [(geom.index(column, v), geom.index(column + 1, v)) for v in range(geom.width)]


def _twist_terms(spec: SpinModelSpec, twist: TwistSpec):
    geom = spec.geometry
    _check_periodic(geom)
    if twist.length != geom.length:
        raise ValueError(f"twist length {twist.length} does not match L={geom.length}")
    bond = heisenberg_bond(spec.spin, spec.coupling)
    S3 = spin_matrices(spec.spin)[2]
    special = {}
    for col, angle in ((twist.m, twist.theta), (twist.second, twist.theta_prime)):
        for xy in horizontal_bonds(geom, col):
            special[frozenset(xy)] = (xy, angle)
    return bond, S3, special


def twisted_hamiltonian(spec: SpinModelSpec, twist: TwistSpec) -> Interaction:
    """Heisenberg preset with the bonds at columns ``m`` and ``m + L/2`` twisted."""
    bond, S3, special = _twist_terms(spec, twist)
    space = spec.space
    terms = []
    for x, y in spec.geometry.edges():
        key = frozenset((x, y))
        if key in special:
            xy, angle = special[key]
            terms.append((xy, twisted_bond(bond, angle, S3)))
        else:
            terms.append(((x, y), bond))
    if spec.staggered_field:
        for x in space.vertices:
            sign = -1.0 if spec.site_parity(x) else 1.0
            terms.append(((x,), sign * spec.staggered_field * S3))
    return Interaction(terms, space)


def twist_derivative(spec: SpinModelSpec, twist: TwistSpec, which: int = 1) -> Interaction:
    """``∂_1 H`` (``which=1``, the ``theta`` bonds) or ``∂_2 H`` (the ``theta_prime`` bonds)."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    bond, S3, _ = _twist_terms(spec, twist)
    col, angle = (twist.m, twist.theta) if which == 1 else (twist.second, twist.theta_prime)
    terms = [(xy, twisted_bond_derivative(bond, angle, S3)) for xy in horizontal_bonds(spec.geometry, col)]
    return Interaction(terms, spec.space)


def _site_phases(spec: SpinModelSpec, sites: Sequence[int], theta: float) -> np.ndarray:
    """Diagonal of ``prod_{x in sites} exp(i theta S^3_x)`` in the computational basis."""
    m = np.real(np.diag(spin_matrices(spec.spin)[2]))
    n = spec.geometry.n_sites
    total = np.zeros(1)
    chosen = set(sites)
    for x in range(n):
        local = m if x in chosen else np.zeros_like(m)
        total = (local[:, None] + total[None, :]).ravel()
    return unit_phase(theta * total)


def column_rotation(spec: SpinModelSpec, n: int, theta: float) -> np.ndarray:
    """``U_n(theta) = ⊗_v exp(i theta S^3_{(n,v)})``, identity off column ``n``."""
    check_cap(spec.space.dim())
    return np.diag(_site_phases(spec, spec.geometry.column(n), theta))


@lru_cache(maxsize=8)
def _translation_perm(n_sites: int, d: int, shift: int) -> np.ndarray:
    D = d**n_sites
    idx = np.arange(D)
    digits = (idx[None, :] // (d ** np.arange(n_sites))[:, None]) % d
    shifted = digits[(np.arange(n_sites) + shift) % n_sites]
    return (shifted * (d ** np.arange(n_sites))[:, None]).sum(axis=0)


def translation_unitary(spec: SpinModelSpec) -> np.ndarray:
    """Permutation unitary ``T`` with ``T^† A_{(n,v)} T = A_{(n+1,v)}``."""
    geom = spec.geometry
    _check_periodic(geom)
    check_cap(spec.space.dim())
    perm = _translation_perm(geom.n_sites, spec.local_dim, geom.width)
    T = np.zeros((perm.size, perm.size), dtype=complex)
    T[perm, np.arange(perm.size)] = 1.0
    return T


def twisted_translation(spec: SpinModelSpec, theta: float, theta_prime: float, m: int = 0) -> np.ndarray:
    """``T_{theta,theta'} = U_m(theta) U_{m+L/2}(theta') T``; commutes with ``H_{theta,-theta}``."""
    geom = spec.geometry
    _check_periodic(geom)
    second = (m + geom.length // 2) % geom.length
    phases = (_site_phases(spec, geom.column(m), theta)
              * _site_phases(spec, geom.column(second), theta_prime))
    return phases[:, None] * translation_unitary(spec)


def twist_conjugator(spec: SpinModelSpec, theta: float, m: int = 0) -> np.ndarray:
    """``W(theta) = ⊗_{m < n <= m + L/2} U_n(theta)``, so ``H_{theta,-theta} = W^† H_{0,0} W``."""
    geom = spec.geometry
    _check_periodic(geom)
    check_cap(spec.space.dim())
    sites = [x for n in range(m + 1, m + geom.length // 2 + 1) for x in geom.column(n)]
    return np.diag(_site_phases(spec, sites, theta))


def _levels(E: np.ndarray, tol: float = LEVEL_TOL):
    """Group ascending eigenvalues into levels; returns (level index per eigenvalue, level energies)."""
    breaks = np.concatenate(([True], np.diff(E) > tol))
    label = np.cumsum(breaks) - 1
    reps = np.array([E[label == k].mean() for k in range(label[-1] + 1)])
    return label, reps


def regularized_imaginary_time(sd: SpectralData, A: np.ndarray, t: float, alpha: float) -> np.ndarray:
    """``A_alpha(it, H)``: eigenbasis elements scaled by the Gaussian kernel ``K(E_n - E_k, t)``."""
    if t < 0:
        raise PreconditionError("t must be nonnegative")
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    E = sd.eigenvalues
    omega = E[:, None] - E[None, :]
    K = kernel(omega, alpha, 1j * t)
    return sd.from_eigenbasis(K * sd.to_eigenbasis(A))


@dataclass(frozen=True)
class HastingsParams:
    """Regularization ``alpha``, imaginary-time cutoff ``t_cut``, RK4 step and quadrature tolerance."""

    alpha: float
    t_cut: float
    ode_step: float = TWO_PI / 256
    quadrature_tol: float = 1e-10

    def __post_init__(self):
        if self.alpha <= 0 or self.t_cut <= 0 or self.ode_step <= 0 or self.quadrature_tol <= 0:
            raise ValueError("alpha, t_cut, ode_step and quadrature_tol must be positive")

    @classmethod
    def default(cls, gap: float, length: int, **kw) -> "HastingsParams":
        """``alpha = gamma / L`` and ``t_cut = L / 2``."""
        return cls(alpha=gap / length, t_cut=length / 2, **kw)


def kernel_difference_integral(omega: np.ndarray, params: HastingsParams) -> np.ndarray:
    """``∫_0^T [K(omega, t) - K(-omega, t)] dt`` for a vector of energy differences."""
    omega = np.asarray(omega, dtype=float)
    if omega.size == 0:
        return omega.copy()

    def f(t):
        return kernel(omega, params.alpha, 1j * t) - kernel(-omega, params.alpha, 1j * t)

    val, err = integrate.quad_vec(f, 0.0, params.t_cut, epsabs=params.quadrature_tol,
                                  epsrel=0.0, norm="max", limit=2000)
    if not np.all(np.isfinite(val)) or err > params.quadrature_tol:
        raise QuadratureFailure(f"kernel integral error {err:.3g} exceeds {params.quadrature_tol}")
    return val


def hastings_generator(sd: SpectralData, dH: np.ndarray, params: HastingsParams,
                       method: str = "levels") -> np.ndarray:
    """``B_{alpha,T} = -∫_0^T [A_alpha(it) - A_alpha(it)^*] dt`` for ``A = dH``.

    ``method="levels"`` integrates the scalar kernel difference once per pair
    of distinct energy levels (eigenvalues closer than ``1e-12`` share a
    level); ``method="matrix"`` integrates the operator-valued integrand
    directly and serves as an independent check.
    """
    if method == "matrix":
        def f(t):
            M = regularized_imaginary_time(sd, dH, t, params.alpha)
            return M - M.conj().T

        val, err = integrate.quad_vec(f, 0.0, params.t_cut, epsabs=params.quadrature_tol,
                                      epsrel=0.0, norm="max", limit=2000)
        if err > params.quadrature_tol:
            raise QuadratureFailure(f"matrix quadrature error {err:.3g}")
        return -val
    if method != "levels":
        raise ValueError(f"unknown method {method!r}")
    label, reps = _levels(sd.eigenvalues)
    n = reps.size
    iu = np.triu_indices(n, 1)
    G = np.zeros((n, n))
    g = kernel_difference_integral(reps[iu[0]] - reps[iu[1]], params)
    G[iu] = g
    G -= G.T
    Be = -G[label[:, None], label[None, :]] * sd.to_eigenbasis(dH)
    return sd.from_eigenbasis(Be)


def fixed_phase(psi: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real and positive."""
    k = int(np.argmax(np.abs(psi)))
    return psi * (abs(psi[k]) / psi[k])


def ground_state(sd: SpectralData, degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    gap = spectral_gap(sd, degeneracy_tol)
    if gap.degeneracy != 1:
        raise DegenerateGround(f"ground state is {gap.degeneracy}-fold degenerate")
    return fixed_phase(np.array(sd.eigenvectors[:, 0]))


def exact_generator(sd: SpectralData, dH: np.ndarray,
                    degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """``∂ psi_0 = -sum_{n != 0} |n><n| dH |0> / (E_n - E_0)`` (first-order perturbation)."""
    gap = spectral_gap(sd, degeneracy_tol)
    if gap.degeneracy != 1:
        raise DegenerateGround(f"ground state is {gap.degeneracy}-fold degenerate")
    U, E = sd.eigenvectors, sd.eigenvalues - sd.ground_energy
    psi0 = fixed_phase(np.array(U[:, 0]))
    coeff = U.conj().T @ (dH @ psi0)
    coeff[0] = 0.0
    coeff[1:] /= -E[1:]
    return U @ coeff


def variational_gap_bound(sd: SpectralData, psi0: np.ndarray, psi1: np.ndarray) -> float:
    """``<psi1, (H - E_0) psi1> / (1 - |<psi0, psi1>|^2)``; never below the gap."""
    n1 = np.linalg.norm(psi1)
    if abs(n1 - 1) > 1e-6:
        raise PreconditionError(f"||psi1|| = {n1:.9g} is not 1 within 1e-6")
    psi1 = psi1 / n1
    ov = abs(np.vdot(psi0, psi1))
    if ov >= 1 - 1e-9:
        raise OverlapTooLarge(f"|<psi0, psi1>| = {ov:.12g} is too close to 1")
    energy = np.vdot(psi1, sd.origin @ psi1).real - sd.ground_energy
    return float(energy / (1 - ov**2))


def reduced_trace_distance(psi: np.ndarray, phi: np.ndarray, keep: Sequence[int],
                           dims: Sequence[int]) -> float:
    """``||Tr_{keep^c}(|psi><psi| - |phi><phi|)||_1``."""
    rho = np.outer(psi, psi.conj()) - np.outer(phi, phi.conj())
    return float(np.abs(np.linalg.eigvalsh(partial_trace(rho, keep, dims))).sum())


@dataclass
class QuasiAdiabaticRun:
    theta_grid: np.ndarray
    states: list
    norms: np.ndarray
    overlaps: np.ndarray
    energies: np.ndarray
    energies_single: np.ndarray
    params: HastingsParams
    gap: float
    max_antihermitian_defect: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def psi0(self) -> np.ndarray:
        return self.states[0]

    @property
    def psi1(self) -> np.ndarray:
        return self.states[-1]

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - 1)))


class _PathCache:
    """Spectral data, ``∂_1 H`` and generator of ``H_{theta,-theta}`` memoized per angle."""

    def __init__(self, spec: SpinModelSpec, m: int, params: HastingsParams, dense_cap: int):
        self.spec, self.params, self.dense_cap = spec, params, dense_cap
        self.base = TwistSpec(spec.geometry.length, m)
        self.store: dict[float, tuple] = {}
        self.max_defect = 0.0

    def __call__(self, theta: float):
        if theta not in self.store:
            tw = self.base.at(theta, -theta)
            H = assemble_hamiltonian(twisted_hamiltonian(self.spec, tw), dense_cap=self.dense_cap)
            sd = spectral_decompose(H)
            dH = assemble_hamiltonian(twist_derivative(self.spec, tw, 1), dense_cap=self.dense_cap)
            B = hastings_generator(sd, dH, self.params)
            self.max_defect = max(self.max_defect, operator_norm(B + B.conj().T))
            self.store[theta] = (sd, B)
        return self.store[theta]


def hastings_solve(spec: SpinModelSpec, params: HastingsParams | None = None,
                   theta_steps: int | None = None, m: int = 0,
                   dense_cap: int = DEFAULT_DENSE_CAP) -> QuasiAdiabaticRun:
    """Integrate ``∂_theta psi = B_{alpha,T}(theta) psi`` on ``[0, 2 pi]`` by fixed-step RK4.

    ``psi(0)`` is the (phase-fixed) ground state of ``H_{0,0}``; ``B`` is
    rebuilt from a fresh eigendecomposition of ``H_{theta,-theta}`` at every
    stage.  ``params=None`` uses ``alpha = gamma/L``, ``t_cut = L/2``;
    ``theta_steps`` overrides ``params.ode_step``.
    """
    L = spec.geometry.length
    TwistSpec(L, m)
    sd0 = spectral_decompose(assemble_hamiltonian(
        twisted_hamiltonian(spec, TwistSpec(L, m)), dense_cap=dense_cap))
    psi0 = ground_state(sd0)
    gap = spectral_gap(sd0).gap
    if params is None:
        params = HastingsParams.default(gap, L)
    steps = theta_steps if theta_steps is not None else max(1, round(TWO_PI / params.ode_step))
    h = TWO_PI / steps
    cache = _PathCache(spec, m, params, dense_cap)

    def rhs(theta, psi):
        return cache(theta)[1] @ psi

    grid = np.linspace(0.0, TWO_PI, steps + 1)
    states = [psi0.copy()]
    psi = psi0.copy()
    for k in range(steps):
        th = grid[k]
        mid = th + 0.5 * h
        k1 = rhs(th, psi)
        k2 = rhs(mid, psi + 0.5 * h * k1)
        k3 = rhs(mid, psi + 0.5 * h * k2)
        k4 = rhs(grid[k + 1], psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(np.linalg.norm(psi) - 1)
        if drift > 1e-4:
            raise NormDrift(f"norm drift {drift:.3g} at theta={grid[k + 1]:.6g}; reduce ode_step")
        states.append(psi.copy())

    norms = np.array([np.linalg.norm(s) for s in states])
    overlaps = np.array([np.vdot(psi0, s) for s in states])
    energies = np.array([np.vdot(s, cache(th)[0].origin @ s).real for th, s in zip(grid, states)])
    single = []
    for th, s in zip(grid, states):
        Hs = assemble_hamiltonian(twisted_hamiltonian(spec, TwistSpec(L, m, th, 0.0)), dense_cap=dense_cap)
        single.append(np.vdot(s, Hs @ s).real)
    run = QuasiAdiabaticRun(grid, states, norms, overlaps, energies, np.array(single), params,
                            gap, cache.max_defect)
    run.diagnostics = lsm_diagnostics(spec, run, cache, m)
    return run


def lsm_diagnostics(spec: SpinModelSpec, run: QuasiAdiabaticRun, cache: _PathCache, m: int) -> dict:
    """Translation eigenphase, ``||T psi_1 + psi_1||`` and reduced-state trace distances."""
    geom = spec.geometry
    T = translation_unitary(spec)
    psi0, psi1 = run.psi0, run.psi1
    lam = complex(np.vdot(psi0, T @ psi0))
    if abs(lam) > 1e-8:
        defect = float(np.linalg.norm(T @ psi1 * (np.conj(lam) / abs(lam)) + psi1))
    else:
        defect = math.nan  # psi_0 is not a translation eigenvector
    half = max(0, geom.length // 4 - 2)
    keep_cols = range(m - half, m + half + 1)
    keep = sorted({x for n in keep_cols for x in geom.column(n)})
    dims = list(spec.space.local_dims)
    distances = []
    for th, s in zip(run.theta_grid, run.states):
        g = ground_state(cache(th)[0])
        distances.append(reduced_trace_distance(s / np.linalg.norm(s), g, keep, dims))
    try:
        quotient = variational_gap_bound(cache(0.0)[0], psi0, psi1)
    except OverlapTooLarge:
        quotient = math.nan
    return {
        "translation_eigenvalue": [lam.real, lam.imag],
        "translated_psi1_defect": defect,
        "overlap_psi0_psi1": [run.overlaps[-1].real, run.overlaps[-1].imag],
        "reduced_region": keep,
        "max_reduced_trace_distance": float(max(distances)),
        "variational_gap_bound": quotient,
        "gap": run.gap,
    }


def total_sz_sectors(spec: SpinModelSpec) -> dict[float, np.ndarray]:
    """Basis indices grouped by total ``S^3``."""
    m = np.real(np.diag(spin_matrices(spec.spin)[2]))
    total = np.zeros(1)
    for _ in range(spec.geometry.n_sites):
        total = (m[:, None] + total[None, :]).ravel()
    keys = np.round(2 * total).astype(int)
    return {k / 2: np.flatnonzero(keys == k) for k in np.unique(keys)}


def _lowest_by_sectors(H, sectors: dict, k: int) -> np.ndarray:
    labels = np.empty(H.shape[0], dtype=int)
    for i, idx in enumerate(sectors.values()):
        labels[idx] = i
    coo = H.tocoo()
    leak = np.abs(coo.data[labels[coo.row] != labels[coo.col]]).sum()
    if leak > 1e-12:
        raise PreconditionError(f"Hamiltonian mixes total-S3 sectors (leak {leak:.3g})")
    vals = []
    for idx in sectors.values():
        block = H[idx][:, idx].toarray()
        vals.append(np.linalg.eigvalsh(block)[:k])
    return np.sort(np.concatenate(vals))[:k]


def eigenvalue_scan(spec: SpinModelSpec, theta_grid: Sequence[float], k: int = 3, m: int = 0,
                    theta_prime: float = 0.0, method: str = "auto",
                    dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Lowest ``k`` eigenvalues of ``H_{theta,theta'}`` for each ``theta``; shape ``(len(grid), k)``.

    ``method="sectors"`` block-diagonalizes by total ``S^3`` (conserved by
    every twist); ``"dense"`` diagonalizes the full matrix; ``"auto"`` picks
    sectors above dimension 1024.
    """
    D = spec.space.dim()
    check_cap(D, dense_cap)
    if method == "auto":
        method = "sectors" if D > 1024 else "dense"
    if method not in ("dense", "sectors"):
        raise ValueError(f"unknown method {method!r}")
    if not 1 <= k <= D:
        raise ValueError("k must be between 1 and the Hilbert dimension")
    sectors = total_sz_sectors(spec) if method == "sectors" else None
    L = spec.geometry.length
    out = np.empty((len(theta_grid), k))
    for i, th in enumerate(theta_grid):
        phi = twisted_hamiltonian(spec, TwistSpec(L, m, float(th), float(theta_prime)))
        if method == "dense":
            H = assemble_hamiltonian(phi, dense_cap=dense_cap)
            out[i] = np.linalg.eigvalsh(0.5 * (H + H.conj().T))[:k]
        else:
            H = assemble_hamiltonian(phi, sparse=True)
            out[i] = _lowest_by_sectors(H, sectors, k)
    return out
