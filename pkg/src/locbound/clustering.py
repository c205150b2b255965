"""Spectral gaps, the exponential clustering envelope, and the Gaussian kernel identity.

All energies are measured from the ground energy, so ``H Ω = 0`` for a
ground vector ``Ω``.  Everything is finite-volume: the gap is the gap of the
simulated Hamiltonian, while the analytic constants only depend on the site
space and the interaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    AllDegenerate,
    BRange,
    BoundViolated,
    ConditionViolated,
    DegenerateGround,
    PreconditionError,
    QuadratureFailure,
)
from .interaction import SpinModel, interaction_norm_a, phi_boundary
from .metric_space import DecayProfile, SiteSpace, convolution_constant, pair_sum_norm, set_distance
from .quantum import ObservableWithSupport, SpectralData, operator_norm

DEGENERACY_TOL = 1e-8
ATOL = 1e-12


@dataclass(frozen=True)
class GapReport:
    ground_energy: float
    gap: float
    degeneracy: int


def spectral_gap(sd: SpectralData, degeneracy_tol: float = DEGENERACY_TOL) -> GapReport:
    """Distance from ``E_0`` to the next level more than ``degeneracy_tol`` above it."""
    shifted = sd.eigenvalues - sd.ground_energy
    above = shifted[shifted > degeneracy_tol]
    if above.size == 0:
        raise AllDegenerate("every eigenvalue lies within the degeneracy tolerance of E_0")
    return GapReport(sd.ground_energy, float(above[0]), int(np.sum(shifted <= degeneracy_tol)))


@dataclass(frozen=True)
class ClusteringConstants:
    mu: float
    C: float
    rhs: float


def clustering_rhs(phi, space: SiteSpace, profile: DecayProfile, X, Y, gamma: float, b: float,
                   normA: float, normB: float) -> ClusteringConstants:
    """Decay rate ``mu``, prefactor ``C(A, B, gamma)`` and the bound at imaginary shift ``b``.

    ``mu = a gamma / (4 ||Phi||_a C_a + gamma)`` and the bound is
    ``C exp(-mu d (1 + gamma^2 b^2 / (4 mu^2 d^2)))``, valid for
    ``0 <= b gamma <= 2 mu d``.
    """
    a = profile.rate
    if a <= 0:
        raise PreconditionError("clustering needs a > 0")
    if gamma <= 0:
        raise PreconditionError("gap must be positive")
    if b < 0:
        raise BRange("b must be nonnegative")
    d = set_distance(space, X, Y)
    if d <= 0:
        raise PreconditionError("d(X, Y) must be positive")
    Ca = convolution_constant(space, profile)
    mu = a * gamma / (4 * interaction_norm_a(phi, space, profile) * Ca + gamma)
    if b * gamma > 2 * mu * d:
        raise BRange(f"b*gamma = {b * gamma:.6g} exceeds 2*mu*d = {2 * mu * d:.6g}")
    f0 = pair_sum_norm(space, profile.with_rate(0.0))
    nb = min(len(phi_boundary(phi, X)), len(phi_boundary(phi, Y)))
    C = normA * normB * (1 + math.sqrt(1 / (mu * d)) + 2 * f0 / (math.pi * Ca) * nb)
    rhs = C * math.exp(-mu * d * (1 + gamma**2 * b**2 / (4 * mu**2 * d**2)))
    return ClusteringConstants(mu, C, rhs)


def centered(sd: SpectralData, omega: np.ndarray, B: np.ndarray,
             degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """``B - <Ω, B Ω>`` when the ground state is unique, otherwise ``B`` unchanged."""
    if spectral_gap(sd, degeneracy_tol).degeneracy == 1:
        return B - np.vdot(omega, B @ omega) * np.eye(B.shape[0])
    return B


def connected_correlation(sd: SpectralData, omega: np.ndarray, A: np.ndarray, B: np.ndarray,
                          b: float = 0.0, degeneracy_tol: float = DEGENERACY_TOL) -> complex:
    """``<Ω, A τ_{ib}(B') Ω>`` summed over the excited part of the spectrum.

    ``B'`` is ``B`` centered on the ground state (unique ground state only).
    Computed as ``sum_{E > 0} exp(-bE) <A* Ω, P_E B' Ω>``.
    """
    omega = np.asarray(omega, dtype=complex)
    if abs(np.linalg.norm(omega) - 1) > 1e-10:
        raise PreconditionError("Ω must be normalized")
    E = sd.eigenvalues - sd.ground_energy
    U = sd.eigenvectors
    if np.linalg.norm(sd.origin @ omega - sd.ground_energy * omega) > 1e-8 * (1 + abs(E[-1])):
        raise PreconditionError("Ω is not a ground vector")
    Bc = centered(sd, omega, B, degeneracy_tol)
    ground = E <= degeneracy_tol
    c = U.conj().T @ (Bc @ omega)
    cstar = U.conj().T @ (Bc.conj().T @ omega)
    if np.linalg.norm(c[ground]) > 1e-10 or np.linalg.norm(cstar[ground]) > 1e-10:
        raise ConditionViolated("P_0 B Ω or P_0 B* Ω is nonzero")
    d = U.conj().T @ (A.conj().T @ omega)
    weights = np.where(ground, 0.0, np.exp(-b * np.where(ground, 0.0, E)))
    return complex(np.sum(weights * d.conj() * c))


@dataclass
class ClusteringRow:
    pair: tuple[int, int]
    d: float
    b: float
    lhs_abs: float
    mu: float
    C: float
    rhs: float
    trivial_bound: float
    in_range: bool


def verify_clustering(model: SpinModel, A_list: Sequence[ObservableWithSupport],
                      B_list: Sequence[ObservableWithSupport], b_grid: Sequence[float],
                      profile: DecayProfile, degeneracy_tol: float = DEGENERACY_TOL,
                      strict: bool = True) -> list[ClusteringRow]:
    """Check ``|<Ω, A τ_{ib}(B') Ω>|`` against the clustering bound for every pair and ``b``.

    Pairs come from zipping ``A_list`` with ``B_list``.  ``||B'||`` (the norm of
    the centered observable) is used in both bounds.  Rows with
    ``b gamma > 2 mu d`` are checked against ``||A|| ||B'|| exp(-b gamma)``.
    """
    sd = model.spectrum
    gap = spectral_gap(sd, degeneracy_tol)
    if gap.degeneracy != 1:
        raise DegenerateGround(f"ground state is {gap.degeneracy}-fold degenerate")
    omega = sd.eigenvectors[:, 0]
    phi, space = model.interaction, model.space
    rows = []
    for A, B in zip(A_list, B_list):
        Af, Bf = model.embed(A), model.embed(B)
        Bc = centered(sd, omega, Bf, degeneracy_tol)
        nA, nB = A.norm, operator_norm(Bc)
        d = set_distance(space, A.support, B.support)
        pair = (A.support[0], B.support[0])
        for b in b_grid:
            lhs = abs(connected_correlation(sd, omega, Af, Bf, b, degeneracy_tol))
            trivial = nA * nB * math.exp(-b * gap.gap)
            try:
                k = clustering_rhs(phi, space, profile, A.support, B.support, gap.gap, b, nA, nB)
                row = ClusteringRow(pair, d, float(b), lhs, k.mu, k.C, k.rhs, trivial, True)
                bound = k.rhs
            except BRange:
                mu = clustering_rhs(phi, space, profile, A.support, B.support,
                                    gap.gap, 0.0, nA, nB).mu
                row = ClusteringRow(pair, d, float(b), lhs, mu, math.nan, math.nan, trivial, False)
                bound = trivial
            if strict and lhs > bound + ATOL:
                raise BoundViolated(f"clustering bound violated for pair {pair}, b={b}", row)
            rows.append(row)
    return rows


def kernel(E, alpha: float, z):
    """Closed form of ``(1/(2 sqrt(pi alpha))) ∫_0^∞ exp(iwz) exp(-(w-E)^2/(4 alpha)) dw``.

    Real ``z = it`` with ``t >= 0`` (the imaginary-time case) uses a form
    that cannot overflow; general complex ``z`` uses the complex ``erfcx``.
    """
    E = np.asarray(E, dtype=float)
    z = complex(z)
    sa = math.sqrt(alpha)
    if z.real == 0.0:
        t = z.imag
        x = (2 * alpha * t - E) / (2 * sa)
        with np.errstate(over="ignore", under="ignore"):
            pos = 0.5 * np.exp(-E**2 / (4 * alpha)) * special.erfcx(np.maximum(x, 0.0))
            neg = 0.5 * np.exp(alpha * t**2 - t * E) * special.erfc(np.minimum(x, 0.0))
        return np.where(x >= 0, pos, neg)
    arg = -(E + 2j * alpha * z) / (2 * sa)
    return 0.5 * np.exp(-E**2 / (4 * alpha)) * special.erfcx(arg)


def _complex_quad(f, a, b, points=None, epsabs=1e-13, epsrel=1e-12, limit=1000):
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    if points is not None and math.isfinite(a) and math.isfinite(b):
        kw["points"] = points
    out = []
    for part in (lambda s: f(s).real, lambda s: f(s).imag):
        val, err = integrate.quad(part, a, b, full_output=False, **kw)
        if not math.isfinite(val) or err > 1e-9:
            raise QuadratureFailure(f"quadrature error estimate {err:.3g} on [{a}, {b}]")
        out.append(val)
    return complex(out[0], out[1])


def gaussian_kernel_identity(E: float, alpha: float, z: complex,
                             T_cut: float | None = None) -> tuple[complex, complex]:
    """Both sides of the Gaussian-regularized Cauchy kernel identity, each by quadrature.

    ``lhs = (1/(2 pi i)) ∫_{-T}^{T} exp(iEt) exp(-alpha t^2) / (t - z) dt`` and
    ``rhs = (1/(2 sqrt(pi alpha))) ∫_0^∞ exp(iwz) exp(-(w-E)^2/(4 alpha)) dw``.
    The default cutoff makes the discarded Gaussian tail below ``1e-16``.
    """
    z = complex(z)
    if z.imag <= 0:
        raise PreconditionError("z must lie in the upper half-plane")
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    if T_cut is None:
        T_cut = math.sqrt(37.0 / alpha) + abs(z.real)
    left = lambda s: np.exp(1j * E * s - alpha * s * s) / (s - z)
    pts = [z.real] if -T_cut < z.real < T_cut else None
    lhs = (_complex_quad(left, -T_cut, 0.0, pts if pts and z.real < 0 else None)
           + _complex_quad(left, 0.0, T_cut, pts if pts and z.real > 0 else None)) / (2j * math.pi)
    right = lambda w: np.exp(1j * w * z - (w - E) ** 2 / (4 * alpha))
    w_hi = max(E, 0.0) + math.sqrt(4 * alpha * 40.0)
    rhs = _complex_quad(right, 0.0, w_hi, [E] if 0 < E < w_hi else None) / (2 * math.sqrt(math.pi * alpha))
    return lhs, rhs
