"""Lieb-Robinson bounds and quasi-locality estimates, checked against exact dynamics.

Every ``*_check`` function computes an empirical quantity by dense
simulation next to its analytic bound and raises ``BoundViolated`` if the
bound fails.  ``ATOL`` absorbs floating roundoff in the empirical side only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._quadrature import adaptive_simpson
from .errors import (
    BoundViolated,
    DegenerateNorm,
    EnumerationCap,
    NotProductState,
    PreconditionError,
    RateZero,
)
from .interaction import (
    Interaction,
    SpinModel,
    assemble_hamiltonian,
    interaction_norm_a,
    local_surface_norm,
    phi_boundary,
    surface_sets,
)
from .metric_space import DecayProfile, SiteSpace, convolution_constant, pair_sum_norm, set_distance
from .quantum import (
    ObservableWithSupport,
    commutator,
    conditional_expectation,
    embed,
    embed_local,
    evolution_family,
    heisenberg_evolve,
    operator_norm,
    positions,
    spectral_decompose,
)

ATOL = 1e-12
# Product-state prefactor uses the a = 0 norm ||F_0||.
F_NORM_CONVENTION = "||F|| in the product-state prefactor evaluated as ||F_0|| (a = 0)"


def _lr_rate(phi, space, profile) -> float:
    """``||Phi||_a * C_a``."""
    return interaction_norm_a(phi, space, profile) * convolution_constant(space, profile)


def d_a_factor(phi: Interaction, space: SiteSpace, profile: DecayProfile,
               X: Iterable[int], Y: Iterable[int]) -> float:
    """``D_a(X, Y)``: the smaller of the two surface-weighted double sums."""
    X, Y = sorted(set(X)), sorted(set(Y))
    F = profile(space.distance)[np.ix_(X, Y)]
    wx = np.array([local_surface_norm(phi, space, profile, x, X) for x in X])
    wy = np.array([local_surface_norm(phi, space, profile, y, Y) for y in Y])
    return float(min((wx[:, None] * F).sum(), (F * wy[None, :]).sum()))


def lr_rhs(phi: Interaction, space: SiteSpace, profile: DecayProfile, X, Y, t: float,
           overlapping: bool = False) -> float:
    """Lieb-Robinson bound on ``||[tau_t(A), B]||`` for unit-norm ``A``, ``B``.

    With ``overlapping=True`` the factor ``exp(2kt) - 1`` is replaced by
    ``exp(2kt)``, which is the variant for supports that intersect.
    """
    if not overlapping and set_distance(space, X, Y) <= 0:
        raise PreconditionError("lr_rhs needs d(X, Y) > 0 (pass overlapping=True otherwise)")
    k = _lr_rate(phi, space, profile)
    if k == 0:
        raise DegenerateNorm("||Phi||_a C_a = 0; use lr_rhs_small_coupling")
    growth = math.exp(2 * k * abs(t)) if overlapping else math.expm1(2 * k * abs(t))
    return 2.0 / k * growth * d_a_factor(phi, space, profile, X, Y)


def lr_rhs_small_coupling(phi, space, profile, X, Y, t: float) -> float:
    """The ``||Phi||_a C_a -> 0`` limit of :func:`lr_rhs`: ``4|t| D_a(X, Y)``."""
    return 4.0 * abs(t) * d_a_factor(phi, space, profile, X, Y)


def lr_envelope(phi, space, profile, X, Y, t: float) -> float:
    """Exponential envelope ``(2||F_0||/C_a) min|∂X|,|∂Y| exp(-a d + 2||Phi||_a C_a |t|)``.

    Normalized to unit ``||A||``, ``||B||``; it dominates :func:`lr_rhs`.
    """
    C = convolution_constant(space, profile)
    f0 = pair_sum_norm(space, profile.with_rate(0.0))
    nb = min(len(phi_boundary(phi, X)), len(phi_boundary(phi, Y)))
    d = set_distance(space, X, Y)
    k = _lr_rate(phi, space, profile)
    return 2.0 * f0 / C * nb * math.exp(-profile.rate * d + 2 * k * abs(t))


def lr_velocity(phi: Interaction, space: SiteSpace, profile: DecayProfile,
                a_grid: Sequence[float]) -> float:
    """Grid infimum of ``2 ||Phi||_a C_a / a`` over the rates in ``a_grid``."""
    if not len(a_grid):
        raise ValueError("a_grid must be nonempty")
    if any(a <= 0 for a in a_grid):
        raise RateZero("velocity rates must be positive")
    return min(2.0 * _lr_rate(phi, space, profile.with_rate(a)) / a for a in a_grid)


@dataclass
class LRBoundReport:
    time: float
    empirical: float
    analytic: float
    envelope: float
    rate: float
    inputs: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.empirical / self.analytic if self.analytic > 0 else math.nan


def lr_empirical_sweep(model: SpinModel, A: ObservableWithSupport, B: ObservableWithSupport,
                       t_grid: Sequence[float], profile,
                       strict: bool = True) -> list[LRBoundReport]:
    """Compare ``||[tau_t(A), B]||`` with ``||A|| ||B||`` times :func:`lr_rhs` on a time grid.

    ``profile`` may be a single profile or a list of them (e.g. several rates);
    the commutator norms are computed once and reports are ordered by profile,
    then time.
    """
    profiles = [profile] if isinstance(profile, DecayProfile) else list(profile)
    phi, space = model.interaction, model.space
    X, Y = A.support, B.support
    if set_distance(space, X, Y) <= 0:
        raise PreconditionError("supports of A and B must be at positive distance")
    nA, nB = A.norm, B.norm
    evolve = evolution_family(model.spectrum, model.embed(A))
    Bf = model.embed(B)
    empirical = [operator_norm(commutator(evolve(t), Bf)) for t in t_grid]
    reports = []
    for prof in profiles:
        for t, emp in zip(t_grid, empirical):
            try:
                bound = lr_rhs(phi, space, prof, X, Y, t)
            except DegenerateNorm:
                bound = lr_rhs_small_coupling(phi, space, prof, X, Y, t)
            rep = LRBoundReport(float(t), emp, nA * nB * bound,
                                nA * nB * lr_envelope(phi, space, prof, X, Y, t),
                                prof.rate, {"X": X, "Y": Y, "normA": nA, "normB": nB})
            if strict and (emp > rep.analytic + ATOL or emp > 2 * nA * nB + ATOL):
                raise BoundViolated(f"Lieb-Robinson bound violated at t={t}, a={prof.rate}", rep)
            reports.append(rep)
    return reports


@dataclass
class SeriesCheck:
    exact: float
    bound: float
    chains: int


def series_coefficient_check(phi: Interaction, space: SiteSpace, profile: DecayProfile,
                             X, Y, n: int, cap: int = 10**6) -> SeriesCheck:
    """Exact ``a_n`` by chain enumeration against its ``(||Phi||_a C_a)^(n-1)`` bound.

    A chain is ``Z_1 ∈ S(X), Z_2 ∈ S(Z_1), ..., Z_n ∈ S(Z_{n-1})``; it
    contributes ``prod ||Phi(Z_i)||`` when ``Z_n`` meets ``Y``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    X, Y = sorted(set(X)), set(Y)
    surfaces = {Z: surface_sets(phi, Z) for Z in phi.grouped}
    total = 0.0
    count = 0
    stack = [(Z, 1, phi.norms[Z]) for Z in surface_sets(phi, X)]
    while stack:
        Z, depth, weight = stack.pop()
        count += 1
        if count > cap:
            raise EnumerationCap(f"more than {cap} chains")
        if depth == n:
            if Y.intersection(Z):
                total += weight
            continue
        stack.extend((Z2, depth + 1, weight * phi.norms[Z2]) for Z2 in surfaces[Z])
    k = _lr_rate(phi, space, profile)
    F = profile(space.distance)[np.ix_(X, sorted(Y))]
    wx = np.array([local_surface_norm(phi, space, profile, x, X) for x in X])
    bound = k ** (n - 1) * float((wx[:, None] * F).sum())
    if total > bound:
        raise BoundViolated(f"a_{n} = {total} exceeds its bound {bound}", SeriesCheck(total, bound, count))
    return SeriesCheck(total, bound, count)


def localization_ball(phi: Interaction, space: SiteSpace, profile: DecayProfile, X,
                      t: float, eps: float, volume: Iterable[int] | None = None) -> tuple[int, ...]:
    """``{x : d(x, X) <= (2 ||Phi||_a C_a / a)|t| + eps}`` within ``volume``."""
    if profile.rate <= 0:
        raise RateZero("the localization ball needs a > 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    radius = 2.0 * _lr_rate(phi, space, profile) / profile.rate * abs(t) + eps
    dist = space.distance_to_set(X)
    volume = space.vertices if volume is None else volume
    return tuple(sorted(x for x in volume if dist[x] <= radius))


@dataclass
class LocalizationCheck:
    time: float
    eps: float
    empirical: float
    analytic: float
    ball: tuple[int, ...]
    vacuous: bool  # the ball covers the whole volume


def localization_error_check(model: SpinModel, A: ObservableWithSupport, t: float, eps: float,
                             profile: DecayProfile, strict: bool = True) -> LocalizationCheck:
    """``||tau_t(A) - <tau_t(A)>_{ball^c}||`` against ``(2||A|| |∂X| / C_a) ||F_0|| e^{-a eps}``."""
    phi, space = model.interaction, model.space
    ball = localization_ball(phi, space, profile, A.support, t, eps, model.volume)
    At = heisenberg_evolve(model.spectrum, model.embed(A), t)
    local = conditional_expectation(At, ball, model.volume, space)
    emp = operator_norm(At - local)
    C = convolution_constant(space, profile)
    f0 = pair_sum_norm(space, profile.with_rate(0.0))
    analytic = 2 * A.norm * len(phi_boundary(phi, A.support)) / C * f0 * math.exp(-profile.rate * eps)
    out = LocalizationCheck(float(t), float(eps), emp, analytic, ball, len(ball) == len(model.volume))
    if strict and emp > analytic + ATOL:
        raise BoundViolated(f"localization bound violated at t={t}, eps={eps}", out)
    return out


@dataclass
class TruncationRow:
    time: float
    empirical: float
    integral_bound: float
    analytic: float
    ball_size: int
    vacuous: bool  # the ball covers the whole volume


def _split_hamiltonian(model: SpinModel, ball: Sequence[int]):
    """Surface terms of the ball inside the volume, as one dense operator."""
    phi = model.interaction
    vol = set(model.volume)
    surf = set(surface_sets(phi, ball))
    H2 = phi.restricted(lambda Z: Z in surf and vol.issuperset(Z))
    return assemble_hamiltonian(H2, model.volume, model.dense_cap)


def truncation_error_check(model: SpinModel, A: ObservableWithSupport, T: float, eps: float,
                           t_grid: Sequence[float], profile: DecayProfile,
                           quad_tol: float = 1e-8, strict: bool = True) -> list[TruncationRow]:
    """Compare full dynamics with dynamics generated by the ball Hamiltonian ``H_{B_T}``.

    Each row carries the empirical difference, the integral bound obtained by
    dropping the surface terms (adaptive Simpson at ``quad_tol``), and the
    closed-form analytic bound.
    """
    if any(abs(t) > T for t in t_grid):
        raise PreconditionError("all grid times must satisfy |t| <= T")
    phi, space = model.interaction, model.space
    ball = localization_ball(phi, space, profile, A.support, T, eps, model.volume)
    vol_dims = [space.local_dims[x] for x in model.volume]
    ball_pos = positions(ball, model.volume)

    H_ball = assemble_hamiltonian(phi, ball, model.dense_cap)
    sd_ball = spectral_decompose(H_ball)
    ball_family = evolution_family(sd_ball, embed_local(A, ball, space, model.dense_cap))

    def ball_evolved(s):
        return embed(ball_family(s), ball_pos, vol_dims)

    H2 = _split_hamiltonian(model, ball)
    full_family = evolution_family(model.spectrum, model.embed(A))

    def integrand(s):
        return operator_norm(commutator(H2, ball_evolved(s)))

    C = convolution_constant(space, profile)
    fa = pair_sum_norm(space, profile)
    f0 = pair_sum_norm(space, profile.with_rate(0.0))
    nb = len(phi_boundary(phi, A.support))
    analytic = A.norm * f0 * nb / C**2 * (C + fa) * math.exp(-profile.rate * eps)

    # cumulative integral over the sorted |t| values
    taus = sorted({abs(float(t)) for t in t_grid})
    span = max(taus) if taus else 0.0
    cumulative = {}
    acc, prev = 0.0, 0.0
    for tau in taus:
        if tau > prev:
            acc += adaptive_simpson(integrand, prev, tau, quad_tol * (tau - prev) / span)
        cumulative[tau] = acc
        prev = tau

    rows = []
    for t in t_grid:
        emp = operator_norm(full_family(t) - ball_evolved(t))
        row = TruncationRow(float(t), emp, cumulative[abs(float(t))], analytic,
                            len(ball), len(ball) == len(model.volume))
        if strict and (emp > analytic + ATOL or emp > row.integral_bound + 1e-6):
            raise BoundViolated(f"truncation bound violated at t={t}", row)
        rows.append(row)
    return rows


def _product_vector(model: SpinModel, state) -> np.ndarray:
    space = model.space
    dims = [space.local_dims[x] for x in model.volume]
    if isinstance(state, np.ndarray) and state.ndim == 1 and state.size == math.prod(dims):
        psi = state.astype(complex)
        if abs(np.linalg.norm(psi) - 1) > 1e-10:
            raise NotProductState("state is not normalized")
        T = psi.reshape(dims[::-1])
        n = len(dims)
        for k in range(n):
            ax = n - 1 - k
            M = np.moveaxis(T, ax, 0).reshape(dims[k], -1)
            s = np.linalg.svd(M, compute_uv=False)
            if s.size > 1 and s[1] > 1e-10:
                raise NotProductState(f"state is entangled across site {model.volume[k]}")
        return psi
    factors = [np.asarray(f, dtype=complex).ravel() for f in state]
    if len(factors) != len(dims) or any(f.size != d for f, d in zip(factors, dims)):
        raise NotProductState("need one local vector per volume site with matching dimension")
    if any(abs(np.linalg.norm(f) - 1) > 1e-10 for f in factors):
        raise NotProductState("local factors must be unit vectors")
    return model.vector_from_product(factors)


def neel_state(model: SpinModel) -> list[np.ndarray]:
    """Alternating extremal ``S^3`` eigenvectors ``|S>, |-S>, ...``."""
    out = []
    for i, x in enumerate(model.volume):
        d = model.space.local_dims[x]
        v = np.zeros(d, dtype=complex)
        v[0 if i % 2 == 0 else d - 1] = 1.0
        out.append(v)
    return out


@dataclass
class ProductCorrelationRow:
    time: float
    empirical: float
    analytic: float


def growth_function(phi, space, profile, t: float) -> float:
    """``G_a(t)`` with the time integral done in closed form."""
    C = convolution_constant(space, profile)
    fa = pair_sum_norm(space, profile)
    norm = interaction_norm_a(phi, space, profile)
    k = norm * C
    integral = abs(t) if k == 0 else math.expm1(2 * k * abs(t)) / (2 * k)
    return (C + fa) / C * norm * integral


def product_state_correlation_check(model: SpinModel, A: ObservableWithSupport,
                                    B: ObservableWithSupport, product_state,
                                    t_grid: Sequence[float], profile: DecayProfile,
                                    strict: bool = True) -> list[ProductCorrelationRow]:
    """Connected correlations built from a product state, against their growth bound."""
    phi, space = model.interaction, model.space
    d = set_distance(space, A.support, B.support)
    if d <= 0:
        raise PreconditionError("d(X, Y) must be positive")
    omega = _product_vector(model, product_state)
    sd = model.spectrum
    U, E = sd.eigenvectors, sd.eigenvalues - sd.ground_energy
    c = U.conj().T @ omega
    Af, Bf = model.embed(A), model.embed(B)
    ABf = Af @ Bf
    f0 = pair_sum_norm(space, profile.with_rate(0.0))
    nb = len(phi_boundary(phi, A.support)) + len(phi_boundary(phi, B.support))
    prefactor = 4 * A.norm * B.norm * f0 * nb * math.exp(-profile.rate * d)
    rows = []
    for t in t_grid:
        psi = omega if t == 0 else U @ (np.exp(-1j * t * E) * c)
        ev = lambda M: np.vdot(psi, M @ psi)
        emp = float(abs(ev(ABf) - ev(Af) * ev(Bf)))
        row = ProductCorrelationRow(float(t), emp, prefactor * growth_function(phi, space, profile, t))
        if strict and emp > row.analytic + ATOL:
            raise BoundViolated(f"product-state correlation bound violated at t={t}", row)
        rows.append(row)
    return rows


@dataclass
class MultiCommutatorCheck:
    norm: float
    quasi_supports_disjoint: bool
    balls: tuple[tuple[int, ...], ...]


def multi_commutator_check(model: SpinModel, At, Bt, Ct, eps: float,
                           profile: DecayProfile) -> MultiCommutatorCheck:
    """``||[tau_t1(A), [tau_t2(B), tau_t3(C)]]||`` and whether the balls force it to vanish.

    The flag is true when the B and C balls are disjoint, or when the A ball
    misses both of them; either makes the nested commutator of the
    ball-localized operators exactly zero.
    """
    sd = model.spectrum
    evolved, balls = [], []
    for obs, t in (At, Bt, Ct):
        evolved.append(heisenberg_evolve(sd, model.embed(obs), t))
        balls.append(localization_ball(model.interaction, model.space, profile,
                                       obs.support, t, eps, model.volume))
    a, b, c = evolved
    norm = operator_norm(commutator(a, commutator(b, c)))
    bA, bB, bC = (set(b) for b in balls)
    disjoint = not (bB & bC) or not (bA & (bB | bC))
    return MultiCommutatorCheck(norm, disjoint, tuple(balls))


def analytic_constants(phi, space, profile) -> dict:
    """The constants every bound is assembled from, for reporting."""
    return {
        "rate": profile.rate,
        "f_norm": pair_sum_norm(space, profile),
        "f0_norm": pair_sum_norm(space, profile.with_rate(0.0)),
        "conv": convolution_constant(space, profile),
        "phi_norm": interaction_norm_a(phi, space, profile),
    }
