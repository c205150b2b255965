from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_model
from locbound.errors import (
    BoundViolated,
    DegenerateNorm,
    EnumerationCap,
    NotProductState,
    PreconditionError,
    RateZero,
)
from locbound.interaction import Interaction, SpinModel, spin_component
from locbound.locality import (
    d_a_factor,
    growth_function,
    localization_ball,
    localization_error_check,
    lr_empirical_sweep,
    lr_envelope,
    lr_rhs,
    lr_rhs_small_coupling,
    lr_velocity,
    multi_commutator_check,
    neel_state,
    product_state_correlation_check,
    series_coefficient_check,
    truncation_error_check,
)
from locbound.metric_space import DecayProfile, Geometry
from locbound.quantum import ObservableWithSupport
from oracles import F_power, chains, conv_const, path_distance

P2 = DecayProfile.power(2.0)


def empty_model(n):
    return SpinModel(Interaction([], Geometry("path", (n,)).build(2)))


def test_d_a_factor_cases():
    model, spec = chain_model(6)
    phi, space = model.interaction, model.space
    assert d_a_factor(Interaction([], space), space, P2, {0}, {5}) == 0
    # {1} inside {0, 1, 2}: site 1 touches no surface bond
    assert d_a_factor(phi, space, P2, {1}, {5}) > 0
    assert d_a_factor(phi, space, P2, {0, 1, 2}, {5}) == pytest.approx(
        min(3.0 * (1 / 16), 3.0 * (1 / 16)), abs=1e-14)
    # oracle: surface weight 3 times F(5) = 1/36
    assert d_a_factor(phi, space, P2, {0}, {5}) == pytest.approx(1 / 12, abs=1e-14)


def test_lr_rhs_values():
    model, _ = chain_model(6)
    phi, space = model.interaction, model.space
    assert lr_rhs(phi, space, P2, {0}, {5}, 0.0) == 0.0
    k = 3.0 * conv_const(path_distance(6), F_power(2))
    expected = 2 / k * math.expm1(2 * k) / 12
    got = lr_rhs(phi, space, P2, {0}, {5}, 1.0)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(5432150.058009154, rel=1e-12)
    with pytest.raises(PreconditionError):
        lr_rhs(phi, space, P2, {0, 1}, {1, 2}, 0.5)
    assert lr_rhs(phi, space, P2, {0, 1}, {1, 2}, 0.0, overlapping=True) > 0


@settings(max_examples=25, deadline=None)
@given(t1=st.floats(0, 1), t2=st.floats(0, 1), a=st.floats(0.1, 2))
def test_lr_rhs_monotone_and_below_envelope(t1, t2, a):
    model, _ = chain_model(6)
    phi, space = model.interaction, model.space
    prof = P2.with_rate(a)
    lo, hi = sorted((t1, t2))
    assert lr_rhs(phi, space, prof, {0}, {4}, hi) >= lr_rhs(phi, space, prof, {0}, {4}, lo)
    for t in (lo, hi):
        assert lr_rhs(phi, space, prof, {0}, {4}, t) <= lr_envelope(phi, space, prof, {0}, {4}, t) * (1 + 1e-12)


def test_small_coupling_limit():
    space = Geometry("path", (4,)).build(2)
    X = ObservableWithSupport((0, 1), np.eye(4))
    phi = Interaction([((0, 1), 1e-9 * np.diag([1.0, -1, -1, 1])), ((1, 2), 1e-9 * np.eye(4))], space)
    small = lr_rhs_small_coupling(phi, space, P2, {0}, {3}, 0.7)
    assert lr_rhs(phi, space, P2, {0}, {3}, 0.7) == pytest.approx(small, rel=1e-6)
    with pytest.raises(DegenerateNorm):
        lr_rhs(Interaction([], space), space, P2, {0}, {3}, 0.7)
    assert X.norm == 1


def test_lr_velocity():
    model, _ = chain_model(8)
    phi, space = model.interaction, model.space
    grid = [0.25, 0.5, 1.0, 2.0, 4.0]
    v = lr_velocity(phi, space, P2, grid)
    assert v == pytest.approx(54.93304451305637, rel=1e-12)
    assert lr_velocity(phi, space, P2, grid + [0.75, 1.5]) <= v
    assert lr_velocity(Interaction([], space), space, P2, grid) == 0
    with pytest.raises(RateZero):
        lr_velocity(phi, space, P2, [0.0, 1.0])


def test_lr_sweep_trivial_cases():
    model = empty_model(4)
    A = spin_component(model.space, 0, 1)
    B = spin_component(model.space, 3, 1)
    model_h, _ = chain_model(4)
    rows = lr_empirical_sweep(model_h, A, B, [0.0], P2.with_rate(1.0))
    assert rows[0].empirical == 0 and rows[0].analytic == 0
    space = model.space
    phi_tiny = Interaction([((0, 1), 1e-12 * np.eye(4))], space)
    for r in lr_empirical_sweep(SpinModel(phi_tiny), A, B, [0.0, 0.5, 1.0], P2.with_rate(1.0)):
        assert r.empirical == 0


def test_lr_sweep_chain10_site8():
    model, _ = chain_model(10)
    A = spin_component(model.space, 0, 3)
    B = spin_component(model.space, 7, 3)
    grid = np.round(np.arange(0, 2.05, 0.1), 10)
    rows = lr_empirical_sweep(model, A, B, grid, P2.with_rate(1.0))
    assert len(rows) == 21
    assert all(r.ratio < 1 for r in rows[1:])
    assert all(r.empirical <= r.analytic for r in rows)


def test_lr_sweep_strict_raises_on_forged_model():
    """A wrong Hamiltonian (long-range hop absent from phi) must trip the bound."""
    model, spec = chain_model(6)
    A = spin_component(model.space, 0, 1)
    B = spin_component(model.space, 5, 1)
    from locbound.interaction import heisenberg_bond

    phi_fake = model.interaction + Interaction([((0, 5), 1e3 * heisenberg_bond(0.5))], model.space)
    forged = SpinModel(phi_fake)
    forged.hamiltonian  # dynamics from the forged interaction
    forged.interaction = model.interaction  # bounds from the short-range one
    rows = lr_empirical_sweep(forged, A, B, [1e-3], P2.with_rate(1.0), strict=False)
    assert rows[0].empirical > rows[0].analytic
    with pytest.raises(BoundViolated):
        lr_empirical_sweep(forged, A, B, [1e-3], P2.with_rate(1.0))


def test_series_coefficients_chain4():
    model, _ = chain_model(4)
    phi, space = model.interaction, model.space
    prof = P2.with_rate(1.0)
    bn = {Z: 0.75 for Z in phi.grouped}
    r1 = series_coefficient_check(phi, space, prof, {0, 1}, {2, 3}, 1)
    r2 = series_coefficient_check(phi, space, prof, {0, 1}, {2, 3}, 2)
    assert r1.exact == pytest.approx(chains(bn, {0, 1}, {2, 3}, 1), abs=1e-15)
    assert r2.exact == pytest.approx(chains(bn, {0, 1}, {2, 3}, 2), abs=1e-15)
    assert (r1.exact, r2.exact) == pytest.approx((0.75, 0.5625), abs=1e-15)
    assert r1.exact <= r1.bound and r2.exact <= r2.bound
    from locbound.interaction import interaction_norm_a
    from locbound.metric_space import convolution_constant

    k = interaction_norm_a(phi, space, prof) * convolution_constant(space, prof)
    assert r2.bound == pytest.approx(k * r1.bound, rel=1e-12)
    zero = series_coefficient_check(Interaction([], space), space, prof, {0}, {3}, 1)
    assert (zero.exact, zero.bound) == (0, 0)
    with pytest.raises(EnumerationCap):
        series_coefficient_check(phi, space, prof, {0, 1}, {2, 3}, 6, cap=10)


def test_localization_ball():
    model, _ = chain_model(10)
    phi, space = model.interaction, model.space
    prof = P2.with_rate(1.0)
    assert localization_ball(phi, space, prof, {4}, 0.0, 0.5) == (4,)
    assert localization_ball(phi, space, prof, {4}, 0.0, 1.0) == (3, 4, 5)
    # radius 2k|t|/a + eps with k = 28.0676 (oracle constants)
    assert localization_ball(phi, space, prof, {4}, 0.02, 1.0) == (2, 3, 4, 5, 6)
    assert localization_ball(phi, space, prof, {4}, 0.02, 3.0) == tuple(range(9))
    ball = lambda t, e: set(localization_ball(phi, space, prof, {4}, t, e))
    for e in (0.5, 1.0, 2.0):
        assert ball(0.0, e) <= ball(0.01, e) <= ball(0.02, e) <= ball(-0.03, e)
    for t in (0.0, 0.01):
        assert ball(t, 0.5) <= ball(t, 1.5) <= ball(t, 2.5)
    with pytest.raises(RateZero):
        localization_ball(phi, space, P2, {4}, 0.1, 1.0)


def test_localization_error_cases():
    model = empty_model(6)
    A = spin_component(model.space, 2, 3)
    r = localization_error_check(model, A, 3.0, 0.5, P2.with_rate(1.0))
    assert r.empirical == 0


def test_localization_error_chain10():
    model, _ = chain_model(10)
    A = spin_component(model.space, 4, 3)
    prof = P2.with_rate(1.0)
    r = localization_error_check(model, A, 0.5, 2.0, prof)
    assert r.vacuous and r.empirical == pytest.approx(0, abs=1e-12)
    assert r.analytic == pytest.approx(0.07687202599220435, rel=1e-12)
    r = localization_error_check(model, A, 0.02, 1.0, prof)
    assert not r.vacuous
    assert r.empirical == pytest.approx(6.23600127563027e-07, rel=1e-7)
    assert r.empirical <= r.analytic


def test_truncation_cases():
    model = empty_model(6)
    A = spin_component(model.space, 2, 3)
    rows = truncation_error_check(model, A, 1.0, 1.0, [0.0, 0.5, 1.0], P2.with_rate(1.0))
    assert all(r.empirical == 0 for r in rows)
    model, _ = chain_model(8)
    A = spin_component(model.space, 3, 3)
    rows = truncation_error_check(model, A, 0.02, 1.0, [0.0], P2.with_rate(1.0))
    assert rows[0].empirical == 0


def test_truncation_chain10():
    model, _ = chain_model(10)
    A = spin_component(model.space, 4, 3)
    prof = P2.with_rate(1.0)
    rows = truncation_error_check(model, A, 0.02, 1.0, [0.0, 0.01, 0.02], prof)
    last = rows[-1]
    assert last.ball_size == 5 and not last.vacuous
    assert last.empirical == pytest.approx(6.236036496536033e-07, rel=1e-7)
    assert last.empirical <= last.integral_bound + 1e-6
    assert last.empirical <= last.analytic
    # the vacuous instance: ball is the whole chain, both dynamics agree
    rows = truncation_error_check(model, A, 1.0, 2.0, [0.0, 0.5, 1.0], prof)
    assert all(r.vacuous and r.empirical < 1e-12 for r in rows)
    assert rows[0].analytic == pytest.approx(0.05208124679369233, rel=1e-12)
    with pytest.raises(PreconditionError):
        truncation_error_check(model, A, 0.5, 1.0, [1.0], prof)


def test_product_state_correlations():
    model, _ = chain_model(8)
    space = model.space
    A = spin_component(space, 0, 3)
    B = spin_component(space, 5, 3)
    prof = P2.with_rate(1.0)
    rows = product_state_correlation_check(model, A, B, neel_state(model), [0.0, 0.5, 1.0], prof)
    assert rows[0].empirical == pytest.approx(0, abs=1e-15)
    assert rows[1].empirical == pytest.approx(6.436340904691917e-08, rel=1e-6)
    assert rows[2].empirical == pytest.approx(4.5396981745444986e-05, rel=1e-8)
    assert rows[2].analytic == pytest.approx(3.70185787899018e+21, rel=1e-10)
    Id = ObservableWithSupport((5,), 2 * np.eye(2))
    rows = product_state_correlation_check(model, A, Id, neel_state(model), [0.3, 0.9], prof)
    assert all(r.empirical < 1e-14 for r in rows)


def test_product_state_rejects_entangled():
    model, _ = chain_model(4)
    A = spin_component(model.space, 0, 3)
    B = spin_component(model.space, 3, 3)
    psi = np.zeros(16, dtype=complex)
    psi[0] = psi[15] = 1 / math.sqrt(2)
    with pytest.raises(NotProductState):
        product_state_correlation_check(model, A, B, psi, [0.1], P2.with_rate(1.0))


def test_growth_function_closed_form():
    model, _ = chain_model(5)
    phi, space = model.interaction, model.space
    prof = P2.with_rate(1.0)
    from scipy import integrate
    from locbound.interaction import interaction_norm_a
    from locbound.metric_space import convolution_constant, pair_sum_norm

    C = convolution_constant(space, prof)
    k = interaction_norm_a(phi, space, prof) * C
    pre = (C + pair_sum_norm(space, prof)) / C * interaction_norm_a(phi, space, prof)
    num, _ = integrate.quad(lambda s: math.exp(2 * k * s), 0, 0.3)
    assert growth_function(phi, space, prof, 0.3) == pytest.approx(pre * num, rel=1e-10)


def test_multi_commutator():
    model, _ = chain_model(6)
    space = model.space
    prof = P2.with_rate(1.0)
    A, B, C = (spin_component(space, x, 1) for x in (0, 2, 5))
    r = multi_commutator_check(model, (A, 0.0), (B, 0.0), (C, 0.0), 0.5, prof)
    assert r.norm == 0 and r.quasi_supports_disjoint
    Id = ObservableWithSupport((4,), np.eye(2))
    r = multi_commutator_check(model, (A, 0.3), (B, 0.2), (Id, 0.1), 1.0, prof)
    assert r.norm < 1e-13


def test_multi_commutator_chain10_small_times():
    model, _ = chain_model(10)
    space = model.space
    ops = [(spin_component(space, x, 3), 0.02) for x in (0, 4, 9)]
    r = multi_commutator_check(model, *ops, 1.0, P2.with_rate(1.0))
    # recorded from the run: the flag holds and the norm sits at round-off
    assert r.quasi_supports_disjoint
    assert r.norm < 1e-12
