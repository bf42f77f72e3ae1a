import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpplab.construct import (Sandwich, ThresholdError, build_bump, build_sandwich_front,
                              closed_form_start, eval_supersolution, gamma_for_speed, kappa,
                              select_sandwich_params, subsolution_max_closed_form,
                              verify_decay_bound)
from kpplab.profiles import ReactionProfile, square_well
from kpplab.spectral import critical_speed, principal_eigen_line, shoot_phi_gamma


@pytest.fixture(scope="module")
def lam_125(well_125):
    return principal_eigen_line(well_125.potential).lambda_


@pytest.fixture(scope="module")
def sw_23(well_125, lam_125):
    return Sandwich(well_125, select_sandwich_params(lam_125, 2.3, well_125))


@settings(max_examples=200, deadline=None)
@given(c=st.floats(2.0001, 20.0))
def test_gamma_reproduces_speed(c):
    g = gamma_for_speed(c)
    assert 1.0 < g < 2.0
    assert g / math.sqrt(g - 1) == pytest.approx(c, rel=1e-12)


def test_params_for_linear_profile(sw_23):
    p = sw_23.params
    assert p.eps == p.eps_prime
    assert p.eps * p.kappa == pytest.approx(p.gamma, rel=1e-12)
    assert p.gamma / math.sqrt(p.gamma - 1) == pytest.approx(2.3, rel=1e-12)


def test_params_reject_outside_window(well_125, lam_125):
    for c in (2.0, critical_speed(lam_125), 2.8):
        with pytest.raises(ThresholdError):
            select_sandwich_params(lam_125, c, well_125)
    flat = ReactionProfile(square_well(0.0, 0.0))
    with pytest.raises(ThresholdError):
        select_sandwich_params(1.0, 2.3, flat)


def test_supersolution_right_normalization(sw_23):
    x = np.linspace(1.0, 30.0, 50)
    s = sw_23.params.s
    assert np.allclose(sw_23.v(0.0, x), np.exp(-s * x), rtol=1e-13)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(-20, 20), x=st.floats(1.0, 20.0), s=st.floats(0.0, 5.0))
def test_supersolution_travels_at_c(sw_23, t, x, s):
    c = sw_23.params.c
    a = sw_23.v(t, x)
    b = sw_23.v(t + s, x + c * s)
    assert b == pytest.approx(a, rel=1e-12)


def test_supersolution_solves_linear_equation_in_flat_medium():
    flat = ReactionProfile(square_well(0.0, 0.0))
    gamma = 1.4
    phi = shoot_phi_gamma(flat.potential, gamma)
    p = type("P", (), {"gamma": gamma})()
    x = np.linspace(-5, 5, 11)
    h = 1e-3
    v = lambda t, xx: eval_supersolution(p, phi, t, xx)
    vt = (v(h, x) - v(-h, x)) / (2 * h)
    vxx = (v(0, x + h) - 2 * v(0, x) + v(0, x - h)) / h ** 2
    assert np.allclose(vt, vxx + v(0, x), rtol=1e-5)


def test_subsolution_max_is_constant_in_closed_form_regime(sw_23):
    p = sw_23.params
    t0 = closed_form_start(p, 1.0)
    ts = np.linspace(t0 + 1, t0 + 40, 15)
    m = np.array([sw_23.max_w(t)[0] for t in ts])
    assert np.ptp(m) / m.mean() < 1e-10
    assert m[0] == pytest.approx(subsolution_max_closed_form(p, ts[0]), rel=1e-10)
    assert m.max() <= p.theta


def test_subsolution_discrete_maximality(sw_23):
    t = closed_form_start(sw_23.params, 1.0) + 5
    xt = sw_23.argmax(t)
    for dx in (1e-3, 1e-2, 0.1):
        assert sw_23.w(t, xt + dx) <= sw_23.w(t, xt)
        assert sw_23.w(t, xt - dx) <= sw_23.w(t, xt)


def test_subsolution_amplitude_scaling(sw_23):
    p = sw_23.params
    t = closed_form_start(p, 1.0) + 10
    double = sw_23.with_A(2 * p.A)
    t2 = max(t, closed_form_start(double.params, 1.0) + 10)
    ratio = sw_23.max_w(t2)[0] / double.max_w(t2)[0]
    assert ratio == pytest.approx(2 ** p.kappa, rel=1e-8)


def test_kappa_positive():
    assert kappa(0.3, 1.5) > 0


def test_bump_rejects_flat_medium():
    flat = ReactionProfile(square_well(0.0, 0.0))
    with pytest.raises(ThresholdError):
        build_bump(flat, principal_eigen_line(flat.potential))


def test_decay_bound_rejects_positive_times():
    x = np.linspace(-5, 5, 11)
    snaps = [(-1.0, x, np.exp(-np.abs(x))), (0.5, x, np.exp(-np.abs(x)))]
    with pytest.raises(ValueError):
        verify_decay_bound(snaps, 2.2, 3.05)


def test_decay_bound_flags_range():
    x = np.linspace(-5, 5, 11)
    snaps = [(t, x, np.exp(-np.abs(x) + 3.0 * t)) for t in (-3.0, -2.0, -1.0, 0.0)]
    lam = 3.05
    inside = verify_decay_bound(snaps, 2.1, lam)
    outside = verify_decay_bound(snaps, 2.5, lam)
    assert inside.in_speed_window and not outside.in_speed_window
    assert inside.passed


@pytest.mark.slow
def test_front_is_fixed_under_one_more_unit_of_pre_evolution(well_125, lam_125):
    p = select_sandwich_params(lam_125, 2.2, well_125)
    _, cert = build_sandwich_front(well_125, p, schedule=[64, 65], tol=0.0, strict=False)
    assert cert.passed
    assert cert.cauchy_diffs[0] < 1e-5
