import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpplab.kernel import (K_CUTOFF, heat_kernel, jost_solutions, kernel_eval, kernel_matrix,
                           kernel_pde_oracle, scattering_coefficients)
from kpplab.profiles import bump, square_well

from conftest import transmission_oracle, well_mu


@pytest.fixture(scope="module")
def tall():
    return scattering_coefficients(square_well(3.0, 1.0))


@pytest.fixture(scope="module")
def free():
    return scattering_coefficients(square_well(0.0, 0.0))


def test_free_jost_solutions_are_plane_waves():
    x = np.linspace(-3, 3, 7)
    js = jost_solutions(square_well(0.0, 0.0), [0.7, 2.0], x)
    k = js.k
    assert np.allclose(js.f, np.exp(1j * np.outer(x, k)), atol=1e-12)
    assert np.allclose(js.g, np.exp(-1j * np.outer(x, k)), atol=1e-12)
    assert np.allclose(js.a, 1.0, atol=1e-12) and np.allclose(js.b, 0.0, atol=1e-12)


def test_cutoff_rejected():
    with pytest.raises(ValueError):
        jost_solutions(square_well(1.0, 1.0), [0.5 * K_CUTOFF])


@settings(max_examples=25, deadline=None)
@given(h=st.floats(0.2, 4.0), w=st.floats(0.3, 2.0), k=st.floats(0.05, 6.0))
def test_wronskian_constant_in_x(h, w, k):
    x = np.linspace(-w - 1, w + 1, 9)
    js = jost_solutions(bump(h, w, 0.3), [k], x)
    W = js.W_fg[:, 0]
    assert np.max(np.abs(W - W[0])) <= 1e-8 * abs(W[0])


@pytest.mark.parametrize("k", [0.3, 1.0, 2.5])
def test_transmission_matches_plane_wave_matching(k):
    t, r = transmission_oracle(2.0, 1.0, k)
    js = jost_solutions(square_well(2.0, 1.0), [k])
    a, b = js.a[0, 0], js.b[0, 0]
    assert 1 / a == pytest.approx(t, rel=1e-8)
    assert b / a == pytest.approx(r, rel=1e-8, abs=1e-10)


def test_free_coefficients(free):
    assert np.all(free.a_coef == 1.0) and np.all(free.b_coef == 0.0)


def test_unitarity_and_conjugation(tall):
    assert tall.unitarity_residual() < 1e-6
    assert tall.conjugation_residual() < 1e-10
    # an even well has a purely imaginary b
    assert np.max(np.abs(tall.b_coef.real)) < 1e-6


def test_unitarity_stable_under_refinement():
    coarse = scattering_coefficients(square_well(1.0, 1.0), h=2e-3)
    fine = scattering_coefficients(square_well(1.0, 1.0), h=1e-3)
    assert coarse.unitarity_residual() < 1e-6 and fine.unitarity_residual() < 1e-6
    assert np.max(np.abs(coarse.a_coef - fine.a_coef)) < 1e-6


def test_bound_states_of_scattering_data(tall):
    assert tall.lambda_ == pytest.approx(1 + well_mu(3.0), abs=1e-9)
    assert len(tall.eigenvalues) == 2


@pytest.mark.parametrize("t,x,y", [(0.5, 0.0, 1.0), (1.0, -2.0, 3.0), (3.0, 4.0, 4.0)])
def test_free_kernel(free, t, x, y):
    G = kernel_eval(free, t, x, y).value
    assert G == pytest.approx(math.exp(t) * heat_kernel(t, x - y), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.5, 4.0), x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_kernel_symmetry_and_lower_bound(tall, t, x, y):
    a = kernel_eval(tall, t, x, y)
    b = kernel_eval(tall, t, y, x)
    assert a.value == pytest.approx(b.value, rel=1e-9)
    assert a.value >= a.free * (1 - 1e-3)


def test_representations_agree(tall):
    for t, x, y in [(0.5, 0.3, -0.7), (2.0, 0.5, 3.0), (1.0, -2.5, 2.0)]:
        f = kernel_eval(tall, t, x, y, "f").value
        g = kernel_eval(tall, t, x, y, "g").value
        assert g == pytest.approx(f, rel=1e-8)


def test_semigroup(tall):
    t1, t2, x, y = 0.5, 0.7, 0.3, -0.8
    z = np.linspace(-15, 15, 1201)
    e1, c1 = kernel_matrix(tall, t1, [x], z)
    e2, c2 = kernel_matrix(tall, t2, z, [y])
    composed = np.trapezoid((e1 + c1)[0] * (e2 + c2)[:, 0], z)
    direct = kernel_eval(tall, t1 + t2, x, y).value
    assert composed == pytest.approx(direct, rel=1e-6)


def test_long_time_growth_rate(tall):
    x, y = 0.4, -0.2
    g7 = kernel_eval(tall, 7.0, x, y).value
    g8 = kernel_eval(tall, 8.0, x, y).value
    assert math.log(g8 / g7) == pytest.approx(tall.lambda_, rel=1e-2)


@pytest.mark.slow
def test_kernel_matches_pde_oracle(tall):
    t, x, y = 1.0, 5.0, -5.0
    G = kernel_eval(tall, t, x, y).value
    assert abs(G - kernel_pde_oracle(tall.potential, t, x, y)) < 1e-3 * G
