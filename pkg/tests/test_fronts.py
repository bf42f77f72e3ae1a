import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from kpplab.fronts import (FrontTrace, growth_exponent, interface_width, locate_front,
                           mean_speed, tail_decay_rate)
from kpplab.pde import Grid1D


def _ramp(x, x0, width=4.0):
    return np.clip(0.5 - (x - x0) / width, 0.0, 1.0)


def test_locate_front_on_node():
    x = np.arange(100) * 0.1
    u = _ramp(x, x[10])
    assert locate_front(u, x) == x[10]


def test_locate_front_none_and_rightmost():
    x = np.linspace(-10, 10, 201)
    assert locate_front(np.full_like(x, 0.3), x) is None
    bump = np.exp(-x ** 2)
    X = locate_front(bump, x)
    assert X == pytest.approx(np.sqrt(np.log(2)), abs=1e-3)


def test_interface_width_zero_field():
    x = np.linspace(0, 10, 101)
    assert interface_width(np.zeros_like(x), x, 0.1) == 0.0


@settings(max_examples=100, deadline=None)
@given(k=st.integers(-50, 50), x0=st.floats(-5, 5), w=st.floats(0.5, 10))
def test_locate_front_commutes_with_translation(k, x0, w):
    g = Grid1D.from_bounds(-30, 30, 0.1)
    u = _ramp(g.x, x0, w)
    X = locate_front(u, g.x)
    shifted = g.shifted(k)
    X2 = locate_front(u, shifted.x)
    assert X2 - X == pytest.approx(k * g.dx, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(k=st.integers(-100, 100))
def test_interface_width_translation_invariant(k):
    x = np.arange(-2000, 2001) * 0.01
    u = 1.0 / (1.0 + np.exp(x / 1.3))
    w0 = interface_width(u, x, 0.1)
    w1 = interface_width(np.roll(u, k)[200:-200], x[200:-200], 0.1)
    assert np.isfinite(w0) and w1 == pytest.approx(w0, abs=1e-9)


def test_tail_rate_of_pure_exponential():
    x = np.linspace(0, 40, 4001)
    assert tail_decay_rate(np.exp(-0.5 * x), x, 2.0) == pytest.approx(0.5, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(rate=st.floats(0.1, 2.0), scale=st.floats(1e-6, 1e6), wobble=st.floats(0, 0.3))
def test_tail_rate_invariant_under_scaling(rate, scale, wobble):
    x = np.linspace(0, 40, 2001)
    u = np.exp(-rate * x) * (1 + wobble * np.sin(x))
    a = tail_decay_rate(u, x, 1.0)
    b = tail_decay_rate(scale * u, x, 1.0)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def _trace(t, X):
    tr = FrontTrace(eps_levels=(0.1,))
    for ti, Xi in zip(t, X):
        tr.append(ti, Xi, (1.0,), 0.0, 1.0)
    return tr


def test_mean_speed_exact_line():
    t = np.linspace(0, 10, 41)
    c, r = mean_speed(_trace(t, 2 * t + 3), 0, 10)
    assert c == pytest.approx(2.0, rel=1e-13) and r < 1e-12


@settings(max_examples=100, deadline=None)
@given(incs=st.lists(st.floats(0.0, 3.0), min_size=12, max_size=60))
def test_mean_speed_between_slopes(incs):
    t = np.arange(len(incs) + 1) * 0.5
    X = np.concatenate([[0.0], np.cumsum(incs)])
    slopes = np.diff(X) / np.diff(t)
    assume(np.ptp(slopes) > 1e-9)
    c, _ = mean_speed(_trace(t, X), t[0], t[-1])
    assert slopes.min() - 1e-9 <= c <= slopes.max() + 1e-9


def test_growth_exponent_of_exponential():
    tr = FrontTrace(eps_levels=(0.1,))
    for t in np.linspace(0, 5, 21):
        tr.append(t, None, (0.0,), 0.0, 1e-6 * np.exp(2.5 * t))
    assert growth_exponent(tr, 1, 5) == pytest.approx(2.5, rel=1e-12)


def test_trace_csv_roundtrip(tmp_path):
    tr = FrontTrace(eps_levels=(0.1, 0.01))
    tr.append(0.0, None, (0.0, 0.0), 1.0)
    tr.append(0.5, 1.0 / 3.0, (2.0, 3.0), 1.5)
    tr.to_csv(tmp_path / "t.csv")
    back = FrontTrace.from_csv(tmp_path / "t.csv")
    assert back.eps_levels == tr.eps_levels
    assert back.t == tr.t and back.mass == tr.mass and back.widths == tr.widths
    assert np.isnan(back.X[0]) and back.X[1] == tr.X[1]
