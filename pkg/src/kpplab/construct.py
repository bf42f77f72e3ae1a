"""Super/subsolution sandwiches, sandwich-limit fronts and backward-limit bumps.

For gamma > lambda the generalized eigenfunction phi_gamma is positive and
v = exp(gamma t) phi_gamma is a supersolution translating at speed
c = gamma / sqrt(gamma - 1).  The subsolution

    w = exp(gamma t) phi_gamma - A exp((gamma + eps) t) phi_{gamma + eps'}

has a bounded, t-independent maximum on the right once eps * kappa = gamma,
where kappa = sqrt(gamma-1) / (sqrt(gamma+eps'-1) - sqrt(gamma-1)).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .fronts import FrontTrace, locate_front, mean_speed, tail_decay_rate
from .pde import (BoundarySpec, Grid1D, SimulationState, _stepper, default_dt, resize_window,
                  run)
from .profiles import ReactionProfile
from .spectral import (GeneralizedEigenfunction, SpectralResult, critical_speed,
                       decay_rate, eigen_on_grid, shoot_phi_gamma)

__all__ = [
    "SandwichParams",
    "Sandwich",
    "ThresholdError",
    "kappa",
    "gamma_for_speed",
    "select_sandwich_params",
    "eval_supersolution",
    "eval_subsolution",
    "subsolution_argmax",
    "subsolution_max_closed_form",
    "closed_form_start",
    "subsolution_max",
    "SandwichCertificate",
    "ConvergenceError",
    "discrete_tail_rate",
    "horizon_schedule",
    "GridEigenfunction",
    "grid_supersolution_error",
    "sandwich_grid",
    "build_sandwich_front",
    "measure_front",
    "BumpBuildResult",
    "build_bump",
    "discrete_growth_rate",
    "DecayBoundReport",
    "verify_decay_bound",
]

_EXP_CAP = 700.0


class ThresholdError(ValueError):
    """Requested speed or medium lies outside the range where the construction applies."""


def kappa(eps_prime: float, gamma: float) -> float:
    s = math.sqrt(gamma - 1.0)
    # sqrt(gamma + eps' - 1) - s rewritten without cancellation
    return s * (math.sqrt(gamma + eps_prime - 1.0) + s) / eps_prime


def gamma_for_speed(c: float) -> float:
    """Smaller root of gamma^2 = c^2 (gamma - 1); it lies in (1, 2) for c > 2."""
    if c <= 2.0:
        raise ThresholdError(f"speed {c} must exceed 2")
    c2 = c * c
    disc = math.sqrt(c2 * c2 - 4.0 * c2)
    # product of roots is c^2, so divide to avoid cancellation
    return 2.0 * c2 / (c2 + disc)


@dataclass(frozen=True)
class SandwichParams:
    gamma: float
    eps: float
    eps_prime: float
    A: float
    theta: float
    c: float
    lam: float
    d0: float = float("nan")

    @property
    def kappa(self) -> float:
        return kappa(self.eps_prime, self.gamma)

    @property
    def s(self) -> float:
        return math.sqrt(self.gamma - 1.0)

    @property
    def s_prime(self) -> float:
        return math.sqrt(self.gamma + self.eps_prime - 1.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kappa"] = self.kappa
        return d


class Sandwich:
    """Parameters together with the two generalized eigenfunctions they need."""

    def __init__(self, profile: ReactionProfile, params: SandwichParams,
                 phi_g: Optional[GeneralizedEigenfunction] = None,
                 phi_ge: Optional[GeneralizedEigenfunction] = None):
        self.profile = profile
        self.params = params
        pot = profile.potential
        self.phi_g = phi_g or shoot_phi_gamma(pot, params.gamma)
        self.phi_ge = phi_ge or shoot_phi_gamma(pot, params.gamma + params.eps_prime)

    def with_A(self, A: float) -> "Sandwich":
        p = self.params
        return Sandwich(self.profile, SandwichParams(p.gamma, p.eps, p.eps_prime, A, p.theta,
                                                     p.c, p.lam, p.d0), self.phi_g, self.phi_ge)

    def v(self, t, x):
        return eval_supersolution(self.params, self.phi_g, t, x)

    def w(self, t, x):
        return eval_subsolution(self.params, self.phi_g, self.phi_ge, t, x)

    def upper(self, t, x):
        return np.minimum(self.v(t, x), 1.0)

    def lower(self, t, x):
        return np.maximum(self.w(t, x), 0.0)

    def argmax(self, t: float) -> float:
        return subsolution_argmax(self.params, t, self.phi_g, self.phi_ge)

    def max_w(self, t: float) -> Tuple[float, float]:
        return subsolution_max(self, t)


def eval_supersolution(params: SandwichParams, phi_g: GeneralizedEigenfunction, t, x):
    """v(t, x) = exp(gamma t) phi_gamma(x), evaluated through log phi."""
    expo = params.gamma * np.asarray(t, dtype=float) + phi_g.log(np.atleast_1d(x))
    out = np.exp(np.minimum(expo, _EXP_CAP))
    return out if np.ndim(x) else float(out[0])


def eval_subsolution(params: SandwichParams, phi_g: GeneralizedEigenfunction,
                     phi_ge: GeneralizedEigenfunction, t, x):
    """w(t, x); negative wherever the correction term dominates."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.asarray(t, dtype=float)
    e1 = params.gamma * t + phi_g.log(xa)
    e2 = (params.gamma + params.eps) * t + math.log(params.A) + phi_ge.log(xa)
    # factor out the larger exponent so the difference stays accurate
    m = np.maximum(e1, e2)
    scale = np.exp(np.minimum(m, _EXP_CAP))
    out = scale * (np.exp(e1 - m) - np.exp(e2 - m))
    return out if np.ndim(x) else float(out[0])


def subsolution_argmax(params: SandwichParams, t: float, phi_g=None, phi_ge=None) -> float:
    """Closed-form maximizer of w on the right, where both terms are pure exponentials.

    With ``phi_g``/``phi_ge`` given and the point landing left of the medium,
    the left-side effective amplitude A alpha_{gamma+eps'} / alpha_gamma is used
    instead (the beta terms are neglected there).
    """
    s, sp = params.s, params.s_prime
    A = params.A
    xt = (params.eps * t + math.log(A * sp / s)) / (sp - s)
    if phi_g is not None and phi_ge is not None and xt < -phi_g.match_radius:
        A_eff = A * phi_ge.alpha / phi_g.alpha
        xt = (params.eps * t + math.log(A_eff * sp / s)) / (sp - s)
    return xt


def subsolution_max_closed_form(params: SandwichParams, t: float) -> float:
    s, sp = params.s, params.s_prime
    k = params.kappa
    r = sp / s
    return math.exp((params.gamma - params.eps * k) * t) * params.A ** (-k) * r ** (-k - 1.0) * (r - 1.0)


def closed_form_start(params: SandwichParams, M0: float) -> float:
    """Time after which the zero of w lies right of the medium, so the closed form applies."""
    return ((params.s_prime - params.s) * M0 - math.log(params.A)) / params.eps


def subsolution_max(sw: Sandwich, t: float, half_width: float = 25.0,
                    n: int = 2001) -> Tuple[float, float]:
    """(max_x w(t, .), argmax) by dense sampling near x_t and a bounded refinement."""
    xt = sw.argmax(t)
    xs = np.linspace(xt - half_width, xt + half_width, n)
    ws = sw.w(t, xs)
    i = int(np.argmax(ws))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    res = minimize_scalar(lambda z: -sw.w(t, z), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-11})
    if -res.fun >= ws[i]:
        return float(-res.fun), float(res.x)
    return float(ws[i]), float(xs[i])


def _eps_for_linear(gamma: float) -> float:
    """Root of eps * kappa(eps, gamma) = gamma, i.e. sqrt(gamma - 1) sqrt(gamma + eps - 1) = 1.

    Solved in closed form, eps = gamma (2 - gamma) / (gamma - 1), and polished
    by one bracketed root solve on the defining equation.
    """
    if not 1.0 < gamma < 2.0:
        raise ThresholdError("eps * kappa = gamma needs gamma in (1, 2)")
    e0 = gamma * (2.0 - gamma) / (gamma - 1.0)
    g = lambda e: e * kappa(e, gamma) - gamma
    lo, hi = 0.5 * e0, 2.0 * e0
    if not g(lo) < 0.0 < g(hi):
        raise ThresholdError("eps * kappa = gamma could not be bracketed")
    return brentq(g, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)


def _t_lattice(params: SandwichParams, M0: float, span: float = 25.0, n: int = 121) -> np.ndarray:
    """Times whose right-regime maximizer x_t covers [-M0 - span, M0 + span]."""
    s, sp = params.s, params.s_prime
    base = math.log(params.A * sp / s)
    xs = np.linspace(-M0 - span, M0 + span, n)
    return (xs * (sp - s) - base) / params.eps


def _sup_w(sw: Sandwich, ts) -> Tuple[float, float, float]:
    vals = [subsolution_max(sw, t)[0] for t in ts]
    i = int(np.argmax(vals))
    return float(vals[i]), float(ts[i]), float(min(vals))


def _residual_ok(sw: Sandwich, ts, profile: ReactionProfile) -> Tuple[bool, float]:
    """Check (eps - eps') A e^{(gamma+eps)t} phi_{gamma+eps'} >= C w^{1+delta} wherever w > 0."""
    p = sw.params
    worst = np.inf
    for t in ts:
        xt = sw.argmax(t)
        xs = np.linspace(xt - 30.0, xt + 60.0, 1801)
        w = sw.w(t, xs)
        pos = w > 0.0
        if not pos.any():
            continue
        lhs_log = (math.log(p.eps - p.eps_prime) + math.log(p.A)
                   + (p.gamma + p.eps) * t + sw.phi_ge.log(xs[pos]))
        rhs_log = math.log(profile.C) + (1.0 + profile.delta) * np.log(w[pos])
        worst = min(worst, float(np.min(lhs_log - rhs_log)))
    return worst >= 0.0, worst


def _measure_d0(sw: Sandwich, ts) -> float:
    """Largest distance by which the leftmost zero of w trails c t (sampled)."""
    d0 = 0.0
    c = sw.params.c
    for t in ts:
        xt = sw.argmax(t)
        xs = np.linspace(xt - 40.0, xt, 4001)
        w = sw.w(t, xs)
        pos = np.flatnonzero(w > 0.0)
        if pos.size:
            d0 = max(d0, c * t - xs[pos[0]])
    return float(d0)


def select_sandwich_params(lam: float, c: float, profile: ReactionProfile,
                           max_doublings: int = 200) -> SandwichParams:
    """Choose (gamma, eps, eps', A) for target speed c in (2, lambda / sqrt(lambda - 1))."""
    if not 1.0 < lam < 2.0:
        raise ThresholdError(f"front construction needs 1 < lambda < 2, got {lam}")
    c_star = critical_speed(lam)
    if not 2.0 < c < c_star:
        raise ThresholdError(f"speed {c} outside the open window (2, {c_star:.12g})")
    gamma = gamma_for_speed(c)
    if not lam < gamma < 2.0:
        raise ThresholdError(f"gamma = {gamma} not in ({lam}, 2)")
    eps_star = _eps_for_linear(gamma)
    if profile.linear_below_theta:
        eps_p = eps = eps_star
    else:
        cap = ((1.0 + profile.delta) ** 2 - 1.0) * (gamma - 1.0)
        eps_p = min(cap, 0.5 * eps_star)
        eps = gamma / kappa(eps_p, gamma)
        if not eps > eps_p:
            raise ThresholdError("could not separate eps' < eps")
    theta = profile.theta
    base = SandwichParams(gamma, eps, eps_p, 1.0, theta, c, lam)
    sw = Sandwich(profile, base)
    M0 = profile.potential.support_radius
    d0 = float("nan")
    if not profile.linear_below_theta:
        d0 = _measure_d0(sw, _t_lattice(base, M0))
    A = 1.0
    for _ in range(max_doublings):
        cur = sw.with_A(A)
        ts = _t_lattice(cur.params, M0)
        sup, _, _ = _sup_w(cur, ts)
        ok = sup <= theta
        if ok and not profile.linear_below_theta:
            ok, _ = _residual_ok(cur, ts, profile)
        if ok:
            p = cur.params
            return SandwichParams(p.gamma, p.eps, p.eps_prime, A, theta, c, lam, d0)
        A *= 2.0
    raise ThresholdError("no admissible amplitude A found by doubling")


# ---------------------------------------------------------------------------
# sandwich-limit fronts


@dataclass
class SandwichCertificate:
    """Sampled ordering certificate max(w, 0) <= u <= min(v, 1).

    Violations are measured relative to min(v, 1).  The grid carries its own
    supersolution v_h = exp(Gamma t) phi_h in place of v; the pointwise
    tolerance ``tau`` is the relative gap |min(v_h, 1) - min(v, 1)| / min(v, 1)
    (O(dx^2) times the distance from the front, amplified near the critical
    speed where alpha_gamma is small) plus ``tau_floor``, the time stepper's
    own relative error on v_h over the horizon (``grid_supersolution_error``).  A
    violation passes when it stays within ``factor * tau``.
    ``grid_upper_violation`` is max (u - min(v_h, 1)) / min(v_h, 1), the
    ordering against the grid's own supersolution.
    """

    passed: bool
    converged: bool
    n_used: int
    schedule: List[int]
    cauchy_diffs: List[float]
    upper_violation: float
    lower_violation: float
    upper_ratio: float
    lower_ratio: float
    upper_where: Tuple[float, float]
    lower_where: Tuple[float, float]
    upper_ratio_where: Tuple[float, float]
    lower_ratio_where: Tuple[float, float]
    tau_max: float
    tau_floor: float
    grid_upper_violation: float
    factor: float
    sigma: float
    min_max_w: float
    max_max_w: float
    excluded_right: float
    trace: Optional[FrontTrace] = field(default=None, repr=False)
    kind: str = "sampled certificate"

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "trace"}


class ConvergenceError(RuntimeError):
    pass


def _amplification(dx: float, dt: float, rate: float) -> float:
    """Per-step growth of the mode exp(-rate x) under the stepper where a = 1, f = u."""
    mu = (4.0 / dx ** 2) * math.sinh(0.5 * rate * dx) ** 2
    den = 1.0 - 0.5 * dt * mu
    pred = 1.0 + dt * (mu + 1.0) / den
    return 1.0 + (dt * mu + 0.5 * dt * (1.0 + pred)) / den


def _mode_error(dx: float, dt: float, rate: float, growth: float, horizon: float) -> float:
    """|discrete/continuous - 1| for the mode exp(growth t - rate x) over ``horizon``."""
    steps = horizon / dt
    return abs(math.expm1(steps * math.log(_amplification(dx, dt, rate)) - growth * horizon))


def discrete_tail_rate(c: float, dx: float, dt: float) -> Tuple[float, float]:
    """(sigma, Gamma) with Gamma / sigma = c for the stepper's exponential modes.

    sigma is the discrete counterpart of r_-(c): data decaying like
    exp(-sigma x) translate at exactly speed c on the grid, which removes the
    O(dx^2) drift of the build in the horizon n.
    """
    s0 = decay_rate(c)[0]
    growth = lambda r: math.log(_amplification(dx, dt, r)) / dt
    g = lambda r: growth(r) - c * r
    sig = brentq(g, 0.5 * s0, min(0.5 * (s0 + decay_rate(c)[1]), 1.5 * s0), xtol=1e-15, rtol=1e-15)
    return sig, growth(sig)


def sandwich_grid(params: SandwichParams, n_max: float, t_forward: float = 0.0,
                  dx: float = 0.1, left_margin: float = 30.0,
                  right_margin: float = 50.0) -> Grid1D:
    c = params.c
    lo = math.floor((-c * n_max - left_margin) / dx) * dx
    return Grid1D.from_bounds(lo, c * max(t_forward, 0.0) + right_margin, dx)


class GridEigenfunction:
    """Generalized eigenfunction of the discrete operator D + a on the dx lattice.

    phi_i = exp(-sigma x_i) right of the medium; across the medium the
    three-term recurrence (phi_{i-1} - 2 phi_i + phi_{i+1}) / dx^2
    + a_i phi_i = mu phi_i is run leftwards, with mu = 1 + 4 sinh^2(sigma dx / 2) / dx^2.
    Left of the medium phi is an exact combination of the two discrete
    exponentials, evaluated in log form.
    """

    def __init__(self, potential, sigma: float, dx: float):
        self.sigma, self.dx = sigma, dx
        mu = 1.0 + (4.0 / dx ** 2) * math.sinh(0.5 * sigma * dx) ** 2
        m0 = potential.support_radius
        k_hi = int(math.ceil(m0 / dx - 1e-9)) + 1
        k_lo = -k_hi
        ks = np.arange(k_lo, k_hi + 1)
        xs = dx * ks
        a = potential(xs)
        phi = np.empty(ks.size)
        phi[-1] = math.exp(-sigma * xs[-1])
        phi[-2] = math.exp(-sigma * xs[-2])
        for j in range(ks.size - 2, 0, -1):
            phi[j - 1] = ((mu - a[j]) * dx * dx + 2.0) * phi[j] - phi[j + 1]
        if np.any(phi <= 0.0):
            raise ValueError("grid eigenfunction changes sign; sigma too small for this medium")
        # phi = alpha e^{-sigma x} + beta e^{sigma x} at the two leftmost nodes
        e = np.exp(sigma * xs[:2])
        mat = np.array([[1.0 / e[0], e[0]], [1.0 / e[1], e[1]]])
        self.alpha, self.beta = np.linalg.solve(mat, phi[:2])
        self.k_lo, self.k_hi = k_lo, k_hi
        self._log_mid = np.log(phi)

    def log(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.rint(x / self.dx).astype(np.int64)
        if np.any(np.abs(x - k * self.dx) > 1e-6 * self.dx):
            raise ValueError("points must lie on the dx lattice")
        out = np.empty(x.shape)
        right = k >= self.k_hi
        left = k <= self.k_lo
        mid = ~(right | left)
        out[right] = -self.sigma * x[right]
        xl = x[left]
        out[left] = -self.sigma * xl + np.log(self.alpha + self.beta * np.exp(2 * self.sigma * xl))
        out[mid] = self._log_mid[k[mid] - self.k_lo]
        return out


def grid_supersolution_error(profile: ReactionProfile, phi_h: GridEigenfunction, big_gamma: float,
                             dt: float, horizons: Sequence[float],
                             half_width: float = 40.0) -> List[float]:
    """Relative error of the time stepper on exp(Gamma t) phi_h after each horizon.

    Outside the medium phi_h is an exact mode of the step, so the one-step
    defect d = S(phi_h) - exp(Gamma dt) phi_h lives on the medium.  The
    scaled error e_k exp(-Gamma t_k) obeys e <- exp(-Gamma dt)(S e + d),
    which is iterated from zero on [-half_width, half_width] with zero ends.
    """
    from .pde import Boundary, Stepper

    dx = phi_h.dx
    k = int(round(half_width / dx))
    x = dx * np.arange(-k, k + 1)
    phi = np.exp(phi_h.log(x))
    a = profile.a(x)
    lin = lambda v: a * v
    bc = BoundarySpec(Boundary("dirichlet", 0.0), Boundary("dirichlet", 0.0))
    step = Stepper(x.size, dx, dt, BoundarySpec(Boundary("dirichlet", 1.0), Boundary("dirichlet", 1.0)))
    d0 = step.heun(phi, lin) - math.exp(big_gamma * dt) * phi
    d0[np.abs(x) > half_width - 5.0] = 0.0
    zero = Stepper(x.size, dx, dt, bc)
    decay = math.exp(-big_gamma * dt)
    e = np.zeros_like(x)
    inner = np.abs(x) <= half_width - 10.0
    marks = {int(math.ceil(h / dt - 1e-9)): h for h in horizons}
    out = {}
    for k in range(1, max(marks) + 1):
        e = decay * (zero.heun(e, lin) + d0)
        if k in marks:
            out[marks[k]] = float(np.max(np.abs(e[inner]) / phi[inner]))
    return [out[h] for h in horizons]


def horizon_schedule(T_build: float) -> List[int]:
    """4, 6, 8, then roughly x1.5 steps (even integers) up to T_build."""
    out = [n for n in (4, 6, 8) if n <= T_build]
    n = 8
    while True:
        n = int(2 * round(0.75 * n))
        if n > T_build:
            break
        out.append(n)
    return out


def build_sandwich_front(profile: ReactionProfile, params: SandwichParams, T_build: float = 400.0,
                         grid: Optional[Grid1D] = None, schedule: Optional[Sequence[int]] = None,
                         tol: float = 1e-6, factor: float = 10.0, exclude_right: float = 10.0,
                         dt: Optional[float] = None, sample_interval: float = 0.25,
                         sandwich: Optional[Sandwich] = None, strict: bool = True,
                         tau_floor: Optional[float] = None, dx: float = 0.1,
                         left_margin: float = 30.0, t_forward: float = 40.0):
    """Build u at t = 0 as the limit of solutions started at t = -n near min(v(-n), 1).

    The start data use the grid's own supersolution exp(Gamma t) phi_h
    (``GridEigenfunction`` at the rate from ``discrete_tail_rate``), so the
    discrete front moves at exactly c and the horizons converge; otherwise
    an O(dx^2) speed error makes u_n(0) drift linearly in n.  Successive horizons are compared in sup
    norm; the build stops once they agree to ``tol`` (ConvergenceError when
    ``strict`` and the schedule runs out).  Nodes within ``exclude_right`` of
    the right Dirichlet boundary are left out of the certificate since the
    truncation pins u to 0 there.  ``grid`` fixes dx and the right edge; each
    horizon n extends it to the left so the window starts ``left_margin``
    behind the initial front, and horizons are compared on their common
    nodes.  Returns (state at t = 0, certificate).
    """
    sw = sandwich or Sandwich(profile, params)
    if schedule is None:
        schedule = horizon_schedule(T_build)
    schedule = [int(n) for n in schedule]
    if not schedule:
        raise ValueError("empty horizon schedule")
    if grid is None:
        grid = sandwich_grid(params, 0.0, t_forward, dx=dx)
    dx = grid.dx
    bc = BoundarySpec.front()
    if dt is None:
        dt = default_dt(profile, dx)
    # whole number of steps per unit time, so every horizon uses the same dt
    dt = 1.0 / math.ceil(1.0 / dt)
    sig, big_gamma = discrete_tail_rate(params.c, dx, dt)
    phi_h = GridEigenfunction(profile.potential, sig, dx)
    x_right = grid.x_max
    if tau_floor is None:
        errs = grid_supersolution_error(profile, phi_h, big_gamma, dt, schedule)
        floors = {n: max(1e-10, e) for n, e in zip(schedule, errs)}
    else:
        floors = {n: tau_floor for n in schedule}

    prev = None
    diffs: List[float] = []
    best = None
    for n in schedule:
        # each horizon gets its own window reaching left_margin behind the start front
        g_n = grid if grid.x0 <= -params.c * n - left_margin else resize_window(
            SimulationState(grid, np.zeros(grid.n)), -params.c * n - left_margin, x_right).grid
        x = g_n.x
        keep = x <= x_right - exclude_right
        xs = x[keep]
        log_phi_h = phi_h.log(xs)
        st = {"up": 0.0, "up_at": (np.nan, np.nan), "lo": 0.0, "lo_at": (np.nan, np.nan),
              "up_r": 0.0, "lo_r": 0.0, "tau": 0.0, "up_r_at": (np.nan, np.nan),
              "lo_r_at": (np.nan, np.nan), "grid_up": -np.inf}

        floor = floors[n]

        def check(state: SimulationState, st=st, keep=keep, xs=xs, log_phi_h=log_phi_h,
                  floor=floor):
            t = state.t
            u = state.u[keep]
            vv = sw.upper(t, xs)
            ww = sw.lower(t, xs)
            vh = np.minimum(np.exp(np.minimum(big_gamma * t + log_phi_h, _EXP_CAP)), 1.0)
            tau = np.abs(vh - vv) / vv + floor
            up = np.maximum(u - vv, 0.0) / vv
            lo = np.maximum(ww - u, 0.0) / vv
            st["tau"] = max(st["tau"], float(tau.max()))
            st["grid_up"] = max(st["grid_up"], float(np.max((u - vh) / vh)))
            for key, viol in (("up", up), ("lo", lo)):
                i = int(np.argmax(viol))
                if viol[i] > st[key]:
                    st[key], st[key + "_at"] = float(viol[i]), (float(t), float(xs[i]))
                ratio = viol / tau
                j = int(np.argmax(ratio))
                if ratio[j] > st[key + "_r"]:
                    st[key + "_r"], st[key + "_r_at"] = float(ratio[j]), (float(t), float(xs[j]))

        u0 = np.minimum(np.exp(np.minimum(-big_gamma * n + phi_h.log(x), _EXP_CAP)), 1.0)
        state, trace = run(SimulationState(g_n, u0, t=-float(n)), profile, bc, dt, 0.0,
                           window="fixed", sample_interval=sample_interval, on_sample=check)
        best = (n, state, trace, st)
        if prev is not None:
            m = min(prev.size, state.u.size)
            diffs.append(float(np.max(np.abs(state.u[-m:] - prev[-m:]))))
            if diffs[-1] < tol:
                break
        prev = state.u
    n, state, trace, st = best
    converged = bool(diffs) and diffs[-1] < tol
    if strict and not converged:
        raise ConvergenceError(
            f"horizons did not agree to {tol:g} by n = {n} (last difference "
            f"{diffs[-1] if diffs else float('nan'):.3e})")

    ts = np.linspace(-n, 0.0, 41)
    maxw = [subsolution_max(sw, t)[0] for t in ts]
    cert = SandwichCertificate(
        passed=bool(st["up_r"] <= factor and st["lo_r"] <= factor),
        converged=converged, n_used=int(n), schedule=schedule[: len(diffs) + 1],
        cauchy_diffs=diffs, upper_violation=st["up"], lower_violation=st["lo"],
        upper_ratio=st["up_r"], lower_ratio=st["lo_r"],
        upper_where=st["up_at"], lower_where=st["lo_at"], upper_ratio_where=st["up_r_at"],
        lower_ratio_where=st["lo_r_at"], tau_max=st["tau"], tau_floor=floors[n],
        grid_upper_violation=st["grid_up"],
        factor=factor, sigma=sig, min_max_w=float(min(maxw)), max_max_w=float(max(maxw)),
        excluded_right=exclude_right, trace=trace)
    return state, cert


def measure_front(state: SimulationState, profile: ReactionProfile, c: float,
                  t_forward: float = 40.0, back_trace: Optional[FrontTrace] = None,
                  tail_window=(5.0, 15.0), dt: Optional[float] = None,
                  sample_interval: float = 0.25, behind: float = 40.0,
                  ahead: float = 40.0) -> dict:
    """Run a built front forward and report speed, |X - ct| spread and tail rate.

    The window is cropped to start ``behind`` units behind X; on the right
    it must already reach ``ahead`` beyond X + c t_forward, since padding a
    truncated tail with zeros would slow the front.
    """
    X0 = locate_front(state.u, state.grid.x)
    if X0 is None:
        raise ValueError("state has no 1/2 crossing")
    if state.grid.x_max < X0 + c * t_forward + ahead:
        raise ValueError("window too short on the right for the forward run; "
                         "build with a larger t_forward")
    state = resize_window(state, X0 - behind, state.grid.x_max)
    final, trace = run(state, profile, BoundarySpec.front(), dt, state.t + t_forward,
                       window="fixed", sample_interval=sample_interval)
    c_hat, resid = mean_speed(trace, state.t, state.t + t_forward)
    t = np.asarray(trace.t)
    X = np.asarray(trace.X)
    if back_trace is not None:
        bt, bX = np.asarray(back_trace.t), np.asarray(back_trace.X)
        ok = np.isfinite(bX) & (bt < t[0])
        t, X = np.concatenate([bt[ok], t]), np.concatenate([bX[ok], X])
    dev = X - c * t
    X_end = trace.X[-1]
    rate = tail_decay_rate(final.u, final.grid, X_end, tail_window)
    r_minus = decay_rate(c)[0]
    return {
        "c": c,
        "c_hat": c_hat,
        "fit_residual": resid,
        "X_minus_ct_min": float(np.min(dev)),
        "X_minus_ct_max": float(np.max(dev)),
        "X_minus_ct_spread": float(np.ptp(dev)),
        "t_span": (float(t[0]), float(t[-1])),
        "tail_rate": rate,
        "r_minus": r_minus,
        "final_state": final,
        "trace": trace,
    }


# ---------------------------------------------------------------------------
# bump-like solutions


@dataclass
class BumpBuildResult:
    C_sequence: List[Tuple[int, float]]
    C_infinity: float
    final_field: np.ndarray
    converged: bool
    lam: float
    grid: Grid1D
    psi: np.ndarray
    normalized: List[float]
    growth: float = float("nan")
    snapshots: list = field(default_factory=list, repr=False)
    center_error: float = float("nan")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def to_dict(self) -> dict:
        return {"C_sequence": self.C_sequence, "C_infinity": self.C_infinity,
                "converged": self.converged, "lambda_grid": self.lam, "growth": self.growth,
                "normalized": self.normalized, "center_error": self.center_error}


def build_bump(profile: ReactionProfile, spectral: SpectralResult,
               schedule: Sequence[int] = (4, 6, 8, 10), grid: Optional[Grid1D] = None,
               rtol: float = 1e-3, center_tol: float = 1e-6, dt: Optional[float] = None,
               snapshot_interval: float = 0.25, stop_early: bool = False) -> BumpBuildResult:
    """Solutions from C_n psi at t = -n tuned so that u_n(0, 0) = 1/2.

    The eigenpair of the discrete Neumann operator replaces ``spectral``'s
    continuum pair in the initial data, and C_n is normalized by the
    stepper's own growth rate on that mode (``discrete_growth_rate``), so
    the linear phase carries no O(dt^2) rate mismatch into C_n exp(lambda n).
    """
    if not spectral.isolated or spectral.lambda_ <= 1.0:
        raise ThresholdError("bump construction needs an isolated eigenvalue above 1")
    if grid is None:
        grid = Grid1D.from_bounds(-40.0, 40.0, 0.05)
    x = grid.x
    lam_h, psi = eigen_on_grid(profile.potential, x, "neumann", "neumann")
    if dt is None:
        dt = default_dt(profile, grid.dx)
    dt = 1.0 / math.ceil(1.0 / dt)
    bc = BoundarySpec.reflecting()
    rate = discrete_growth_rate(profile, grid, dt, psi)
    i0 = grid.index_of(0.0)
    if abs(x[i0]) > 1e-9 * max(1.0, grid.dx):
        raise ValueError("grid must contain x = 0 as a node")

    def center(n, logC, keep=False):
        st0 = SimulationState(grid, np.exp(logC) * psi, t=-float(n))
        st, tr = run(st0, profile, bc, dt, 0.0, sample_interval=max(snapshot_interval, dt),
                     snapshot_interval=snapshot_interval if keep else None)
        return st, tr

    seq: List[Tuple[int, float]] = []
    norm: List[float] = []
    final = None
    snaps = []
    err = float("nan")
    converged = False
    for n in schedule:
        guess = math.log(0.5) - rate * n
        g = lambda lc: center(n, lc)[0].u[i0] - 0.5
        lo, hi = guess - 1.0, guess + 1.0
        glo, ghi = g(lo), g(hi)
        for _ in range(60):
            if glo < 0.0 < ghi:
                break
            if glo >= 0.0:
                lo -= 2.0
                glo = g(lo)
            if ghi <= 0.0:
                hi += 2.0
                ghi = g(hi)
        else:
            raise RuntimeError(f"could not bracket C_n for n = {n}")
        logC = brentq(g, lo, hi, xtol=1e-12, rtol=1e-14)
        st, tr = center(n, logC, keep=True)
        err = abs(st.u[i0] - 0.5)
        if err > center_tol:
            raise RuntimeError(f"u_n(0, 0) missed 1/2 by {err:.2e} at n = {n}")
        C = math.exp(logC)
        seq.append((int(n), C))
        norm.append(C * math.exp(rate * n))
        final, snaps = st.u, tr.snapshots
        if len(norm) >= 2 and abs(norm[-1] / norm[-2] - 1.0) < rtol:
            converged = True
            if stop_early:
                break
        elif len(norm) >= 2:
            converged = False
    return BumpBuildResult(seq, norm[-1], final, converged, lam_h, grid, psi, norm,
                           snapshots=snaps, center_error=err, growth=rate)


def discrete_growth_rate(profile: ReactionProfile, grid: Grid1D, dt: float, psi: np.ndarray,
                         steps: int = 400) -> float:
    """Growth rate per unit time of the linearized stepper, by power iteration from psi."""
    stp = _stepper(grid.n, grid.dx, dt, BoundarySpec.reflecting())
    a = profile.a(grid.x)
    u = psi / np.max(psi)
    m = 1.0
    for _ in range(steps):
        u = stp.heun(u, lambda v: a * v)
        m = float(np.max(u))
        u = u / m
    return math.log(m) / dt


@dataclass
class DecayBoundReport:
    c_test: float
    C: float
    C_late: float
    where: Tuple[float, float]
    finite: bool
    stable: bool
    in_speed_window: bool
    critical_speed: float

    @property
    def passed(self) -> bool:
        return self.finite and self.stable

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def verify_decay_bound(snapshots, c_test: float, lam: float, stable_rtol: float = 1e-2,
                       ) -> DecayBoundReport:
    """Smallest C with u(t, x) <= C exp(-|x| + c_test t) over snapshots at t <= 0.

    ``stable`` compares C over all snapshots with C over the later half of
    the time range: earlier snapshots must not raise it by more than
    ``stable_rtol``.  Snapshots with t > 0 are rejected.
    """
    if isinstance(snapshots, BumpBuildResult):
        snapshots = snapshots.snapshots
    if not snapshots:
        raise ValueError("no snapshots")
    if any(t > 1e-12 for t, _, _ in snapshots):
        raise ValueError("the decay bound is only claimed for t <= 0")
    c_star = critical_speed(lam) if lam > 1.0 else float("nan")
    in_range = bool(lam > 2.0 and c_test < c_star)
    t_min = min(t for t, _, _ in snapshots)
    best, where, late = -np.inf, (np.nan, np.nan), -np.inf
    for t, x, u in snapshots:
        with np.errstate(divide="ignore"):
            logr = np.log(u) + np.abs(x) - c_test * t
        i = int(np.argmax(logr))
        if logr[i] > best:
            best, where = float(logr[i]), (float(t), float(x[i]))
        if t >= 0.5 * t_min:
            late = max(late, float(logr[i]))
    C = float(np.exp(best))
    C_late = float(np.exp(late))
    finite = bool(np.isfinite(C))
    stable = bool(finite and C <= C_late * (1.0 + stable_rtol))
    return DecayBoundReport(c_test, C, C_late, where, finite, stable, in_range, c_star)
