"""Media for u_t = u_xx + f(x, u): the linear rate a(x) and the nonlinearity.

A medium is a localized perturbation of the homogeneous case: ``a(x) == 1``
outside ``[-M0, M0]``.  The nonlinearity is separable, ``f(x, u) = a(x) g(u)``,
and vanishes outside ``[0, 1]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Potential",
    "Nonlinearity",
    "ReactionProfile",
    "KPPViolation",
    "ValidationReport",
    "square_well",
    "square_well_for_eigenvalue",
    "bump",
    "tabulated",
    "load_tabulated_csv",
    "evaluate_a",
    "evaluate_f",
    "validate_kpp",
]


@dataclass(frozen=True)
class Potential:
    """The rate a(x) = f_u(x, 0).

    ``kind`` is one of ``"square_well"``, ``"bump"`` or ``"tabulated"``.
    A square well takes the mean value ``1 + height/2`` exactly at ``|x| = w``,
    which keeps centred finite differences second order across the jump.
    The bump variant replaces the jump by a C^1 cosine ramp of width ``ramp``.
    """

    kind: str
    height: float = 0.0
    half_width: float = 0.0
    ramp: float = 0.0
    xs: Optional[tuple] = None
    values: Optional[tuple] = None
    declared_even: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in ("square_well", "bump", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.xs is None or self.values is None or len(self.xs) != len(self.values):
                raise ValueError("tabulated potential needs matching xs and values")
            if len(self.xs) < 2 or np.any(np.diff(self.xs) <= 0):
                raise ValueError("tabulated xs must be strictly increasing")
        elif self.half_width < 0 or self.ramp < 0:
            raise ValueError("half_width and ramp must be nonnegative")

    @property
    def support_radius(self) -> float:
        """M0: a(x) == 1 for |x| > M0."""
        if self.kind == "square_well":
            return float(self.half_width)
        if self.kind == "bump":
            return float(self.half_width + self.ramp)
        return float(max(abs(self.xs[0]), abs(self.xs[-1])))

    @property
    def is_trivial(self) -> bool:
        if self.kind == "tabulated":
            return bool(np.all(np.asarray(self.values) == 1.0))
        return self.height == 0.0 or self.support_radius == 0.0

    @property
    def is_even(self) -> bool:
        if self.declared_even is not None:
            return self.declared_even
        if self.kind != "tabulated":
            return True
        x = np.linspace(-self.support_radius, self.support_radius, 2001)
        return bool(np.allclose(self(x), self(-x), rtol=0, atol=1e-12))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        ax = np.abs(x)
        if self.kind == "square_well":
            w = self.half_width
            out[ax < w] = 1.0 + self.height
            out[ax == w] = 1.0 + 0.5 * self.height
        elif self.kind == "bump":
            w, r = self.half_width, self.ramp
            out[ax <= w] = 1.0 + self.height
            if r > 0:
                on_ramp = (ax > w) & (ax < w + r)
                s = (ax[on_ramp] - w) / r
                out[on_ramp] = 1.0 + 0.5 * self.height * (1.0 + np.cos(np.pi * s))
        else:
            xs = np.asarray(self.xs)
            inside = (x >= xs[0]) & (x <= xs[-1])
            out[inside] = np.interp(x[inside], xs, np.asarray(self.values))
            m0 = self.support_radius
            out[ax > m0] = 1.0
        return out if out.ndim else float(out)

    def interior(self, x):
        """a(x) with points on the support boundary pulled just inside.

        Integrators evaluate stages at the end of the support; for a square
        well that point carries the averaged value, not the interior limit.
        """
        m0 = self.support_radius
        if m0 == 0.0:
            return self(x)
        lim = m0 * (1.0 - 1e-13)
        return self(np.clip(x, -lim, lim))

    def bounds(self, n: int = 4097) -> tuple[float, float]:
        """(a_-, a_+) by dense sampling of the support."""
        m0 = self.support_radius
        x = np.linspace(-m0 - 1.0, m0 + 1.0, n)
        vals = self(x)
        if self.kind == "tabulated":
            vals = np.concatenate([vals, np.asarray(self.values)])
        return float(vals.min()), float(vals.max())

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "tabulated":
            d.update(xs=list(self.xs), values=list(self.values))
        else:
            d.update(height=self.height, half_width=self.half_width)
            if self.kind == "bump":
                d["ramp"] = self.ramp
        return d


def square_well(height: float, half_width: float) -> Potential:
    return Potential("square_well", height=float(height), half_width=float(half_width))


def square_well_for_eigenvalue(lam: float, half_width: float) -> Potential:
    """Square well whose principal eigenvalue is ``lam`` (even-state matching condition).

    With mu = lam - 1 and q the interior wavenumber, q tan(q w) = sqrt(mu)
    fixes q in (0, pi / 2w), and the height is mu + q^2.
    """
    if lam <= 1.0 or half_width <= 0.0:
        raise ValueError("needs lam > 1 and a positive half width")
    r = np.sqrt(lam - 1.0)
    w = float(half_width)
    q = brentq(lambda q: q * np.tan(q * w) - r, 1e-15, (np.pi / 2.0 - 1e-12) / w,
               xtol=1e-15, rtol=1e-15)
    return square_well(lam - 1.0 + q * q, w)


def bump(height: float, half_width: float, ramp: float = 0.2) -> Potential:
    return Potential("bump", height=float(height), half_width=float(half_width), ramp=float(ramp))


def tabulated(xs, values, even: Optional[bool] = None) -> Potential:
    return Potential("tabulated", xs=tuple(map(float, xs)), values=tuple(map(float, values)),
                     declared_even=even)


def load_tabulated_csv(path) -> Potential:
    """Two-column CSV (x, a); a header row is skipped if present."""
    xs, vals = [], []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                x, a = float(row[0]), float(row[1])
            except ValueError:
                continue
            xs.append(x)
            vals.append(a)
    return tabulated(xs, vals)


@dataclass(frozen=True)
class Nonlinearity:
    """The u-profile g of f(x, u) = a(x) g(u).

    ``linear_below_theta``: g(u) = u on [0, theta], then
    u - ((u - theta)/(1 - theta))^2, which is C^1, positive on (0, 1) and
    vanishes at 1.  ``logistic``: g(u) = u(1 - u).  ``ignition`` is a
    diagnostic profile that is zero on [0, theta].  ``custom`` wraps a
    user-supplied vectorized callable.
    """

    kind: str = "linear_below_theta"
    theta: float = 0.25
    g: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear_below_theta", "logistic", "custom", "ignition"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.kind == "custom" and self.g is None:
            raise ValueError("custom nonlinearity needs a callable g")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u > 0.0) & (u < 1.0)
        uc = np.where(inside, u, 0.0)
        th = self.theta
        if self.kind == "linear_below_theta":
            s = (uc - th) / (1.0 - th)
            val = np.where(uc <= th, uc, uc - s * s)
        elif self.kind == "logistic":
            val = uc * (1.0 - uc)
        elif self.kind == "ignition":
            s = (uc - th) / (1.0 - th)
            val = np.where(uc <= th, 0.0, s * (1.0 - s))
        else:
            val = np.asarray(self.g(uc), dtype=float)
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)

    def min_slope(self) -> float:
        """Lower bound on g'(u) over [0, 1]; sets the explicit time-step budget."""
        th = self.theta
        if self.kind == "linear_below_theta":
            return 1.0 - 2.0 / (1.0 - th)
        if self.kind == "logistic":
            return -1.0
        if self.kind == "ignition":
            return -1.0 / (1.0 - th)
        u = np.linspace(0.0, 1.0, 20001)
        return float(np.min(np.diff(self(u)) / np.diff(u)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theta": self.theta}


@dataclass(frozen=True)
class ReactionProfile:
    """A medium plus the KPP constants (C, delta) of f >= a u - C u^(1+delta).

    ``C=None`` picks the smallest constant the nonlinearity guarantees for
    this medium.
    """

    potential: Potential
    nonlinearity: Nonlinearity = Nonlinearity()
    C: Optional[float] = None
    delta: float = 1.0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.C is None:
            object.__setattr__(self, "C", _kpp_constant(self.potential, self.nonlinearity,
                                                        self.delta))
        elif self.C <= 0:
            raise ValueError("C must be positive")

    @property
    def theta(self) -> float:
        return self.nonlinearity.theta

    @property
    def linear_below_theta(self) -> bool:
        return self.nonlinearity.kind == "linear_below_theta"

    def a(self, x):
        return self.potential(x)

    def f(self, x, u):
        return self.potential(x) * self.nonlinearity(u)

    def lipschitz_below(self) -> float:
        """L >= 0 with d f / d u >= -L on [0, 1]."""
        _, a_plus = self.potential.bounds()
        return max(0.0, -self.nonlinearity.min_slope() * a_plus)

    def to_dict(self) -> dict:
        return {"potential": self.potential.to_dict(),
                "nonlinearity": self.nonlinearity.to_dict(),
                "C": self.C, "delta": self.delta}


def _kpp_constant(potential: Potential, g: Nonlinearity, delta: float) -> float:
    """sup over (0, 1) of a_+ (u - g(u)) / u^(1+delta)."""
    _, a_plus = potential.bounds()
    if delta == 1.0 and g.kind in ("linear_below_theta", "logistic"):
        # (u - g(u)) / u^2 peaks at u = 1 for both
        return a_plus
    u = _u_samples(4096)
    return float(a_plus * np.max((u - g(u)) / u ** (1.0 + delta)) * (1.0 + 1e-12))


def evaluate_a(profile, x):
    pot = profile.potential if isinstance(profile, ReactionProfile) else profile
    return pot(x)


def evaluate_f(profile: ReactionProfile, x, u):
    return profile.f(x, u)


@dataclass
class KPPViolation:
    rule: str
    x: float
    u: float
    margin: float


@dataclass
class ValidationReport:
    violations: list
    n_samples: int
    a_minus: float
    a_plus: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        rules = {}
        for v in self.violations:
            rules[v.rule] = rules.get(v.rule, 0) + 1
        return {"passed": self.passed, "n_samples": self.n_samples,
                "a_minus": self.a_minus, "a_plus": self.a_plus, "violations": rules}


def _u_samples(nu: int) -> np.ndarray:
    # clustered at both ends of (0, 1)
    s = (np.arange(nu) + 0.5) / nu
    u = 0.5 - 0.5 * np.cos(np.pi * s)
    return np.unique(np.concatenate([u, [1e-9, 1e-6, 1.0 - 1e-6]]))


def validate_kpp(profile: ReactionProfile, nx: int = 512, nu: int = 512,
                 rtol: float = 1e-12, max_report: int = 1000) -> ValidationReport:
    """Sample the KPP hypotheses on [-M0-1, M0+1] x (0, 1).

    Checked: a_- > 0 (raises otherwise), f(x,0) = f(x,1) = 0,
    0 < f <= a u, and f >= a u - C u^(1+delta).
    """
    a_minus, a_plus = profile.potential.bounds()
    if a_minus <= 0.0:
        raise ValueError(f"a(x) must be bounded below by a positive constant; a_- = {a_minus}")
    m0 = profile.potential.support_radius
    x = np.linspace(-m0 - 1.0, m0 + 1.0, nx)
    u = _u_samples(nu)
    X, U = np.meshgrid(x, u, indexing="ij")
    A = profile.a(X)
    F = profile.f(X, U)
    au = A * U
    lower = au - profile.C * U ** (1.0 + profile.delta)
    slack = rtol * np.maximum(au, 1e-300)

    violations = []

    def collect(rule, mask, margin):
        idx = np.argwhere(mask)
        for i, j in idx[:max_report - len(violations)]:
            violations.append(KPPViolation(rule, float(X[i, j]), float(U[i, j]), float(margin[i, j])))

    collect("positive", F <= 0.0, F)
    collect("below_linearization", F > au + slack, au - F)
    collect("sublinear_lower_bound", F < lower - slack, F - lower)
    f0 = profile.f(x, np.zeros_like(x))
    f1 = profile.f(x, np.ones_like(x))
    # f(x,1) as the one-sided limit from inside (0,1)
    f1_lim = profile.a(x) * np.asarray(profile.nonlinearity(np.full_like(x, 1.0 - 1e-12)))
    for i in np.flatnonzero(np.abs(f0) > 0):
        violations.append(KPPViolation("f_at_zero", float(x[i]), 0.0, -abs(float(f0[i]))))
    for i in np.flatnonzero((np.abs(f1) > 0) | (np.abs(f1_lim) > 1e-6)):
        violations.append(KPPViolation("f_at_one", float(x[i]), 1.0, -abs(float(f1_lim[i]))))
    return ValidationReport(violations, int(F.size), a_minus, a_plus)
