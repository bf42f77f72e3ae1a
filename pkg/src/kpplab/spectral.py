"""Principal eigenpairs of d^2/dx^2 + a(x) and generalized eigenfunctions.

The truncated problem on [-M, M] uses the symmetric second-difference matrix;
its top eigenvalue comes from LAPACK's Sturm-sequence bisection with inverse
iteration for the vector (``scipy.linalg.eigh_tridiagonal``).  Generalized
eigenfunctions phi_gamma are shot right-to-left with classical RK4, which is
the stable direction for the decaying normalization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .profiles import Potential, ReactionProfile

__all__ = [
    "SpectralResult",
    "GeneralizedEigenfunction",
    "BoundState",
    "SignChangeError",
    "ConvergenceError",
    "principal_eigen_dirichlet",
    "principal_eigen_line",
    "eigen_on_grid",
    "count_dirichlet_above",
    "shoot_phi_gamma",
    "bound_states",
    "zero_energy_nodes",
    "decay_rate",
    "critical_speed",
]


class SignChangeError(ValueError):
    """phi_gamma changes sign: gamma is not above the principal eigenvalue."""


class ConvergenceError(RuntimeError):
    pass


def _pot(p) -> Potential:
    return p.potential if isinstance(p, ReactionProfile) else p


@dataclass
class SpectralResult:
    lambda_: float
    x: np.ndarray
    psi: np.ndarray
    lambda_trace: list
    M: float
    isolated: bool = True
    residual: float = 0.0
    n_above: int = 1
    dx: float = 0.0

    def psi_at(self, x):
        return np.interp(x, self.x, self.psi, left=0.0, right=0.0)

    def to_dict(self) -> dict:
        return {"lambda": self.lambda_, "M": self.M, "isolated": self.isolated,
                "residual": self.residual, "n_above": self.n_above, "dx": self.dx,
                "lambda_trace": [[float(m), float(l)] for m, l in self.lambda_trace]}


def _top_eigenpair(diag: np.ndarray, off: np.ndarray):
    w, v = eigh_tridiagonal(diag, off, select="i",
                            select_range=(len(diag) - 1, len(diag) - 1),
                            lapack_driver="stebz")
    vec = v[:, 0]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return float(w[0]), vec


def _dirichlet_grid(M: float, n: int | None, dx: float | None):
    if (n is None) == (dx is None):
        raise ValueError("give exactly one of n, dx")
    if dx is not None:
        n = int(round(2.0 * M / dx)) - 1
    dx = 2.0 * M / (n + 1)
    x = -M + dx * np.arange(n + 2)
    return x, dx, n


def principal_eigen_dirichlet(potential, M: float, n: int | None = None,
                              dx: float | None = None, max_residual: float = 1e-6):
    """Top Dirichlet eigenpair of d^2/dx^2 + a on [-M, M].

    Returns ``(lambda_M, x, psi_M)`` with ``x`` including the two boundary
    nodes (where ``psi_M = 0``) and ``max(psi_M) = 1``.
    """
    pot = _pot(potential)
    if M <= pot.support_radius:
        raise ValueError("M must exceed the support radius M0")
    x, dx, n = _dirichlet_grid(M, n, dx)
    if n < 64:
        raise ValueError("need at least 64 interior nodes")
    xi = x[1:-1]
    inv = 1.0 / dx ** 2
    diag = pot(xi) - 2.0 * inv
    off = np.full(n - 1, inv)
    lam, vec = _top_eigenpair(diag, off)
    res = _residual(diag, off, lam, vec)
    if res > max_residual:
        raise ConvergenceError(f"eigen-iteration residual {res:.3e} above {max_residual:.1e}")
    psi = np.zeros(n + 2)
    psi[1:-1] = vec / vec.max()
    return lam, x, psi


def _residual(diag, off, lam, vec):
    r = (diag - lam) * vec
    r[:-1] += off * vec[1:]
    r[1:] += off * vec[:-1]
    # scale-free: relative to the operator size
    scale = np.max(np.abs(diag)) + 2 * np.max(np.abs(off)) + abs(lam)
    return float(np.max(np.abs(r)) / (np.max(np.abs(vec)) * scale))


def count_dirichlet_above(potential, M: float, dx: float, threshold: float = 1.0) -> int:
    """Number of Dirichlet eigenvalues above ``threshold`` (uniqueness heuristic)."""
    pot = _pot(potential)
    x, dx, n = _dirichlet_grid(M, None, dx)
    inv = 1.0 / dx ** 2
    diag = pot(x[1:-1]) - 2.0 * inv
    off = np.full(n - 1, inv)
    w = eigh_tridiagonal(diag, off, eigvals_only=True, select="v",
                         select_range=(threshold, np.max(diag) + 4 * inv))
    return int(len(w))


def principal_eigen_line(potential, tol: float = 1e-8, dx: float = 0.01,
                         M_start: float | None = None, M_cap: float = 200.0,
                         richardson: bool = True) -> SpectralResult:
    """Whole-line principal eigenvalue by doubling the Dirichlet box.

    Each lambda_M is Richardson-extrapolated from steps dx and dx/2 when
    ``richardson`` is set.  Stops once successive values differ by less than
    ``tol``.  A medium without an eigenvalue above the essential spectrum
    (-inf, 1] is flagged ``isolated=False`` and reported as lambda = 1.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pot = _pot(potential)
    m0 = pot.support_radius
    if M_start is None:
        M_start = max(4.0, 2.0 * m0)
    # whole number of cells so that support edges on the dx lattice stay nodes
    M_start = np.ceil(M_start / dx) * dx

    def lam_at(M):
        l1, x, psi = principal_eigen_dirichlet(pot, M, dx=dx)
        if not richardson:
            return l1, l1, x, psi, dx
        l2, x2, psi2 = principal_eigen_dirichlet(pot, M, dx=dx / 2)
        return (4.0 * l2 - l1) / 3.0, l2, x2, psi2, dx / 2

    if pot.is_trivial:
        M = M_start
        lam, _, x, psi, h = lam_at(M)
        return SpectralResult(1.0, x, psi, [(M, lam)], M, isolated=False, dx=h, n_above=0)

    trace = []
    M = M_start
    prev = None
    while True:
        lam, lam_raw, x, psi, h = lam_at(M)
        trace.append((M, lam))
        if prev is not None and abs(lam - prev) < tol:
            break
        if 2 * M > M_cap:
            if lam <= 1.0 + tol:
                return SpectralResult(1.0, x, psi, trace, M, isolated=False, dx=h, n_above=0)
            raise ConvergenceError(f"lambda_M not converged by M = {M}: trace {trace[-3:]}")
        prev = lam
        M *= 2
    inv = 1.0 / h ** 2
    diag = pot(x[1:-1]) - 2.0 * inv
    off = np.full(len(diag) - 1, inv)
    res = _residual(diag, off, lam_raw, psi[1:-1])
    if lam <= 1.0 + tol:
        return SpectralResult(1.0, x, psi, trace, M, isolated=False, residual=res, dx=h, n_above=0)
    n_above = count_dirichlet_above(pot, M, dx, 1.0 + max(tol, 1e-6))
    return SpectralResult(lam, x, psi, trace, M, isolated=True, residual=res, n_above=n_above, dx=h)


def eigen_on_grid(potential, x: np.ndarray, left: str = "neumann", right: str = "neumann"):
    """Top eigenpair of the simulation operator on the given uniform node set.

    ``left``/``right`` are ``"neumann"`` (reflecting ghost node) or
    ``"dirichlet"`` (boundary node pinned at zero).  The Neumann rows are not
    symmetric; the trapezoid-weight similarity transform makes them so.
    Returns ``(lambda_h, psi)`` with ``max(psi) = 1``.
    """
    pot = _pot(potential)
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    inv = 1.0 / dx ** 2
    lo = 1 if left == "dirichlet" else 0
    hi = len(x) - 1 if right == "dirichlet" else len(x)
    xs = x[lo:hi]
    n = len(xs)
    diag = pot(xs) - 2.0 * inv
    off = np.full(n - 1, inv)
    # Neumann row couples with 2/dx^2; symmetrized entry is sqrt(2)/dx^2
    if left == "neumann":
        off[0] = np.sqrt(2.0) * inv
    if right == "neumann":
        off[-1] = np.sqrt(2.0) * inv
    lam, s = _top_eigenpair(diag, off)
    wts = np.ones(n)
    if left == "neumann":
        wts[0] = 0.5
    if right == "neumann":
        wts[-1] = 0.5
    vec = s / np.sqrt(wts)
    psi = np.zeros(len(x))
    psi[lo:hi] = vec / vec.max()
    return lam, psi


@dataclass
class GeneralizedEigenfunction:
    """phi_gamma with phi = exp(-sqrt(gamma-1) x) for x >= M0.

    For x <= -M0, phi = alpha exp(-s x) + beta exp(s x) exactly.  In between,
    the RK4 samples are interpolated by cubic Hermite splines.
    """

    gamma: float
    x: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    alpha: float
    beta: float
    match_radius: float
    _spline: CubicHermiteSpline = field(default=None, repr=False)

    @property
    def rate(self) -> float:
        return float(np.sqrt(self.gamma - 1.0))

    def __post_init__(self):
        if len(self.x) >= 2:
            self._spline = CubicHermiteSpline(self.x, self.phi, self.dphi)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s, m0 = self.rate, self.match_radius
        out = np.empty_like(x)
        right = x >= m0
        left = x <= -m0
        mid = ~(right | left)
        out[right] = np.exp(-s * x[right])
        out[left] = self.alpha * np.exp(-s * x[left]) + self.beta * np.exp(s * x[left])
        if np.any(mid):
            out[mid] = self._spline(x[mid])
        return out if out.ndim else float(out)

    def log(self, x):
        """log phi, accurate in both tails where phi itself would underflow."""
        x = np.asarray(x, dtype=float)
        s, m0 = self.rate, self.match_radius
        out = np.empty_like(x)
        right = x >= m0
        left = x <= -m0
        mid = ~(right | left)
        out[right] = -s * x[right]
        xl = x[left]
        out[left] = -s * xl + np.log(self.alpha + self.beta * np.exp(2 * s * xl))
        if np.any(mid):
            out[mid] = np.log(self._spline(x[mid]))
        return out


def _rk4_second_order(q, x0: float, x1: float, y0, p0, n: int, stops=None):
    """Integrate y'' = q(x) y from x0 to x1 in n equal RK4 steps.

    ``y0``/``p0`` may be arrays (one system per entry, q broadcast against
    them).  Returns node arrays (xs, ys, ps) with shape (n+1, ...).
    """
    h = (x1 - x0) / n
    xs = x0 + h * np.arange(n + 1)
    y = np.array(y0, dtype=np.result_type(y0, p0, float))
    p = np.array(p0, dtype=y.dtype)
    ys = np.empty((n + 1,) + y.shape, dtype=y.dtype)
    ps = np.empty_like(ys)
    ys[0], ps[0] = y, p
    qa = q(xs)
    qm = q(xs[:-1] + 0.5 * h)
    for i in range(n):
        q0, q1, q2 = qa[i], qm[i], qa[i + 1]
        k1y, k1p = p, q0 * y
        y2, p2 = y + 0.5 * h * k1y, p + 0.5 * h * k1p
        k2y, k2p = p2, q1 * y2
        y3, p3 = y + 0.5 * h * k2y, p + 0.5 * h * k2p
        k3y, k3p = p3, q1 * y3
        y4, p4 = y + h * k3y, p + h * k3p
        k4y, k4p = p4, q2 * y4
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        p = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        ys[i + 1], ps[i + 1] = y, p
    return xs, ys, ps


def shoot_phi_gamma(potential, gamma: float, x_left: float | None = None,
                    h: float = 1e-3, check_sign: bool = True) -> GeneralizedEigenfunction:
    """Solve phi'' + a phi = gamma phi with phi = exp(-sqrt(gamma-1) x) on [M0, inf).

    Integration runs from x = M0 down to -M0 with RK4 of step about ``h``;
    (alpha, beta) come from a 2x2 solve against the two exponentials at -M0.
    With ``check_sign`` a nonpositive sample on [x_left, inf), or alpha <= 0,
    raises SignChangeError.
    """
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    pot = _pot(potential)
    m0 = pot.support_radius
    s = np.sqrt(gamma - 1.0)
    if x_left is None:
        x_left = -m0
    if m0 == 0.0:
        gef = GeneralizedEigenfunction(gamma, np.array([0.0]), np.array([1.0]),
                                       np.array([-s]), 1.0, 0.0, 0.0)
        return gef
    n = max(2, int(np.ceil(2.0 * m0 / h)))
    q = lambda xx: gamma - pot.interior(xx)
    xs, ys, ps = _rk4_second_order(q, m0, -m0, np.exp(-s * m0), -s * np.exp(-s * m0), n)
    xs, ys, ps = xs[::-1].copy(), ys[::-1].copy(), ps[::-1].copy()
    x0 = -m0
    alpha = 0.5 * np.exp(s * x0) * (ys[0] - ps[0] / s)
    beta = 0.5 * np.exp(-s * x0) * (ys[0] + ps[0] / s)
    gef = GeneralizedEigenfunction(float(gamma), xs, ys, ps, float(alpha), float(beta), m0)
    if check_sign:
        bad = np.flatnonzero(ys <= 0.0)
        if bad.size:
            raise SignChangeError(
                f"phi_gamma changes sign near x = {xs[bad[-1]]:.4f} (gamma = {gamma}); "
                "gamma does not exceed the principal eigenvalue")
        if alpha <= 0.0:
            # beta e^{sx} decays to the left, so phi vanishes at some x < -M0
            where = np.log(-alpha / beta) / (2 * s) if (alpha < 0 < beta) else -np.inf
            raise SignChangeError(
                f"alpha_gamma = {alpha:.3e} <= 0: phi_gamma vanishes at x = {where:.4f} "
                f"(gamma = {gamma}); gamma does not exceed the principal eigenvalue")
        if x_left < -m0:
            xl = np.linspace(x_left, -m0, 512)
            if np.any(gef(xl) <= 0):
                raise SignChangeError(f"phi_gamma nonpositive on [{x_left}, -M0]")
    return gef


def zero_energy_nodes(potential, h: float = 1e-3) -> int:
    """Zeros on R of the threshold solution y'' = (1 - a) y, y = 1 on [M0, inf).

    By Sturm oscillation this counts the eigenvalues strictly above 1.
    """
    pot = _pot(potential)
    m0 = pot.support_radius
    if pot.is_trivial:
        return 0
    n = max(2, int(np.ceil(2.0 * m0 / h)))
    xs, ys, ps = _rk4_second_order(lambda xx: 1.0 - pot.interior(xx), m0, -m0, 1.0, 0.0, n)
    sgn = np.sign(ys)
    count = int(np.sum(sgn[1:] * sgn[:-1] < 0))
    y0, p0 = ys[-1], ps[-1]
    # left continuation y0 + p0 (x + M0)
    at_minus_inf = -np.sign(p0) if p0 != 0 else np.sign(y0)
    if at_minus_inf * np.sign(y0) < 0:
        count += 1
    return count


@dataclass
class BoundState:
    """An L^2-normalized eigenfunction with eigenvalue gamma > 1."""

    gamma: float
    gef: GeneralizedEigenfunction
    norm: float
    sign: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.gef.rate
        m0 = self.gef.match_radius
        out = np.asarray(self.gef(x), dtype=float).copy()
        left = x <= -m0
        # drop the growing alpha-part: alpha is zero at an eigenvalue
        out[left] = self.gef.beta * np.exp(k * x[left])
        out = self.sign * out / self.norm
        return out if out.ndim else float(out)


def _alpha_of(pot, gamma, h):
    return shoot_phi_gamma(pot, gamma, h=h, check_sign=False).alpha


def bound_states(potential, h: float = 1e-3, n_scan: int = 400,
                 h_polish: float | None = None) -> list:
    """All eigenvalues gamma > 1 of d^2/dx^2 + a with L^2-normalized eigenfunctions.

    Eigenvalues are the zeros of alpha(gamma); the scan is checked against
    the zero-energy node count.  With ``h_polish`` each root and its
    eigenfunction are recomputed at that finer step.  Sorted by decreasing
    gamma, principal first.
    """
    pot = _pot(potential)
    if pot.is_trivial:
        return []
    expected = zero_energy_nodes(pot, h)
    _, a_plus = pot.bounds()
    lo, hi = 1.0, a_plus
    # geometric clustering toward the threshold catches weakly bound states
    g = lo + (hi - lo) * np.geomspace(1e-8, 1.0, n_scan)
    al = np.array([_alpha_of(pot, gi, h) for gi in g])
    roots = []
    for i in np.flatnonzero(np.sign(al[1:]) * np.sign(al[:-1]) < 0):
        roots.append(brentq(lambda gg: _alpha_of(pot, gg, h), g[i], g[i + 1], xtol=1e-14, rtol=1e-14))
    if len(roots) != expected:
        raise ConvergenceError(f"found {len(roots)} bound states, node count says {expected}")
    if h_polish is not None:
        roots = [_polish_root(pot, r, h_polish) for r in roots]
        h = h_polish
    out = []
    for gam in sorted(roots, reverse=True):
        gef = shoot_phi_gamma(pot, gam, h=h, check_sign=False)
        k = gef.rate
        m0 = gef.match_radius
        inner = simpson(gef.phi ** 2, x=gef.x)
        tails = np.exp(-2 * k * m0) / (2 * k) + gef.beta ** 2 * np.exp(-2 * k * m0) / (2 * k)
        norm = float(np.sqrt(inner + tails))
        sign = 1.0 if gef.phi[np.argmax(np.abs(gef.phi))] > 0 else -1.0
        out.append(BoundState(float(gam), gef, norm, sign))
    return out


def _polish_root(pot, root: float, h: float) -> float:
    f = lambda gg: _alpha_of(pot, gg, h)
    width = 1e-8 * max(1.0, abs(root))
    for _ in range(40):
        lo, hi = max(root - width, 1.0 + 1e-15), root + width
        if f(lo) * f(hi) < 0:
            return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)
        width *= 4.0
    raise ConvergenceError(f"could not re-bracket the eigenvalue near {root}")


def decay_rate(c: float) -> tuple[float, float]:
    """Roots r_- <= r_+ of r^2 - c r + 1 = 0 for c >= 2."""
    if c < 2.0:
        raise ValueError("decay rates are real only for c >= 2")
    d = np.sqrt(c * c - 4.0)
    r_minus = 2.0 / (c + d)  # = (c - d)/2 without cancellation
    r_plus = 0.5 * (c + d)
    return float(r_minus), float(r_plus)


def critical_speed(lam: float) -> float:
    """lambda / sqrt(lambda - 1): upper end of the admissible front speeds."""
    if lam <= 1.0:
        raise ValueError("needs lambda > 1")
    return float(lam / np.sqrt(lam - 1.0))
