"""Heat kernel of d^2/dx^2 + a(x) through 1-D scattering data.

With B = a - 1 >= 0 supported in [-M0, M0], the Jost solutions of
-phi'' = (B + k^2) phi are

    f(x, k) = exp(ikx) for x >= M0,     g(x, k) = exp(-ikx) for x <= -M0,

and a(k) = -W(f, g) / 2ik, b(k) = W(f, g(., -k)) / 2ik.  The kernel of
d^2/dx^2 + a is e^t times the kernel of d^2/dx^2 + B:

    G(t, x, y) = sum_j exp(lambda_j t) phi_j(x) phi_j(y)
                 + e^t / 2pi int exp(-t k^2) [f(x,k) conj f(y,k) - f(x,k) f(y,k) b(-k)/a(k)] dk

where the sum runs over all L^2-normalized bound states (lambda_j > 1).
The k-integral uses the midpoint rule on a symmetric grid that avoids k = 0;
the integrand is smooth there because b(-k)/a(k) -> 1 as k -> 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .pde import BoundarySpec, Grid1D, solve_linear_kernel_ivp
from .profiles import Potential, ReactionProfile
from .spectral import BoundState, bound_states

__all__ = [
    "K_CUTOFF",
    "JostSolutions",
    "ScatteringData",
    "KernelEval",
    "heat_kernel",
    "jost_solutions",
    "default_k_grid",
    "scattering_coefficients",
    "kernel_eval",
    "kernel_matrix",
    "kernel_pde_oracle",
]

K_CUTOFF = 1e-3
_GAUSS_FLOOR = -math.log(1e-16)


def _pot(p) -> Potential:
    return p.potential if isinstance(p, ReactionProfile) else p


def heat_kernel(t, z):
    """H(t, z) = exp(-z^2 / 4t) / sqrt(4 pi t)."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.exp(-z * z / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def _wronskian(y1, p1, y2, p2):
    return y1 * p2 - p1 * y2


def _propagate(pot: Potential, k: np.ndarray, x0: float, stops: Sequence[float], y0, p0,
               h: float):
    """Solutions of y'' = -(B + k^2) y from x0 through ``stops`` (ordered away from x0).

    One solution per wavenumber; returns (values, slopes) with shape
    (len(stops), len(k)).
    """
    k2 = np.asarray(k, dtype=float) ** 2
    y = np.array(np.broadcast_to(y0, k2.shape), dtype=complex)
    p = np.array(np.broadcast_to(p0, k2.shape), dtype=complex)
    ys = np.empty((len(stops), k2.size), complex)
    ps = np.empty_like(ys)
    x = x0
    for j, x1 in enumerate(stops):
        if x1 != x:
            y, p = _rk4_segment(pot, k2, x, x1, y, p, h)
            x = x1
        ys[j], ps[j] = y, p
    return ys, ps


def _rk4_segment(pot, k2, x0, x1, y, p, h):
    n = max(1, int(math.ceil(abs(x1 - x0) / h)))
    h = (x1 - x0) / n
    xs = x0 + h * np.arange(n + 1)
    b_nodes = pot.interior(xs) - 1.0
    b_mid = pot.interior(xs[:-1] + 0.5 * h) - 1.0
    for i in range(n):
        q0, q1, q2 = -(b_nodes[i] + k2), -(b_mid[i] + k2), -(b_nodes[i + 1] + k2)
        k1y, k1p = p, q0 * y
        k2y = p + 0.5 * h * k1p
        k2p = q1 * (y + 0.5 * h * k1y)
        k3y = p + 0.5 * h * k2p
        k3p = q1 * (y + 0.5 * h * k2y)
        k4y = p + h * k3p
        k4p = q2 * (y + h * k3y)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return y, p


def _free_shift(k, y, p, d):
    # exact continuation of y'' = -k^2 y over a distance d
    c, s = np.cos(k * d), np.sin(k * d)
    return y * c + p * s / k, -y * k * s + p * c


def _jost_table(pot: Potential, k: np.ndarray, xs, h: float, which: str):
    """Values and slopes of f (``which="f"``) or g at every point of ``xs``."""
    m0 = pot.support_radius
    xs = np.asarray(xs, dtype=float)
    sign = 1.0 if which == "f" else -1.0
    # f starts at +M0 and travels left; g starts at -M0 and travels right
    start = sign * m0
    far = -sign * m0
    Y = np.empty((xs.size, k.size), complex)
    P = np.empty_like(Y)
    beyond_start = sign * xs >= m0
    e = np.exp(1j * sign * k[None, :] * xs[beyond_start, None])
    Y[beyond_start], P[beyond_start] = e, 1j * sign * k[None, :] * e
    rest = np.flatnonzero(~beyond_start)
    clipped = np.clip(xs[rest], -m0, m0)
    stops = sorted(set(clipped.tolist()) | {far}, key=lambda z: sign * (start - z))
    e0 = np.exp(1j * k * m0)
    ys, ps = _propagate(pot, k, start, stops, e0, 1j * sign * k * e0, h)
    where = {z: i for i, z in enumerate(stops)}
    for i, xc in zip(rest, clipped):
        y, p = ys[where[xc]], ps[where[xc]]
        if xs[i] != xc:
            y, p = _free_shift(k, y, p, xs[i] - xc)
        Y[i], P[i] = y, p
    return Y, P


def _step_for(pot: Potential, k_max: float, h: float) -> float:
    # RK4 phase error scales like (k h)^4 per unit length
    _, a_plus = pot.bounds()
    k_loc = math.sqrt(k_max ** 2 + max(a_plus - 1.0, 0.0))
    return min(h, 0.005 / max(k_loc, 1.0))


@dataclass
class JostSolutions:
    """Values and slopes of f(., k) and g(., k) at the sample points ``x``."""

    k: np.ndarray
    x: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    g: np.ndarray
    gp: np.ndarray
    W_fg: np.ndarray
    W_fg_minus: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return -self.W_fg / (2j * self.k)

    @property
    def b(self) -> np.ndarray:
        return self.W_fg_minus / (2j * self.k)


def jost_solutions(potential, k, x=None, h: float = 1e-3) -> JostSolutions:
    """f and g at the points ``x`` (default: -M0 and M0) for each wavenumber in ``k``.

    f is integrated leftward from M0, g rightward from -M0.  ``W_fg`` and
    ``W_fg_minus`` are W(f, g) and W(f, g(., -k)) evaluated at every sample
    point; for an exact integrator they are constant in x.
    """
    pot = _pot(potential)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(np.abs(k) < K_CUTOFF):
        raise ValueError(f"|k| below the cutoff {K_CUTOFF}: Wronskian division is ill-conditioned")
    m0 = pot.support_radius
    xs = np.atleast_1d(np.asarray([-m0, m0] if x is None else x, dtype=float))
    h = _step_for(pot, float(np.max(np.abs(k))), h)
    f, fp = _jost_table(pot, k, xs, h, "f")
    g, gp = _jost_table(pot, k, xs, h, "g")
    # g(x, -k) = conj g(x, k) for real k and real potential
    W_fg = _wronskian(f, fp, g, gp)
    W_fgm = _wronskian(f, fp, np.conj(g), np.conj(gp))
    return JostSolutions(k, xs, f, fp, g, gp, W_fg, W_fgm)


def default_k_grid(t_min: float = 0.05, span: float = 160.0, k_max: Optional[float] = None,
                   refine: int = 0) -> np.ndarray:
    """Symmetric midpoint grid (j + 1/2) dk with dk = 2 pi / span / 2^refine.

    ``k_max`` defaults to max(8, 6 / sqrt(t_min)) raised, if needed, to the
    point where exp(-t_min k^2) drops below 1e-16.
    """
    if k_max is None:
        k_max = max(8.0, 6.0 / math.sqrt(t_min), math.sqrt(_GAUSS_FLOOR / t_min))
    dk = 2.0 * math.pi / span / 2 ** refine
    n = int(math.ceil(k_max / dk))
    pos = (np.arange(n) + 0.5) * dk
    return np.concatenate([-pos[::-1], pos])


@dataclass
class ScatteringData:
    """Scattering coefficients on a symmetric k grid plus the bound states.

    ``lambda_`` and ``phi0`` refer to the principal bound state; ``states``
    holds all of them (the kernel needs every one).  ``center`` is the
    translation L of the medium: the kernel is evaluated at x - L, y - L.
    """

    potential: Potential
    k_grid: np.ndarray
    a_coef: np.ndarray
    b_coef: np.ndarray
    states: List[BoundState]
    t_min: float
    h: float
    center: float = 0.0
    _cache: Dict[Tuple[str, float], np.ndarray] = field(default_factory=dict, repr=False)
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def lambda_(self) -> float:
        return self.states[0].gamma if self.states else 1.0

    @property
    def eigenvalues(self) -> List[float]:
        return [s.gamma for s in self.states]

    def phi0(self, x):
        if not self.states:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.states[0](np.asarray(x, dtype=float) - self.center)

    @property
    def dk(self) -> float:
        return float(self.k_grid[1] - self.k_grid[0])

    def unitarity_residual(self) -> float:
        return float(np.max(np.abs(np.abs(self.a_coef) ** 2 - np.abs(self.b_coef) ** 2 - 1.0)))

    def conjugation_residual(self) -> float:
        """max |b(-k) - conj b(k)| and |a(-k) - conj a(k)| over the grid."""
        ra = np.max(np.abs(self.a_coef[::-1] - np.conj(self.a_coef)))
        rb = np.max(np.abs(self.b_coef[::-1] - np.conj(self.b_coef)))
        return float(max(ra, rb))

    def f(self, x) -> np.ndarray:
        """f(x, k) on the grid for each x, shape (len(x), len(k)); medium coordinates."""
        return self._jost("f", x)

    def g(self, x) -> np.ndarray:
        return self._jost("g", x)

    def _jost(self, which: str, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        m0 = self.potential.support_radius
        k = self.k_grid
        out = np.empty((xs.size, k.size), complex)
        inner = []
        for i, xi in enumerate(xs):
            key = (which, float(xi))
            val = self._cache.get(key)
            if val is not None:
                out[i] = val
            elif abs(xi) < m0:
                inner.append(i)
            elif which == "f":
                e = np.exp(1j * k * xi)
                out[i] = e if xi >= m0 else self.a_coef * e + self.b_coef * np.conj(e)
            else:
                e = np.exp(-1j * k * xi)
                # g = c f(., k) + d f(., -k) with c(k) = -b(-k), d = a
                out[i] = e if xi <= -m0 else self.a_coef * e - self.b_coef[::-1] * np.conj(e)
        if inner:
            nodes, Y, P = self._node_table(which)
            k2 = k * k
            if len(self._cache) > 4096:
                self._cache.clear()
            for i in inner:
                j = int(np.argmin(np.abs(nodes - xs[i])))
                val, _ = _rk4_segment(self.potential, k2, nodes[j], xs[i], Y[j], P[j], self.h)
                out[i] = val
                self._cache[(which, float(xs[i]))] = val
        return out if np.ndim(x) else out[0]

    def _node_table(self, which: str, spacing: float = 0.01):
        """f or g with slopes at evenly spaced nodes through the support (built once)."""
        tab = self._tables.get(which)
        if tab is None:
            m0 = self.potential.support_radius
            nodes = np.linspace(-m0, m0, max(2, int(math.ceil(2 * m0 / spacing))) + 1)
            Y, P = _jost_table(self.potential, self.k_grid, nodes, self.h, which)
            tab = self._tables[which] = (nodes, Y, P)
        return tab

    def to_rows(self):
        for k, a, b in zip(self.k_grid, self.a_coef, self.b_coef):
            yield [k, a.real, a.imag, b.real, b.imag]


def scattering_coefficients(potential, k_grid: Optional[np.ndarray] = None,
                            t_min: float = 0.05, h: float = 1e-3,
                            center: float = 0.0, h_states: float = 1e-3) -> ScatteringData:
    """a(k), b(k) from Wronskians at x = -M0, and the bound states of d^2/dx^2 + a."""
    pot = _pot(potential)
    if k_grid is None:
        k_grid = default_k_grid(t_min)
    k = np.asarray(k_grid, dtype=float)
    if not np.allclose(k, -k[::-1], rtol=0, atol=1e-12):
        raise ValueError("k_grid must be symmetric about 0")
    if np.any(np.abs(k) < K_CUTOFF):
        raise ValueError(f"k_grid must exclude |k| < {K_CUTOFF}")
    h = _step_for(pot, float(np.max(np.abs(k))), h)
    if pot.is_trivial:
        a = np.ones_like(k, dtype=complex)
        b = np.zeros_like(k, dtype=complex)
        states: List[BoundState] = []
    else:
        js = jost_solutions(pot, k, [-pot.support_radius], h=h)
        a, b = js.a[0], js.b[0]
        states = bound_states(pot, h_polish=0.25 * h_states)
    return ScatteringData(pot, k, a, b, states, t_min, h, center)


@dataclass
class KernelEval:
    t: float
    x: float
    y: float
    value: float
    parts: Tuple[float, float]
    representation: str = "f"

    @property
    def free(self) -> float:
        """e^t H(t, x - y), the lower bound for B >= 0."""
        return float(math.exp(self.t) * heat_kernel(self.t, self.x - self.y))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["free"] = self.free
        return d


def _k_window(data: ScatteringData, t: float) -> np.ndarray:
    if t < data.t_min:
        raise ValueError(f"t = {t} below t_min = {data.t_min} of this k grid")
    k = data.k_grid
    kmax_needed = math.sqrt(_GAUSS_FLOOR / t)
    if np.max(np.abs(k)) < kmax_needed * (1 - 1e-12):
        raise ValueError("k grid too short for this t")
    return np.abs(k) <= kmax_needed


def kernel_matrix(data: ScatteringData, t: float, xs, ys,
                  representation: str = "f") -> Tuple[np.ndarray, np.ndarray]:
    """(eigen part, continuous part) of G(t, x_i, y_j) as two len(xs) x len(ys) arrays.

    The kernel is their sum.  ``representation="g"`` uses the left Jost
    solutions instead; both give the same kernel and cross-check each other.
    """
    sel = _k_window(data, t)
    k = data.k_grid[sel]
    xs = np.atleast_1d(np.asarray(xs, dtype=float)) - data.center
    ys = np.atleast_1d(np.asarray(ys, dtype=float)) - data.center
    eig = np.zeros((xs.size, ys.size))
    for s in data.states:
        eig += math.exp(s.gamma * t) * np.outer(s(xs), s(ys))
    w = np.exp(-t * k ** 2) * data.dk * math.exp(t) / (2.0 * math.pi)
    if representation == "f":
        jx, jy = data.f(xs)[:, sel], data.f(ys)[:, sel]
        ratio = -(data.b_coef[::-1] / data.a_coef)[sel]
    elif representation == "g":
        jx, jy = data.g(xs)[:, sel], data.g(ys)[:, sel]
        ratio = (data.b_coef / data.a_coef)[sel]
    else:
        raise ValueError(f"unknown representation {representation!r}")
    cont = (jx * w) @ np.conj(jy).T + (jx * (w * ratio)) @ jy.T
    return eig, cont.real


def kernel_eval(data: ScatteringData, t: float, x: float, y: float,
                representation: str = "f") -> KernelEval:
    """G(t, x, y) for u_t = u_xx + a(x) u from the scattering representation."""
    eig, cont = kernel_matrix(data, t, [x], [y], representation)
    e, c = float(eig[0, 0]), float(cont[0, 0])
    return KernelEval(float(t), float(x), float(y), e + c, (e, c), representation)


def kernel_pde_oracle(potential, t: float, x: float, y: float, dx: float = 0.01,
                      dt: Optional[float] = None, half_width: float = 40.0,
                      richardson: bool = True) -> float:
    """G(t, x, y) from the linear PDE solve with unit mass placed at y.

    The mass sits on the node y when y is on the dx lattice and is split
    linearly between the neighbours otherwise; x is read off by cubic
    interpolation.  With ``richardson`` the solves at dx and dx/2 (dt scaled
    alongside) are combined to cancel the O(dx^2) term.
    """
    pot = _pot(potential)
    if dt is None:
        dt = 0.2 * dx

    def solve(h, k):
        grid = Grid1D.from_bounds(-half_width, half_width, h)
        xg = grid.x
        u0 = np.zeros(grid.n)
        j = int(math.floor((y - xg[0]) / h + 1e-9))
        r = (y - xg[j]) / h
        if r < 1e-9:
            u0[j] = 1.0 / h
        else:
            u0[j], u0[j + 1] = (1.0 - r) / h, r / h
        u = solve_linear_kernel_ivp(pot, u0, t, grid, k, BoundarySpec.reflecting())
        i = int(round((x - xg[0]) / h))
        if abs(xg[i] - x) < 1e-9 * h:
            return float(u[i])
        i = min(max(int(math.floor((x - xg[0]) / h)) - 1, 0), grid.n - 4)
        return float(np.polyval(np.polyfit(xg[i:i + 4] - x, u[i:i + 4], 3), 0.0))

    coarse = solve(dx, dt)
    if not richardson:
        return coarse
    fine = solve(0.5 * dx, 0.5 * dt)
    return (4.0 * fine - coarse) / 3.0
