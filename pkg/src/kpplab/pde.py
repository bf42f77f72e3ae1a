"""Time stepping for u_t = u_xx + f(x, u) on a truncated 1-D window.

The nonlinear stepper is an IMEX Heun scheme: Crank-Nicolson diffusion in
both stages, explicit trapezoidal reaction.  Within the monotonicity budget
``dt * (1/dx^2 + L) <= 1`` (L bounds -df/du) the step map is order
preserving, so the discrete comparison principle holds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lapack

from .fronts import DEFAULT_EPS, FrontTrace, interface_width, locate_front
from .profiles import ReactionProfile

__all__ = [
    "Grid1D",
    "SimulationState",
    "Boundary",
    "BoundarySpec",
    "RangeError",
    "FrontExitError",
    "stability_budget",
    "default_dt",
    "Stepper",
    "step",
    "run",
    "solve_linear_kernel_ivp",
    "cell_average_indicator",
    "resize_window",
    "trapezoid_mass",
]

RANGE_TOL = 1e-10


class RangeError(RuntimeError):
    """The scheme left [0, 1] by more than roundoff."""


class FrontExitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.n < 16:
            raise ValueError("need at least 16 nodes")

    @classmethod
    def from_bounds(cls, x_min: float, x_max: float, dx: float) -> "Grid1D":
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(float(x_min), float(dx), n)

    @property
    def x(self) -> np.ndarray:
        # on the dx lattice, form nodes as k * dx so medium edges land exactly
        k0 = round(self.x0 / self.dx)
        if abs(self.x0 / self.dx - k0) < 1e-9:
            return self.dx * (k0 + np.arange(self.n))
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x0 + self.dx * (self.n - 1)

    def index_of(self, x: float) -> int:
        return int(round((x - self.x0) / self.dx))

    def shifted(self, cells: int) -> "Grid1D":
        return Grid1D(self.x0 + cells * self.dx, self.dx, self.n)


@dataclass
class SimulationState:
    grid: Grid1D
    u: np.ndarray
    t: float = 0.0
    window_shift: float = 0.0

    def copy(self) -> "SimulationState":
        return SimulationState(self.grid, self.u.copy(), self.t, self.window_shift)


@dataclass(frozen=True)
class Boundary:
    kind: str = "neumann"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "dirichlet" and not 0.0 <= self.value <= 1.0:
            raise ValueError("dirichlet values must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class BoundarySpec:
    left: Boundary = Boundary()
    right: Boundary = Boundary()

    @classmethod
    def front(cls) -> "BoundarySpec":
        """u -> 1 on the left, u -> 0 on the right."""
        return cls(Boundary("dirichlet", 1.0), Boundary("dirichlet", 0.0))

    @classmethod
    def reflecting(cls) -> "BoundarySpec":
        return cls(Boundary("neumann"), Boundary("neumann"))

    def to_dict(self) -> dict:
        return {"left": self.left.to_dict(), "right": self.right.to_dict()}


def stability_budget(profile: ReactionProfile, dx: float) -> float:
    """Largest dt for which the IMEX map is order preserving."""
    return 1.0 / (1.0 / dx ** 2 + profile.lipschitz_below())


def default_dt(profile: ReactionProfile, dx: float) -> float:
    return min(0.4 * dx, 0.9 * stability_budget(profile, dx))


def trapezoid_mass(u: np.ndarray, dx: float) -> float:
    return float(dx * (u.sum() - 0.5 * (u[0] + u[-1])))


def cell_average_indicator(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Overlap fraction of each node's cell with [lo, hi]; exact mass on the grid."""
    dx = x[1] - x[0]
    left = np.maximum(x - 0.5 * dx, lo)
    right = np.minimum(x + 0.5 * dx, hi)
    return np.clip((right - left) / dx, 0.0, 1.0)


class Stepper:
    """Factorized implicit operator for fixed (n, dx, dt, boundary kinds).

    ``linear_rate`` switches to the linear problem u_t = u_xx + a u with no
    range checks; ``theta_implicit`` then treats a u inside Crank-Nicolson.
    """

    def __init__(self, n: int, dx: float, dt: float, bc: BoundarySpec):
        self.n, self.dx, self.dt, self.bc = n, dx, dt, bc
        r = dt / dx ** 2
        self.r = r
        d = np.full(n, 1.0 + r)
        dl = np.full(n - 1, -0.5 * r)
        du = np.full(n - 1, -0.5 * r)
        if bc.left.kind == "dirichlet":
            d[0], du[0] = 1.0, 0.0
        else:
            du[0] = -r
        if bc.right.kind == "dirichlet":
            d[-1], dl[-1] = 1.0, 0.0
        else:
            dl[-1] = -r
        self._lu = self._factor(dl, d, du)

    @staticmethod
    def _factor(dl, d, du):
        dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal factorization failed (info={info})")
        return dl, d, du, du2, ipiv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv = self._lu
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
        return x

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """dt * D u with boundary rows; exactly zero on constants."""
        r = self.r
        out = np.empty_like(u)
        out[1:-1] = r * ((u[:-2] - u[1:-1]) + (u[2:] - u[1:-1]))
        out[0] = 0.0 if self.bc.left.kind == "dirichlet" else 2.0 * r * (u[1] - u[0])
        out[-1] = 0.0 if self.bc.right.kind == "dirichlet" else 2.0 * r * (u[-2] - u[-1])
        return out

    def _free(self, rhs: np.ndarray) -> np.ndarray:
        # boundary values stay pinned: zero increment on dirichlet rows
        if self.bc.left.kind == "dirichlet":
            rhs[0] = 0.0
        if self.bc.right.kind == "dirichlet":
            rhs[-1] = 0.0
        return rhs

    def pin(self, u: np.ndarray) -> np.ndarray:
        bc = self.bc
        if bc.left.kind == "dirichlet":
            u[0] = bc.left.value
        if bc.right.kind == "dirichlet":
            u[-1] = bc.right.value
        return u

    def heun(self, u: np.ndarray, reaction: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """One step in increment form: (I - dt/2 D) du = dt D u + dt * reaction average.

        Algebraically this is Crank-Nicolson diffusion with explicit Heun
        reaction; the increment form keeps both equilibria bit-exact.
        """
        dt = self.dt
        lap = self.laplacian(u)
        f0 = reaction(u)
        pred = u + self.solve(self._free(lap + dt * f0))
        f1 = reaction(pred)
        return u + self.solve(self._free(lap + (0.5 * dt) * (f0 + f1)))


_STEPPER_CACHE: dict = {}


def _stepper(n, dx, dt, bc) -> Stepper:
    key = (n, dx, dt, bc)
    st = _STEPPER_CACHE.get(key)
    if st is None:
        if len(_STEPPER_CACHE) > 32:
            _STEPPER_CACHE.clear()
        st = _STEPPER_CACHE[key] = Stepper(n, dx, dt, bc)
    return st


def _check_range(u: np.ndarray, t: float) -> np.ndarray:
    lo, hi = u.min(), u.max()
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise RangeError(f"non-finite values at t = {t}")
    if lo < -RANGE_TOL or hi > 1.0 + RANGE_TOL:
        raise RangeError(f"u left [0, 1] at t = {t}: min {lo:.3e}, max {hi:.17g}")
    if lo < 0.0 or hi > 1.0:
        np.clip(u, 0.0, 1.0, out=u)
    return u


def _check_dt(profile, dx, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    budget = stability_budget(profile, dx)
    if dt > budget * (1.0 + 1e-12):
        raise ValueError(f"dt = {dt} exceeds the monotonicity budget {budget:.6g} at dx = {dx}")


def step(state: SimulationState, profile: ReactionProfile, bc: BoundarySpec,
         dt: float) -> SimulationState:
    """One IMEX step; raises RangeError if the result leaves [0, 1] beyond 1e-10."""
    g = state.grid
    _check_dt(profile, g.dx, dt)
    a = profile.a(g.x)
    g_u = profile.nonlinearity
    st = _stepper(g.n, g.dx, dt, bc)
    u = st.heun(st.pin(state.u.copy()), lambda v: a * g_u(v))
    _check_range(u, state.t + dt)
    return SimulationState(g, u, state.t + dt, state.window_shift)


def _sample(trace: FrontTrace, state: SimulationState):
    x = state.grid.x
    X = locate_front(state.u, x)
    widths = tuple(interface_width(state.u, x, e) for e in trace.eps_levels)
    trace.append(state.t, X, widths, trapezoid_mass(state.u, state.grid.dx),
                 float(state.u.max()))


def run(initial: SimulationState, profile: ReactionProfile, bc: BoundarySpec,
        dt: Optional[float], t_end: float, window: str = "fixed",
        sample_interval: float = 0.5, eps_levels=DEFAULT_EPS,
        snapshot_interval: Optional[float] = None,
        on_sample: Optional[Callable[[SimulationState], None]] = None,
        exit_margin: float = 5.0):
    """Advance to ``t_end``; returns (final state, FrontTrace).

    ``window`` is ``"fixed"`` (raise FrontExitError if the 1/2-crossing
    comes within ``exit_margin`` length units of the right edge) or ``"follow_front"``
    (translate by whole cells once X passes two thirds of the window,
    filling new cells with the right boundary value).  Snapshots, when
    requested, are kept on ``trace.snapshots`` as (t, x, u) triples.
    ``on_sample`` is called with the state at every sample time.
    """
    if t_end <= initial.t:
        raise ValueError("t_end must exceed the initial time")
    if window not in ("fixed", "follow_front"):
        raise ValueError(f"unknown window policy {window!r}")
    g = initial.grid
    if dt is None:
        dt = default_dt(profile, g.dx)
    _check_dt(profile, g.dx, dt)
    n_steps = int(np.ceil((t_end - initial.t) / dt - 1e-9))
    dt = (t_end - initial.t) / n_steps
    stepper = _stepper(g.n, g.dx, dt, bc)
    gfun = profile.nonlinearity
    state = initial.copy()
    stepper.pin(state.u)
    a = profile.a(state.grid.x)
    reaction = lambda v: a * gfun(v)

    every = max(1, int(round(sample_interval / dt)))
    snap_every = None if snapshot_interval is None else max(1, int(round(snapshot_interval / dt)))
    trace = FrontTrace(eps_levels=tuple(eps_levels))
    _sample(trace, state)
    if snap_every:
        trace.snapshots.append((state.t, state.grid.x.copy(), state.u.copy()))
    if on_sample:
        on_sample(state)
    t0 = initial.t
    for k in range(1, n_steps + 1):
        u = stepper.heun(state.u, reaction)
        state.t = t0 + k * dt
        state.u = _check_range(u, state.t)
        if window == "follow_front" or k % every == 0 or k == n_steps:
            X = locate_front(state.u, state.grid.x)
            if X is not None:
                if window == "follow_front":
                    L = state.grid.x_max - state.grid.x0
                    if X > state.grid.x0 + 2.0 * L / 3.0:
                        cells = int((X - (state.grid.x0 + 0.5 * L)) / state.grid.dx)
                        state = _translate(state, cells, bc)
                        a = profile.a(state.grid.x)
                elif X > state.grid.x_max - exit_margin:
                    raise FrontExitError(f"front at X = {X:.3f} left the fixed window at t = {state.t:.3f}")
        if k % every == 0 or k == n_steps:
            _sample(trace, state)
            if on_sample:
                on_sample(state)
        if snap_every and (k % snap_every == 0 or k == n_steps):
            trace.snapshots.append((state.t, state.grid.x.copy(), state.u.copy()))
    return state, trace


def _translate(state: SimulationState, cells: int, bc: BoundarySpec) -> SimulationState:
    if cells <= 0:
        return state
    fill = bc.right.value if bc.right.kind == "dirichlet" else state.u[-1]
    u = np.empty_like(state.u)
    u[:-cells] = state.u[cells:]
    u[-cells:] = fill
    g = state.grid.shifted(cells)
    return SimulationState(g, u, state.t, state.window_shift + cells * g.dx)


def resize_window(state: SimulationState, x_min: float, x_max: float,
                  fill_left: float = 1.0, fill_right: float = 0.0) -> SimulationState:
    """Re-window a state on the same dx lattice, padding with constants where new."""
    g = state.grid
    k_lo = int(np.floor((x_min - g.x0) / g.dx + 1e-9))
    k_hi = int(np.ceil((x_max - g.x0) / g.dx - 1e-9))
    n = k_hi - k_lo + 1
    u = np.empty(n)
    src_lo, src_hi = max(k_lo, 0), min(k_hi, g.n - 1)
    u[: max(0, -k_lo)] = fill_left
    u[src_lo - k_lo: src_hi - k_lo + 1] = state.u[src_lo: src_hi + 1]
    u[src_hi - k_lo + 1:] = fill_right
    return SimulationState(Grid1D(g.x0 + k_lo * g.dx, g.dx, n), u, state.t, state.window_shift)


def solve_linear_kernel_ivp(potential, u0: np.ndarray, t: float, grid: Grid1D,
                            dt: float, bc: BoundarySpec = BoundarySpec(),
                            method: str = "cn", rannacher_steps: int = 4) -> np.ndarray:
    """Solve u_t = u_xx + a(x) u, u(0) = u0, up to time t (no clamping).

    ``method="cn"`` treats the whole linear operator by Crank-Nicolson after
    ``rannacher_steps`` backward-Euler half steps, which damps the stiff
    modes excited by rough (delta-like) data.  ``method="imex"`` reproduces
    the nonlinear stepper's scheme with f = a u.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    pot = potential.potential if isinstance(potential, ReactionProfile) else potential
    x = grid.x
    a = pot(x)
    u = np.array(u0, dtype=float)
    guard = 10.0 ** 150
    n_steps = int(np.ceil(t / dt - 1e-9))
    dt = t / n_steps
    if method == "imex":
        st = Stepper(grid.n, grid.dx, dt, bc)
        u = st.pin(u)
        for _ in range(n_steps):
            u = st.heun(u, lambda v: a * v)
            if not np.all(np.abs(u) < guard):
                raise OverflowError("linear solution exceeded 1e150")
        return u
    if method != "cn":
        raise ValueError(f"unknown method {method!r}")
    n = grid.n
    inv = 1.0 / grid.dx ** 2

    def operator(theta, h):
        # I - theta h (D + A), tridiagonal
        d = 1.0 - theta * h * (a - 2.0 * inv)
        dl = np.full(n - 1, -theta * h * inv)
        du = np.full(n - 1, -theta * h * inv)
        if bc.left.kind == "dirichlet":
            d[0], du[0] = 1.0, 0.0
        else:
            du[0] = -2.0 * theta * h * inv
        if bc.right.kind == "dirichlet":
            d[-1], dl[-1] = 1.0, 0.0
        else:
            dl[-1] = -2.0 * theta * h * inv
        return Stepper._factor(dl, d, du)

    def apply(v, h):
        # (D + A) v
        out = np.empty_like(v)
        out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) * inv
        out[0] = 2.0 * (v[1] - v[0]) * inv
        out[-1] = 2.0 * (v[-2] - v[-1]) * inv
        out += a * v
        return out

    def solve(lu, rhs):
        dl, d, du, du2, ipiv = lu
        sol, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info:
            raise np.linalg.LinAlgError("tridiagonal solve failed")
        return sol

    def pin(v):
        if bc.left.kind == "dirichlet":
            v[0] = 0.0
        if bc.right.kind == "dirichlet":
            v[-1] = 0.0
        return v

    n_r = min(rannacher_steps, 2 * n_steps)
    n_half = n_r if n_r % 2 == 0 else n_r + 1
    n_half = min(n_half, 2 * n_steps)
    be = operator(1.0, 0.5 * dt)
    for _ in range(n_half):
        u = solve(be, pin(u.copy()))
    cn = operator(0.5, dt)
    for _ in range(n_steps - n_half // 2):
        u = solve(cn, pin(u + 0.5 * dt * apply(u, dt)))
        if not np.all(np.abs(u) < guard):
            raise OverflowError("linear solution exceeded 1e150")
    return u
