"""Front diagnostics: position, interface width, mean speed and tail decay."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "DEFAULT_EPS",
    "FrontTrace",
    "locate_front",
    "interface_width",
    "mean_speed",
    "tail_decay_rate",
    "growth_exponent",
    "BOUNDARY_EXCLUDE",
]

DEFAULT_EPS = (0.1, 0.01)
BOUNDARY_EXCLUDE = 5


def _coords(grid) -> np.ndarray:
    """Accept a node array or any object with an ``x`` attribute."""
    return np.asarray(getattr(grid, "x", grid), dtype=float)


def locate_front(u, grid) -> Optional[float]:
    """Rightmost x with u(x) = 1/2, linear between bracketing nodes; None if absent."""
    u = np.asarray(u, dtype=float)
    x = _coords(grid)
    s = u - 0.5
    hits = np.flatnonzero(s == 0.0)
    flips = np.flatnonzero(s[:-1] * s[1:] < 0.0)
    best = None
    if flips.size:
        i = flips[-1]
        best = x[i] + (x[i + 1] - x[i]) * s[i] / (s[i] - s[i + 1])
    if hits.size and (best is None or x[hits[-1]] >= best):
        best = x[hits[-1]]
    return None if best is None else float(best)


def _crossing(x, u, i, j, level):
    # point between nodes i and j where the linear interpolant hits level
    return x[i] + (x[j] - x[i]) * (level - u[i]) / (u[j] - u[i])


def interface_width(u, grid, eps: float) -> float:
    """Diameter of {eps <= u <= 1 - eps}, extended to the interpolated level crossings."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    u = np.asarray(u, dtype=float)
    x = _coords(grid)
    inside = np.flatnonzero((u >= eps) & (u <= 1.0 - eps))
    if inside.size == 0:
        return 0.0
    lo, hi = inside[0], inside[-1]
    left, right = x[lo], x[hi]
    if lo > 0:
        level = eps if u[lo - 1] < eps else 1.0 - eps
        left = _crossing(x, u, lo - 1, lo, level)
    if hi < u.size - 1:
        level = eps if u[hi + 1] < eps else 1.0 - eps
        right = _crossing(x, u, hi, hi + 1, level)
    return float(right - left)


@dataclass
class FrontTrace:
    """Time series sampled during a run.

    ``X`` is NaN where no 1/2-crossing exists; ``widths`` has one column per
    entry of ``eps_levels``.
    """

    eps_levels: Tuple[float, ...] = DEFAULT_EPS
    t: List[float] = field(default_factory=list)
    X: List[float] = field(default_factory=list)
    widths: List[Tuple[float, ...]] = field(default_factory=list)
    mass: List[float] = field(default_factory=list)
    sup: List[float] = field(default_factory=list)
    snapshots: list = field(default_factory=list, repr=False)

    def append(self, t, X, widths, mass, sup=float("nan")):
        if self.t and t <= self.t[-1]:
            raise ValueError("sample times must increase strictly")
        self.t.append(float(t))
        self.X.append(float("nan") if X is None else float(X))
        self.widths.append(tuple(float(w) for w in widths))
        self.mass.append(float(mass))
        self.sup.append(float(sup))

    def __len__(self):
        return len(self.t)

    @property
    def has_front(self) -> bool:
        return bool(np.isfinite(self.X).any()) if self.X else False

    def arrays(self):
        return np.asarray(self.t), np.asarray(self.X), np.asarray(self.widths), np.asarray(self.mass)

    def width(self, eps: float) -> np.ndarray:
        k = list(self.eps_levels).index(eps)
        return np.asarray([w[k] for w in self.widths])

    def header(self) -> List[str]:
        return ["t", "X"] + [f"width_{e:g}" for e in self.eps_levels] + ["mass"]

    def rows(self):
        for t, X, w, m in zip(self.t, self.X, self.widths, self.mass):
            yield [t, X, *w, m]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.header())
            for row in self.rows():
                wr.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "FrontTrace":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            head = next(rd)
            if head[:2] != ["t", "X"] or head[-1] != "mass":
                raise ValueError(f"{path}: not a front trace (header {head})")
            eps = tuple(float(h.split("_", 1)[1]) for h in head[2:-1])
            tr = cls(eps_levels=eps)
            for row in rd:
                vals = [float(v) for v in row]
                X = vals[1]
                tr.append(vals[0], None if np.isnan(X) else X, vals[2:-1], vals[-1])
        return tr


def mean_speed(trace: FrontTrace, t_lo: float, t_hi: float) -> Tuple[float, float]:
    """Least-squares slope of X(t) on [t_lo, t_hi] and the max deviation from the fitted line."""
    t = np.asarray(trace.t)
    X = np.asarray(trace.X)
    sel = (t >= t_lo) & (t <= t_hi) & np.isfinite(X)
    if sel.sum() < 10:
        raise ValueError(f"need at least 10 front samples in [{t_lo}, {t_hi}], got {int(sel.sum())}")
    slope, icpt = np.polyfit(t[sel], X[sel], 1)
    resid = np.max(np.abs(X[sel] - (slope * t[sel] + icpt)))
    return float(slope), float(resid)


def tail_decay_rate(u, grid, X: float, window: Sequence[float] = (5.0, 15.0),
                    exclude: int = BOUNDARY_EXCLUDE) -> float:
    """Least-squares slope of -log u on [X + d_lo, X + d_hi].

    Nodes within ``exclude`` cells of either end of the grid are dropped.
    """
    u = np.asarray(u, dtype=float)
    x = _coords(grid)
    d_lo, d_hi = window
    sel = (x >= X + d_lo) & (x <= X + d_hi)
    if exclude:
        sel[:exclude] = False
        sel[-exclude:] = False
    if sel.sum() < 2:
        raise ValueError("fit window contains fewer than two usable nodes")
    if np.any(u[sel] <= 0.0):
        raise ValueError("u must be positive on the fit window")
    slope = np.polyfit(x[sel], -np.log(u[sel]), 1)[0]
    return float(slope)


def growth_exponent(trace: FrontTrace, t_lo: float, t_hi: float) -> float:
    """Least-squares slope of log sup u over [t_lo, t_hi]."""
    t = np.asarray(trace.t)
    sup = np.asarray(trace.sup)
    sel = (t >= t_lo) & (t <= t_hi) & (sup > 0.0)
    if sel.sum() < 2:
        raise ValueError("need at least two positive samples in the fit window")
    return float(np.polyfit(t[sel], np.log(sup[sel]), 1)[0])
