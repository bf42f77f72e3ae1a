"""Run configs, scenario dispatch, sweeps and run records.

A run is described by a JSON config::

    {"scenario": "front",
     "profile": {"potential": {"kind": "square_well", "height": 0.68, "half_width": 1},
                 "nonlinearity": {"kind": "linear_below_theta", "theta": 0.25}},
     "params": {"c": 2.3},
     "output": "runs/front"}

Unknown keys anywhere are errors.  Each scenario writes ``record.json`` plus
its CSV files into the output directory; the exit status is 0 exactly when
every check in the record passed.
"""
from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .construct import (ThresholdError, build_bump, build_sandwich_front, measure_front,
                        select_sandwich_params, verify_decay_bound)
from .fronts import DEFAULT_EPS, FrontTrace, locate_front, mean_speed, tail_decay_rate
from .kernel import kernel_eval, kernel_pde_oracle, scattering_coefficients
from .pde import (Boundary, BoundarySpec, Grid1D, SimulationState, cell_average_indicator, run)
from .profiles import (Nonlinearity, ReactionProfile, bump, load_tabulated_csv,
                       square_well, square_well_for_eigenvalue, tabulated, validate_kpp)
from .spectral import critical_speed, eigen_on_grid, principal_eigen_line

__all__ = [
    "SCENARIOS",
    "THREADS_ENV",
    "ConfigError",
    "RunConfig",
    "RunRecord",
    "load_config",
    "build_profile",
    "run_scenario",
    "sweep",
    "main",
]

SCENARIOS = ("eigen", "simulate", "front", "bump", "kernel", "sweep", "analyze")
THREADS_ENV = "KPPLAB_THREADS"


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field path."""


# ---------------------------------------------------------------------------
# schema

_POTENTIAL = {
    "kind": (str, "square_well"),
    "height": (float, None),
    "half_width": (float, 1.0),
    "ramp": (float, 0.2),
    "lambda": (float, None),
    "csv": (str, None),
    "xs": (list, None),
    "values": (list, None),
}
_NONLINEARITY = {"kind": (str, "linear_below_theta"), "theta": (float, 0.25)}
_PROFILE = {"potential": (_POTENTIAL, {}), "nonlinearity": (_NONLINEARITY, {}),
            "C": (float, None), "delta": (float, 1.0)}
_GRID = {"x_min": (float, None), "x_max": (float, None), "dx": (float, None)}
_TIME = {"dt": (float, None), "t_end": (float, None), "snapshot_stride": (float, None),
         "sample_interval": (float, 0.5)}
_BOUNDARY = {"kind": (str, "neumann"), "value": (float, 0.0)}

_PARAMS = {
    "eigen": {"tol": (float, 1e-8), "dx": (float, 0.01), "M_start": (float, 10.0),
              "M_cap": (float, 200.0)},
    "simulate": {
        "initial": ({"kind": (str, "box"), "height": (float, 1.0), "lo": (float, -1.0),
                     "hi": (float, 0.0), "amplitude": (float, 1e-6), "center": (float, 0.0),
                     "width": (float, 1.0)}, {}),
        "bc": ({"left": (_BOUNDARY, {"kind": "dirichlet", "value": 1.0}),
                "right": (_BOUNDARY, {"kind": "dirichlet", "value": 0.0})}, {}),
        "window": (str, "fixed"),
        "eps_levels": (list, list(DEFAULT_EPS)),
        "speed_window": (list, None),
    },
    "front": {"c": (float, None), "T_build": (float, 400.0), "dx": (float, 0.1),
              "t_forward": (float, 40.0), "tol": (float, 1e-6), "factor": (float, 10.0),
              "tail_window": (list, [5.0, 15.0]), "speed_rtol": (float, 0.03),
              "tail_tol": (float, 0.05)},
    "bump": {"schedule": (list, [4, 6, 8, 10]), "c_test": (float, 2.2), "rtol": (float, 1e-3)},
    "kernel": {"n_random": (int, 20), "t_range": (list, [0.5, 4.0]),
               "x_range": (list, [-3.0, 3.0]), "triples": (list, None),
               "oracle": (bool, True), "oracle_dx": (float, 0.01), "rel_tol": (float, 1e-3),
               "unitarity_tol": (float, 1e-6), "t_min": (float, 0.05)},
    "sweep": {"grid": (dict, None), "mode": (str, "classify"), "front": (dict, {})},
    "analyze": {"trace": (str, None), "snapshots": (str, None), "t_lo": (float, None),
                "t_hi": (float, None), "tail_window": (list, [5.0, 15.0])},
}

_TOP = {
    "scenario": (str, None),
    "profile": (_PROFILE, None),
    "grid": (_GRID, None),
    "time": (_TIME, None),
    "params": (dict, {}),
    "seed": (int, 0),
    "output": (str, None),
}


def _check_block(block: Any, schema: dict, path: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(block) - set(schema))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    out = {}
    for key, (kind, default) in schema.items():
        p = f"{path}.{key}"
        if key not in block:
            if isinstance(kind, dict) and default is not None:
                out[key] = _check_block(default, kind, p)
            else:
                out[key] = copy.deepcopy(default)
            continue
        val = block[key]
        if isinstance(kind, dict):
            out[key] = None if val is None else _check_block(val, kind, p)
        elif val is None:
            out[key] = None
        elif kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{p}: expected a number")
            out[key] = float(val)
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{p}: expected an integer")
            out[key] = val
        elif not isinstance(val, kind):
            raise ConfigError(f"{p}: expected {kind.__name__}")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class RunConfig:
    scenario: str
    profile: Optional[dict]
    grid: Optional[dict]
    time: Optional[dict]
    params: dict
    seed: int = 0
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict, scenario: Optional[str] = None) -> "RunConfig":
        d = _check_block(raw, _TOP, "config")
        if scenario is not None:
            if d["scenario"] not in (None, scenario):
                raise ConfigError(f"config.scenario: {d['scenario']!r} does not match "
                                  f"subcommand {scenario!r}")
            d["scenario"] = scenario
        if d["scenario"] not in SCENARIOS:
            raise ConfigError(f"config.scenario: must be one of {', '.join(SCENARIOS)}")
        d["params"] = _check_block(d["params"], _PARAMS[d["scenario"]], "config.params")
        cfg = cls(**d)
        cfg._validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def _validate(self):
        s = self.scenario
        if s != "analyze" and self.profile is None:
            raise ConfigError("config.profile: required for this scenario")
        if s == "simulate":
            for blk, keys in (("grid", ("x_min", "x_max", "dx")), ("time", ("t_end",))):
                b = getattr(self, blk)
                if b is None:
                    raise ConfigError(f"config.{blk}: required for scenario 'simulate'")
                for k in keys:
                    if b.get(k) is None:
                        raise ConfigError(f"config.{blk}.{k}: required")
        if self.grid is not None:
            if self.grid.get("dx") is not None and self.grid["dx"] <= 0:
                raise ConfigError("config.grid.dx: must be positive")
        if self.time is not None and self.time.get("dt") is not None and self.time["dt"] <= 0:
            raise ConfigError("config.time.dt: must be positive")
        if s == "front" and self.params["c"] is None:
            raise ConfigError("config.params.c: required for scenario 'front'")
        if s == "sweep" and not isinstance(self.params["grid"], dict):
            raise ConfigError("config.params.grid: required object of parameter lists")
        if s == "sweep":
            for k, v in self.params["grid"].items():
                if k not in ("height", "half_width", "c", "lambda"):
                    raise ConfigError(f"config.params.grid.{k}: unknown sweep parameter")
                if not isinstance(v, list) or not all(
                        isinstance(z, (int, float)) and math.isfinite(z) for z in v):
                    raise ConfigError(f"config.params.grid.{k}: expected a list of finite numbers")
            if self.params["mode"] not in ("classify", "front"):
                raise ConfigError("config.params.mode: must be 'classify' or 'front'")
        if s == "analyze" and self.params["trace"] is None:
            raise ConfigError("config.params.trace: required for scenario 'analyze'")


def load_config(path, scenario: Optional[str] = None) -> RunConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return RunConfig.from_dict(raw, scenario)


def build_profile(block: dict) -> ReactionProfile:
    pot = block["potential"]
    kind = pot["kind"]
    if kind == "square_well":
        if pot["lambda"] is not None:
            if pot["height"] is not None:
                raise ConfigError("config.profile.potential: give height or lambda, not both")
            p = square_well_for_eigenvalue(pot["lambda"], pot["half_width"])
        elif pot["height"] is None:
            raise ConfigError("config.profile.potential.height: required")
        else:
            p = square_well(pot["height"], pot["half_width"])
    elif kind == "bump":
        if pot["height"] is None:
            raise ConfigError("config.profile.potential.height: required")
        p = bump(pot["height"], pot["half_width"], pot["ramp"])
    elif kind == "tabulated":
        if pot["csv"] is not None:
            p = load_tabulated_csv(pot["csv"])
        elif pot["xs"] is not None and pot["values"] is not None:
            p = tabulated(pot["xs"], pot["values"])
        else:
            raise ConfigError("config.profile.potential: tabulated needs csv or xs/values")
    else:
        raise ConfigError(f"config.profile.potential.kind: unknown kind {kind!r}")
    if p.bounds()[0] <= 0.0:
        raise ConfigError("config.profile.potential: a(x) must stay positive")
    nl = block["nonlinearity"]
    if nl["kind"] == "custom":
        raise ConfigError("config.profile.nonlinearity.kind: custom profiles are library-only")
    try:
        g = Nonlinearity(nl["kind"], nl["theta"])
    except ValueError as exc:
        raise ConfigError(f"config.profile.nonlinearity: {exc}") from None
    return ReactionProfile(p, g, block["C"], block["delta"])


# ---------------------------------------------------------------------------
# records


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _versions() -> dict:
    return {"kpplab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@dataclass
class RunRecord:
    scenario: str
    config: dict
    versions: dict
    wall_time: float
    results: dict = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    def to_dict(self) -> dict:
        return _jsonable({"scenario": self.scenario, "config": self.config,
                          "versions": self.versions, "wall_time": self.wall_time,
                          "results": self.results, "checks": self.checks,
                          "error": self.error})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# scenarios


def _eigen(cfg: RunConfig, prof: ReactionProfile, out: Optional[Path]):
    p = cfg.params
    sp = principal_eigen_line(prof.potential, tol=p["tol"], dx=p["dx"], M_start=p["M_start"],
                              M_cap=p["M_cap"])
    trace = sp.lambda_trace
    lams = [lam for _, lam in trace]
    res = {"lambda": sp.lambda_, "isolated": sp.isolated, "lambda_trace": trace,
           "n_above": sp.n_above, "residual": sp.residual,
           "critical_speed": critical_speed(sp.lambda_) if sp.lambda_ > 1.0 else None}
    checks = {"trace_monotone": bool(np.all(np.diff(lams) >= -1e-12)),
              "residual_small": bool(sp.residual < 10 * p["tol"] or not sp.isolated)}
    if out:
        _write_csv(out / "psi.csv", ["x", "psi"], zip(sp.x, sp.psi))
        _write_csv(out / "lambda_trace.csv", ["M", "lambda_M"], trace)
    return res, checks


def _initial(cfg: RunConfig, prof: ReactionProfile, grid: Grid1D) -> np.ndarray:
    ini = cfg.params["initial"]
    x = grid.x
    kind = ini["kind"]
    if kind == "zero":
        return np.zeros(grid.n)
    if kind == "box":
        return ini["height"] * cell_average_indicator(x, ini["lo"], ini["hi"])
    if kind == "step":
        return ini["height"] * cell_average_indicator(x, x[0] - grid.dx, ini["hi"])
    if kind == "gaussian":
        return ini["amplitude"] * np.exp(-((x - ini["center"]) / ini["width"]) ** 2)
    if kind == "eigen":
        _, psi = eigen_on_grid(prof.potential, x, "neumann", "neumann")
        return ini["amplitude"] * psi
    raise ConfigError(f"config.params.initial.kind: unknown kind {kind!r}")


def _simulate(cfg: RunConfig, prof: ReactionProfile, out: Optional[Path]):
    g, tm, p = cfg.grid, cfg.time, cfg.params
    grid = Grid1D.from_bounds(g["x_min"], g["x_max"], g["dx"])
    bc = BoundarySpec(Boundary(**p["bc"]["left"]), Boundary(**p["bc"]["right"]))
    u0 = _initial(cfg, prof, grid)
    state, trace = run(SimulationState(grid, u0, 0.0), prof, bc, tm["dt"], tm["t_end"],
                       window=p["window"], sample_interval=tm["sample_interval"],
                       eps_levels=tuple(p["eps_levels"]),
                       snapshot_interval=tm["snapshot_stride"])
    res = {"t_end": state.t, "window_shift": state.window_shift,
           "X_end": locate_front(state.u, state.grid.x), "samples": len(trace),
           "mass_end": trace.mass[-1], "sup_end": trace.sup[-1]}
    checks = {"in_range": bool(np.all((state.u >= -1e-10) & (state.u <= 1 + 1e-10)))}
    if p["speed_window"] is not None:
        lo, hi = p["speed_window"]
        c_hat, resid = mean_speed(trace, lo, hi)
        res.update(c_hat=c_hat, speed_residual=resid)
    if out:
        trace.to_csv(out / "trace.csv")
        _write_csv(out / "final.csv", ["x", "u"], zip(state.grid.x, state.u))
        if trace.snapshots:
            rows = ((t, xi, ui) for t, x, u in trace.snapshots for xi, ui in zip(x, u))
            _write_csv(out / "snapshots.csv", ["t", "x", "u"], rows)
    return res, checks


def _front_lambda(prof: ReactionProfile) -> float:
    sp = principal_eigen_line(prof.potential)
    return sp.lambda_ if sp.isolated else 1.0


def _check_front_window(lam: float, c: float):
    if not 1.0 < lam < 2.0:
        raise ConfigError(f"config.params.c: front construction needs 1 < lambda < 2 "
                          f"(lambda = {lam:.10g})")
    c_star = critical_speed(lam)
    if not 2.0 < c < c_star:
        raise ConfigError(f"config.params.c: {c} outside the speed window (2, {c_star:.10g})")


def _front(cfg: RunConfig, prof: ReactionProfile, out: Optional[Path], lam: float):
    p = cfg.params
    c = p["c"]
    params = select_sandwich_params(lam, c, prof)
    state, cert = build_sandwich_front(prof, params, T_build=p["T_build"], tol=p["tol"],
                                       factor=p["factor"], strict=False, dx=p["dx"],
                                       t_forward=p["t_forward"])
    m = measure_front(state, prof, c, p["t_forward"], back_trace=cert.trace,
                      tail_window=tuple(p["tail_window"]))
    res = {"lambda": lam, "params": params.to_dict(), "certificate": cert.to_dict(),
           "measurement": {k: v for k, v in m.items() if k not in ("final_state", "trace")}}
    checks = {
        "certificate": cert.passed,
        "converged": cert.converged,
        "speed": bool(abs(m["c_hat"] - c) <= p["speed_rtol"] * c),
        "tail_rate": bool(abs(m["tail_rate"] - m["r_minus"]) <= p["tail_tol"]),
        "bounded_X_minus_ct": bool(np.isfinite(m["X_minus_ct_spread"])),
    }
    if out:
        _write_csv(out / "field.csv", ["x", "u"], zip(state.grid.x, state.u))
        m["trace"].to_csv(out / "trace.csv")
        (out / "certificate.json").write_text(json.dumps(_jsonable(cert.to_dict()), indent=2))
    return res, checks


def _bump(cfg: RunConfig, prof: ReactionProfile, out: Optional[Path]):
    p = cfg.params
    sp = principal_eigen_line(prof.potential)
    grid = None
    if cfg.grid is not None and cfg.grid.get("dx") is not None:
        g = cfg.grid
        grid = Grid1D.from_bounds(g["x_min"] if g["x_min"] is not None else -40.0,
                                  g["x_max"] if g["x_max"] is not None else 40.0, g["dx"])
    dt = cfg.time["dt"] if cfg.time else None
    r = build_bump(prof, sp, schedule=[int(n) for n in p["schedule"]], grid=grid,
                   rtol=p["rtol"], dt=dt)
    rep = verify_decay_bound(r, p["c_test"], sp.lambda_)
    res = {"lambda": sp.lambda_, "bump": r.to_dict(), "decay_bound": rep.to_dict()}
    checks = {"converged": r.converged, "decay_bound": rep.passed}
    if out:
        _write_csv(out / "C_sequence.csv", ["n", "C_n", "C_n_exp_lambda_n"],
                   ((n, C, z) for (n, C), z in zip(r.C_sequence, r.normalized)))
        _write_csv(out / "field.csv", ["x", "u"], zip(r.x, r.final_field))
    return res, checks


def _kernel(cfg: RunConfig, prof: ReactionProfile, out: Optional[Path]):
    p = cfg.params
    sd = scattering_coefficients(prof.potential, t_min=p["t_min"])
    if p["triples"] is not None:
        triples = [tuple(map(float, tr)) for tr in p["triples"]]
    else:
        rng = np.random.default_rng(cfg.seed)
        t = rng.uniform(*p["t_range"], p["n_random"])
        xy = rng.uniform(*p["x_range"], (p["n_random"], 2))
        triples = [(float(a), float(b), float(c)) for a, (b, c) in zip(t, xy)]
    rows = []
    worst_rel, worst_lb = 0.0, np.inf
    for t, x, y in triples:
        ev = kernel_eval(sd, t, x, y)
        worst_lb = min(worst_lb, ev.value / ev.free)
        if p["oracle"]:
            o = kernel_pde_oracle(prof.potential, t, x, y, dx=p["oracle_dx"])
            rel = abs(ev.value - o) / abs(o)
            worst_rel = max(worst_rel, rel)
        else:
            o, rel = float("nan"), float("nan")
        rows.append((t, x, y, ev.value, o, rel))
    res = {"eigenvalues": sd.eigenvalues, "unitarity_residual": sd.unitarity_residual(),
           "conjugation_residual": sd.conjugation_residual(), "n_k": int(sd.k_grid.size),
           "max_relative_error": worst_rel if p["oracle"] else None,
           "min_lower_bound_ratio": worst_lb, "n_triples": len(triples)}
    checks = {"unitarity": bool(res["unitarity_residual"] < p["unitarity_tol"]),
              "lower_bound": bool(worst_lb >= 1.0 - 1e-3)}
    if p["oracle"]:
        checks["oracle"] = bool(worst_rel < p["rel_tol"])
    if out:
        _write_csv(out / "scattering.csv", ["k", "re_a", "im_a", "re_b", "im_b"], sd.to_rows())
        _write_csv(out / "comparison.csv", ["t", "x", "y", "G", "G_oracle", "relerr"], rows)
    return res, checks


def _analyze(cfg: RunConfig, out: Optional[Path]):
    p = cfg.params
    trace = FrontTrace.from_csv(p["trace"])
    t = np.asarray(trace.t)
    t_lo = p["t_lo"] if p["t_lo"] is not None else float(t[0] + 0.5 * (t[-1] - t[0]))
    t_hi = p["t_hi"] if p["t_hi"] is not None else float(t[-1])
    res: Dict[str, Any] = {"samples": len(trace), "t_lo": t_lo, "t_hi": t_hi}
    checks: Dict[str, bool] = {}
    if trace.has_front:
        try:
            c_hat, resid = mean_speed(trace, t_lo, t_hi)
            res.update(c_hat=c_hat, residual=resid)
        except ValueError as exc:
            res["c_hat_error"] = str(exc)
    res["widths"] = {f"{e:g}": {"max": float(np.max(trace.width(e))),
                                "final": float(trace.width(e)[-1])} for e in trace.eps_levels}
    if p["snapshots"] is not None:
        snaps = _read_snapshots(p["snapshots"])
        rates = []
        for ts, x, u in snaps:
            X = locate_front(u, x)
            if X is None:
                continue
            try:
                rates.append((ts, tail_decay_rate(u, x, X, tuple(p["tail_window"]))))
            except ValueError:
                continue
        res["tail_rates"] = rates
    if out:
        (out / "diagnostics.json").write_text(json.dumps(_jsonable(res), indent=2, sort_keys=True))
    return res, checks


def _read_snapshots(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for t in np.unique(data[:, 0]):
        sel = data[:, 0] == t
        out.append((float(t), data[sel, 1], data[sel, 2]))
    return out


# ---------------------------------------------------------------------------
# sweep


def _sweep_entries(grid: dict) -> List[dict]:
    keys = sorted(grid)
    if not keys or any(len(grid[k]) == 0 for k in keys):
        return []
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def _entry_config(cfg: RunConfig, entry: dict) -> dict:
    base = copy.deepcopy(cfg.profile)
    pot = base["potential"]
    if "height" in entry:
        pot["height"], pot["lambda"] = float(entry["height"]), None
    if "lambda" in entry:
        pot["lambda"], pot["height"] = float(entry["lambda"]), None
    if "half_width" in entry:
        pot["half_width"] = float(entry["half_width"])
    return base


def classify(prof: ReactionProfile, c: Optional[float] = None) -> dict:
    """Where a medium sits relative to the front-existence thresholds.

    ``front-exists`` when 1 < lambda < 2 and parameters for the requested
    (or the window-midpoint) speed are found; ``rejected-by-threshold``
    when the requested speed is outside (2, lambda / sqrt(lambda - 1));
    ``growth-dominated`` when lambda >= 2, where the window is empty.
    """
    sp = principal_eigen_line(prof.potential)
    lam = sp.lambda_ if sp.isolated else 1.0
    row = {"lambda": lam, "isolated": sp.isolated, "critical_speed": None}
    if not sp.isolated:
        row["classification"] = "no-isolated-eigenvalue"
        return row
    c_star = critical_speed(lam)
    row["critical_speed"] = c_star
    if lam >= 2.0:
        row["classification"] = "growth-dominated"
        return row
    c_try = 0.5 * (2.0 + c_star) if c is None else c
    try:
        select_sandwich_params(lam, c_try, prof)
        row["classification"] = "front-exists"
    except ThresholdError:
        row["classification"] = "rejected-by-threshold"
    return row


def _sweep_entry(args) -> dict:
    cfg_dict, entry, mode = args
    t0 = time.perf_counter()
    row = {**entry}
    record_cfg = {"scenario": "front" if mode == "front" else "classify",
                  "profile": cfg_dict["profile"], "entry": entry}
    try:
        prof = build_profile(_entry_config(RunConfig(**cfg_dict), entry))
        row["height"] = prof.potential.height
        row.update(classify(prof, entry.get("c")))
        checks: Dict[str, bool] = {}
        results = dict(row)
        if mode == "front" and row["classification"] == "front-exists" and "c" in entry:
            fcfg = RunConfig.from_dict({"scenario": "front", "profile": cfg_dict["profile"],
                                        "params": {**cfg_dict["params"]["front"],
                                                   "c": float(entry["c"])}})
            res, checks = _front(fcfg, prof, None, row["lambda"])
            results["front"] = res
        row["passed"] = all(checks.values())
        rec = RunRecord(record_cfg["scenario"], record_cfg, _versions(),
                        time.perf_counter() - t0, results, checks)
    except Exception as exc:  # recorded per row, the sweep goes on
        row.update(classification="error", passed=False, error=f"{type(exc).__name__}: {exc}")
        rec = RunRecord(record_cfg["scenario"], record_cfg, _versions(),
                        time.perf_counter() - t0, {}, {}, row["error"])
    return {"row": row, "record": rec.to_dict()}


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from None
    return max(1, os.cpu_count() or 1)


_SUMMARY_COLS = ["index", "height", "half_width", "lambda_target", "c", "lambda",
                 "critical_speed", "classification", "passed", "error"]


def sweep(cfg: RunConfig, out: Optional[Path] = None, workers: Optional[int] = None):
    """Run every grid entry independently; returns (records, summary rows)."""
    entries = _sweep_entries(cfg.params["grid"])
    workers = workers or _threads()
    cfg_dict = cfg.to_dict()
    jobs = [(cfg_dict, e, cfg.params["mode"]) for e in entries]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            results = list(ex.map(_sweep_entry, jobs))
    else:
        results = [_sweep_entry(j) for j in jobs]
    rows, records = [], []
    base_pot = cfg.profile["potential"]
    for i, r in enumerate(results):
        row = r["row"]
        rows.append({
            "index": i,
            "height": row.get("height", base_pot.get("height")),
            "half_width": row.get("half_width", base_pot.get("half_width")),
            "lambda_target": entries[i].get("lambda"),
            "c": row.get("c"),
            "lambda": row.get("lambda"),
            "critical_speed": row.get("critical_speed"),
            "classification": row["classification"],
            "passed": row["passed"],
            "error": row.get("error", ""),
        })
        records.append(RunRecord.from_dict(r["record"]))
    if out:
        rec_dir = out / "records"
        rec_dir.mkdir(parents=True, exist_ok=True)
        for i, rec in enumerate(records):
            (rec_dir / f"entry_{i:04d}.json").write_text(rec.to_json())
        _write_csv(out / "summary.csv", _SUMMARY_COLS,
                   ([("" if r[k] is None else r[k]) for k in _SUMMARY_COLS] for r in rows))
    return records, rows


# ---------------------------------------------------------------------------
# dispatch


def run_scenario(cfg: RunConfig, out_dir: Optional[str] = None) -> RunRecord:
    """Validate, run and persist one scenario; module errors land in ``record.error``."""
    out = Path(out_dir or cfg.output or f"runs/{cfg.scenario}")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    prof = None
    if cfg.profile is not None and cfg.scenario != "sweep":
        prof = build_profile(cfg.profile)
    lam = None
    if cfg.scenario == "front":
        lam = _front_lambda(prof)
        _check_front_window(lam, cfg.params["c"])
    results, checks, error = {}, {}, None
    try:
        if cfg.scenario == "eigen":
            results, checks = _eigen(cfg, prof, out)
        elif cfg.scenario == "simulate":
            results, checks = _simulate(cfg, prof, out)
        elif cfg.scenario == "front":
            results, checks = _front(cfg, prof, out, lam)
        elif cfg.scenario == "bump":
            results, checks = _bump(cfg, prof, out)
        elif cfg.scenario == "kernel":
            results, checks = _kernel(cfg, prof, out)
        elif cfg.scenario == "sweep":
            records, rows = sweep(cfg, out)
            results = {"rows": rows}
            checks = {"all_entries_ran": all(r["classification"] != "error" for r in rows)}
            if cfg.params["mode"] == "front":
                checks["all_entries_passed"] = all(r["passed"] for r in rows)
        else:
            results, checks = _analyze(cfg, out)
        if prof is not None:
            results["kpp_validation"] = validate_kpp(prof, nx=64, nu=64).summary()
    except ConfigError:
        raise
    except Exception as exc:
        error = f"{type(exc).__name__}: {exc}"
    rec = RunRecord(cfg.scenario, cfg.to_dict(), _versions(), time.perf_counter() - t0,
                    results, checks, error)
    (out / "record.json").write_text(rec.to_json())
    return rec


def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="kpplab", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", required=True, help="JSON run config")
    ap.add_argument("--out", help="output directory (overrides config 'output')")
    ap.add_argument("--quiet", action="store_true", help="print nothing on success")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.scenario)
        rec = run_scenario(cfg, args.out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if rec.error:
        print(f"error: {rec.error}", file=sys.stderr)
    if not args.quiet or not rec.passed:
        for name, ok in rec.checks.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        print(f"{rec.scenario}: {'ok' if rec.passed else 'failed'} in {rec.wall_time:.2f} s")
    return 0 if rec.passed else 1
