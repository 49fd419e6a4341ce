"""Command-line driver: validated configs, single runs, sweeps and CSV reports.

Exit status is 0 for a completed run (physics verdicts live in the ``pass``
columns), 1 for a compute error and 2 for a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .discretization import build_grid
from .evolution import (
    PropagatorConfig,
    default_initial_data,
    recurrence_horizon,
    viscous_generator,
    viscous_propagate,
)
from .observables import (
    damping_fit,
    enhanced_dissipation_scan,
    inviscid_fit_window,
    log_time_grid,
    n_functional,
    velocity_damping_fit,
    velocity_from_vorticity,
    viscous_damping_fit,
    weighted_norms,
)
from .operators import (
    CoercivityError,
    assemble_sigma,
    build_operator_set,
    coercivity_check,
    mourre_cover,
)
from .profiles import (
    check_hypotheses,
    load_table_profile,
    make_algebraic_profile,
    make_tanh_profile,
)
from .spectral import apply_funcalc, eigendecompose, spectrum_report

__all__ = [
    "ConfigError",
    "ComputeError",
    "RunConfig",
    "ResultRecord",
    "parse_config",
    "run_spectrum",
    "run_mourre",
    "run_damping",
    "run_viscous_damping",
    "run_enhanced",
    "run_sweep",
    "main",
]

SCHEMA_LINE = f"# shearflow-damping-lab v{__version__} schema=1"
COMMANDS = ("spectrum", "mourre", "damping", "viscous-damping", "enhanced")
SWEEP_CAP = 256

SCHEMAS = {
    "spectrum": ["run_id", "L", "alpha", "N", "Y", "lambda0", "c0", "n_outside", "max_excursion", "pass"],
    "mourre": ["run_id", "window_lo", "window_hi", "theta_I", "projected_min", "pass", "width_at_pass"],
    "damping": ["run_id", "k", "exponent", "prefactor", "residual", "t_min", "t_max", "pass"],
    "enhanced": ["run_id", "nu", "T_half", "beta", "c0_fit", "residual", "pass"],
    "trajectory": ["t", "norm_psi", "norm_weighted_k1", "norm_weighted_k2", "norm_v1", "norm_v2", "N_of_t"],
}
OUTPUT_FILE = {
    "spectrum": "spectrum",
    "mourre": "mourre",
    "damping": "damping",
    "viscous-damping": "damping",
    "enhanced": "enhanced",
}

DEFAULT_NU = {"viscous-damping": (1e-5,), "enhanced": (1e-3, 3e-4, 1e-4, 3e-5)}


class ConfigError(ValueError):
    pass


class ComputeError(RuntimeError):
    def __init__(self, op, exc):
        super().__init__(f"{op}: {type(exc).__name__}: {exc}")
        self.op = op


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; every field has a documented default."""

    command: str = "spectrum"
    profile: str = "tanh"
    L: tuple = (2.0,)
    k: int = 2
    table: str = ""
    alpha: tuple = (1,)
    nu: tuple = (0.0,)
    N: int = 2048
    Y: float = None
    window: tuple = (-0.4, 0.4)
    delta_g: float = None
    k_list: tuple = (1, 2)
    t_min: float = 10.0
    tmax: float = None
    n_times: int = 24
    scheme: str = "trapezoidal"
    dt: float = 1e-2
    out: str = "shearlab-out"

    def grid_half_width(self, L):
        return float(self.Y) if self.Y is not None else 40.0 * max(1.0, float(L))

    def single(self, L, alpha, nu=None):
        nus = self.nu if nu is None else (nu,)
        return dataclasses.replace(self, L=(float(L),), alpha=(int(alpha),), nu=tuple(nus))

    def identity(self):
        """Canonical dict used for the run id (output directory excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d["Y_effective"] = [self.grid_half_width(L) for L in self.L]
        return d

    @property
    def run_id(self):
        blob = json.dumps(self.identity(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class ResultRecord:
    run_id: str
    subcommand: str
    metrics: dict
    rows: list
    trajectory: list = None
    wall_clock: float = 0.0
    error: str = ""


# ---------------------------------------------------------------- config --

_KEYS = {
    "profile", "L", "k", "table", "alpha", "nu", "N", "Y", "window", "delta_g",
    "k_list", "t_min", "tmax", "n_times", "scheme", "dt", "out",
}


def _floats(key, text):
    try:
        vals = tuple(float(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as numbers") from None
    if not vals:
        raise ConfigError(f"{key}: empty value")
    return vals


def _ints(key, text):
    vals = _floats(key, text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{key}: expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _read_config_file(path):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path!r} ({exc.strerror})") from None
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
        out[key] = val
    return out


def _validate(raw, command):
    cfg = {}
    prof = str(raw.get("profile", "tanh"))
    if prof.startswith("table:"):
        cfg["profile"], cfg["table"] = "table", prof[len("table:"):]
    elif prof in ("tanh", "algebraic", "table"):
        cfg["profile"] = prof
        cfg["table"] = str(raw.get("table", ""))
    else:
        raise ConfigError(f"profile: unknown kind {prof!r} (tanh, algebraic, table:<path>)")
    if cfg["profile"] == "table" and not cfg["table"]:
        raise ConfigError("table: a table profile needs a file path")
    L = _floats("L", raw.get("L", "2"))
    if any(not (math.isfinite(x) and x > 0) for x in L):
        raise ConfigError(f"L: stretching length must be positive, got {raw.get('L')!r}")
    cfg["L"] = L
    k = _ints("k", raw.get("k", "2"))
    if len(k) != 1 or k[0] < 2:
        raise ConfigError(f"k: algebraic decay order must be a single integer >= 2, got {raw.get('k')!r}")
    cfg["k"] = k[0]
    alpha = _ints("alpha", raw.get("alpha", "1"))
    if any(a == 0 for a in alpha):
        raise ConfigError("alpha: alpha = 0 is the no-mixing mode (d_t omega = 0); nothing evolves")
    cfg["alpha"] = alpha
    default_nu = " ".join(repr(v) for v in DEFAULT_NU.get(command, (0.0,)))
    nu = _floats("nu", raw.get("nu", default_nu))
    if any(not (0 <= v <= 1) for v in nu):
        raise ConfigError(f"nu: viscosity must lie in [0, 1], got {raw.get('nu')!r}")
    if command in ("viscous-damping", "enhanced") and any(v == 0 for v in nu):
        raise ConfigError("nu: viscous runs need nu > 0")
    cfg["nu"] = nu
    N = _ints("N", raw.get("N", "2048"))
    if len(N) != 1 or N[0] < 8:
        raise ConfigError(f"N: need a single integer >= 8, got {raw.get('N')!r}")
    cfg["N"] = N[0]
    if raw.get("Y") is not None:
        Y = _floats("Y", raw["Y"])
        if len(Y) != 1 or not (math.isfinite(Y[0]) and Y[0] > 0):
            raise ConfigError(f"Y: half-width must be a single positive number, got {raw['Y']!r}")
        cfg["Y"] = Y[0]
    win = _floats("window", raw.get("window", "-0.4,0.4"))
    if len(win) != 2 or not win[0] < win[1]:
        raise ConfigError(f"window: expected 'a,b' with a < b, got {raw.get('window')!r}")
    cfg["window"] = win
    if raw.get("delta_g") is not None:
        dg = _floats("delta_g", raw["delta_g"])
        if len(dg) != 1 or not dg[0] > 0:
            raise ConfigError("delta_g: must be a single positive number")
        cfg["delta_g"] = dg[0]
    kl = _ints("k_list", raw.get("k_list", "1,2"))
    if any(x < 0 for x in kl):
        raise ConfigError("k_list: weights must be non-negative")
    cfg["k_list"] = kl
    cfg["t_min"] = _floats("t_min", raw.get("t_min", "10"))[0]
    if raw.get("tmax") is not None:
        tm = _floats("tmax", raw["tmax"])
        if len(tm) != 1 or not tm[0] > cfg["t_min"]:
            raise ConfigError("tmax: must exceed t_min")
        cfg["tmax"] = tm[0]
    nt = _ints("n_times", raw.get("n_times", "24"))
    if nt[0] < 20:
        raise ConfigError("n_times: fit grids need at least 20 samples")
    cfg["n_times"] = nt[0]
    scheme = str(raw.get("scheme", "trapezoidal"))
    if scheme not in ("trapezoidal", "dense-exponential-oracle"):
        raise ConfigError(f"scheme: unknown viscous scheme {scheme!r}")
    cfg["scheme"] = scheme
    dt = _floats("dt", raw.get("dt", "0.01"))
    if len(dt) != 1 or not (math.isfinite(dt[0]) and dt[0] > 0):
        raise ConfigError("dt: must be a single positive number")
    cfg["dt"] = dt[0]
    cfg["out"] = str(raw.get("out", "shearlab-out"))
    return cfg


def parse_config(argv=None, command=None, path=None, flags=None):
    """Build a :class:`RunConfig` from a config file and flag overrides (flags win).

    Either pass ``argv`` (command line without the program name) or the
    ``command``/``path``/``flags`` triple.  Raises :class:`ConfigError`.
    """
    if argv is not None:
        ns, _ = _parse_args(argv)
        command = ns.target if ns.command == "sweep" else ns.command
        path = ns.config
        flags = {k: v for k, v in vars(ns).items() if k in _KEYS and v is not None}
    raw = {}
    if path:
        raw.update(_read_config_file(path))
    raw.update(flags or {})
    command = command or "spectrum"
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    return RunConfig(command=command, **_validate(raw, command))


# ------------------------------------------------------------ execution --

def _profile(cfg, L):
    if cfg.profile == "tanh":
        return make_tanh_profile(L)
    if cfg.profile == "algebraic":
        return make_algebraic_profile(L, cfg.k)
    return load_table_profile(cfg.table)


def _setup(cfg, op="build_operator_set"):
    L, alpha = cfg.L[0], cfg.alpha[0]
    p = _profile(cfg, L)
    grid = build_grid(cfg.grid_half_width(L), cfg.N)
    try:
        opset = build_operator_set(p, grid, alpha)
        e = eigendecompose(opset.h)
    except CoercivityError:
        raise
    except Exception as exc:
        raise ComputeError(op, exc) from exc
    return p, grid, opset, e


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    return str(v)


def _band(k):
    if k in (1, "v1"):
        return (-1.2, -0.85)
    if k in (2, "v2"):
        return (-2.3, -1.7)
    if k == 0:
        return (-0.02, 0.02)
    return (-1.15 * k, -0.85 * k)


def _fit_pass(k, fit, key=None):
    lo, hi = _band(key if key is not None else k)
    in_band = lo <= fit.exponent <= hi
    return bool(in_band and (fit.ok or k == 0))


def run_spectrum(cfg):
    """lambda0, c0 and spectrum confinement of ``H``."""
    t0 = time.perf_counter()
    L, alpha = cfg.L[0], cfg.alpha[0]
    p = _profile(cfg, L)
    grid = build_grid(cfg.grid_half_width(L), cfg.N)
    try:
        hyp = check_hypotheses(p, grid)
        c0 = coercivity_check(assemble_sigma(grid, p, alpha))
    except Exception as exc:
        raise ComputeError("check_hypotheses/coercivity_check", exc) from exc
    n_out, exc_max, passed = float("nan"), float("nan"), False
    metrics = {"lambda0": hyp.lambda0, "c0": c0, "h1": hyp.h1_pass, "h2": hyp.h2_pass, "h3": hyp.h3_pass}
    if c0 > 1e-10:
        try:
            opset = build_operator_set(p, grid, alpha, with_remainder=False)
            e = eigendecompose(opset.h)
            rep = spectrum_report(e, p.U_minus, p.U_plus)
            if rep.n_outside or rep.n_isolated:
                fine = grid.refined()
                ef = eigendecompose(build_operator_set(p, fine, alpha, with_remainder=False).h)
                rep = spectrum_report(e, p.U_minus, p.U_plus, refined=ef)
                n_out = rep.persistent_outside
                iso = rep.persistent_isolated
            else:
                n_out, iso = 0, 0
        except Exception as exc:
            raise ComputeError("spectrum_report", exc) from exc
        exc_max = rep.max_excursion
        metrics.update(n_isolated=iso, isolated_candidates=list(rep.isolated_candidates))
        passed = bool(hyp.all_pass and n_out == 0 and iso == 0)
    row = [cfg.run_id, L, alpha, cfg.N, grid.Y, hyp.lambda0, c0, n_out, exc_max, passed]
    metrics.update(n_outside=n_out, max_excursion=exc_max)
    return ResultRecord(cfg.run_id, "spectrum", metrics, [row], wall_clock=time.perf_counter() - t0)


def run_mourre(cfg):
    """Bisection cover of ``window`` by Mourre windows."""
    t0 = time.perf_counter()
    p, grid, opset, e = _setup(cfg)
    try:
        cover = mourre_cover(opset, cfg.window, eig=e)
    except Exception as exc:
        raise ComputeError("mourre_check", exc) from exc
    rows = [
        [cfg.run_id, r.window[0], r.window[1], r.theta_I, r.projected_min, r.passed, cover.width_at_pass]
        for r in cover.reports
    ]
    metrics = {
        "covered": cover.covered,
        "widths_tried": list(cover.widths_tried),
        "traces": [r.compression_trace for r in cover.reports],
        "ranks": [r.rank for r in cover.reports],
    }
    return ResultRecord(cfg.run_id, "mourre", metrics, rows, wall_clock=time.perf_counter() - t0)


def _time_grid(cfg, e, bump, alpha, cap=300.0):
    rec = recurrence_horizon(e, bump.core, alpha)
    lo, hi = inviscid_fit_window(rec, cfg.t_min, cap)
    if cfg.tmax is not None:
        hi = min(hi, cfg.tmax)
    return rec, log_time_grid(lo, hi, cfg.n_times)


def trajectory_rows(opset, e, bump, times, values, alpha, nu):
    """Per-sample norms for the trajectory CSV."""
    G = apply_funcalc(e, bump).matrix
    gv = values @ G.T
    h = opset.grid.h
    psi_n = math.sqrt(h) * np.linalg.norm(values, axis=1)
    w1 = weighted_norms(gv, 1, opset.a)
    w2 = weighted_norms(gv, 2, opset.a)
    omega = (gv @ opset.s_inv.matrix.T) * opset.m_values[None, :]
    v1, v2 = velocity_from_vorticity(omega, opset.grid, alpha, opset.d)
    n1 = math.sqrt(h) * np.linalg.norm(v1, axis=1)
    n2 = math.sqrt(h) * np.linalg.norm(v2, axis=1)
    Nt = n_functional(gv, alpha, nu, opset)
    return [list(r) for r in zip(times, psi_n, w1, w2, n1, n2, Nt)]


def run_damping(cfg):
    """Inviscid weighted-norm and velocity decay fits."""
    t0 = time.perf_counter()
    p, grid, opset, e = _setup(cfg)
    alpha = cfg.alpha[0]
    try:
        psi0, bump = default_initial_data(opset, e, cfg.window, cfg.delta_g)
        rec, tg = _time_grid(cfg, e, bump, alpha)
        rows, metrics = [], {"recurrence_horizon": rec}
        for k in cfg.k_list:
            f = damping_fit(e, bump, psi0, k, alpha, tg, opset.a)
            rows.append([cfg.run_id, k, f.exponent, f.prefactor, f.residual, f.t_min, f.t_max,
                         _fit_pass(k, f)])
            metrics[f"status_k{k}"] = f.status
        f1, f2 = velocity_damping_fit(opset, bump, psi0, alpha, tg, e)
        for key, f in (("v1", f1), ("v2", f2)):
            rows.append([cfg.run_id, key, f.exponent, f.prefactor, f.residual, f.t_min, f.t_max,
                         _fit_pass(None, f, key)])
            metrics[f"status_{key}"] = f.status
        V, w = e.eigenvectors, e.eigenvalues
        c = V.T @ psi0
        vals = (np.exp(-1j * alpha * np.outer(tg, w)) * c[None, :]) @ V.T
        traj = trajectory_rows(opset, e, bump, tg, vals, alpha, 0.0)
    except Exception as exc:
        raise ComputeError("damping_fit", exc) from exc
    return ResultRecord(cfg.run_id, "damping", metrics, rows, traj, time.perf_counter() - t0)


def run_viscous_damping(cfg):
    """Viscous k=1 fit against the inviscid fit on the same (capped) window."""
    t0 = time.perf_counter()
    p, grid, opset, e = _setup(cfg)
    alpha = cfg.alpha[0]
    try:
        psi0, bump = default_initial_data(opset, e, cfg.window, cfg.delta_g)
        rec, tg = _time_grid(cfg, e, bump, alpha, cap=100.0)
        rows, metrics, traj = [], {"recurrence_horizon": rec}, None
        for i, nu in enumerate(cfg.nu):
            rep = viscous_damping_fit(opset, bump, psi0, alpha, nu, tg, k=1, dt=cfg.dt, e_h=e)
            ok = abs(rep.fit.exponent - rep.inviscid_fit.exponent) <= 0.05 and rep.fit.ok
            for tag, f in ((f"1@nu={nu:g}", rep.fit), (f"1_inviscid@nu={nu:g}", rep.inviscid_fit)):
                rows.append([cfg.run_id, tag, f.exponent, f.prefactor, f.residual, f.t_min,
                             f.t_max, bool(ok)])
            metrics[f"nu={nu:g}"] = {
                "gap_constant": rep.gap_constant,
                "t_cap": rep.t_cap,
                "gap_at_t_max": float(rep.gap[-1]),
                "t_max": float(rep.times[-1]),
            }
            if i == 0:
                M = viscous_generator(opset, alpha, nu)
                tr = viscous_propagate(M, psi0, tg, PropagatorConfig("trapezoidal", cfg.dt), alpha, nu)
                traj = trajectory_rows(opset, e, bump, tr.times, tr.values, alpha, nu)
    except Exception as exc:
        raise ComputeError("viscous_damping_fit", exc) from exc
    return ResultRecord(cfg.run_id, "viscous-damping", metrics, rows, traj, time.perf_counter() - t0)


def run_enhanced(cfg):
    """Half-lives of ``N(t)`` over the viscosity list and the exponent beta."""
    t0 = time.perf_counter()
    p, grid, opset, e = _setup(cfg)
    alpha = cfg.alpha[0]
    try:
        psi0, bump = default_initial_data(opset, e, cfg.window, cfg.delta_g)
        tmax = None if cfg.tmax is None else [cfg.tmax] * len(cfg.nu)
        rep = enhanced_dissipation_scan(opset, bump, psi0, alpha, cfg.nu, tmax, dt=cfg.dt, e_h=e)
    except Exception as exc:
        raise ComputeError("enhanced_dissipation_scan", exc) from exc
    rows = []
    for nu, th, c0 in zip(rep.nu_list, rep.half_times, rep.c0_per_nu):
        rows.append([cfg.run_id, nu, th, None, c0, None, not math.isnan(th)])
    beta_ok = bool(not math.isnan(rep.beta) and abs(rep.beta - 1.0 / 3.0) <= 0.1)
    rows.append([cfg.run_id, "all", None, rep.beta, rep.c0_fit, rep.residual, beta_ok])
    metrics = {
        "beta": rep.beta,
        "c0_fit": rep.c0_fit,
        "flagged": list(rep.flagged),
        "correction_magnitude": list(rep.correction_magnitude),
        "M0": list(rep.M0_per_nu),
    }
    return ResultRecord(cfg.run_id, "enhanced", metrics, rows, wall_clock=time.perf_counter() - t0)


RUNNERS = {
    "spectrum": run_spectrum,
    "mourre": run_mourre,
    "damping": run_damping,
    "viscous-damping": run_viscous_damping,
    "enhanced": run_enhanced,
}


def _run_one(cfg):
    """Sweep worker: never raises, returns the record with ``error`` set on failure."""
    try:
        return RUNNERS[cfg.command](cfg)
    except Exception as exc:
        return ResultRecord(cfg.run_id, cfg.command, {}, [], error=f"{type(exc).__name__}: {exc}")


def sweep_configs(cfg, cap=SWEEP_CAP):
    """Cross product over ``L``, ``alpha`` and (except for ``enhanced``) ``nu``."""
    nus = [None] if cfg.command == "enhanced" else list(cfg.nu)
    tuples = list(itertools.product(cfg.L, cfg.alpha, nus))
    if len(tuples) > cap:
        raise ConfigError(f"sweep: {len(tuples)} tuples exceed the cap of {cap}")
    return [cfg.single(L, a, nu) for L, a, nu in tuples]


def run_sweep(cfg, workers=None, cap=SWEEP_CAP):
    """Run every tuple of the cross product; results in deterministic tuple order."""
    configs = sweep_configs(cfg, cap)
    workers = workers or min(len(configs), os.cpu_count() or 1)
    if workers <= 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, configs))


# --------------------------------------------------------------- output --

def _csv_bytes(kind, rows):
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEMAS[kind])
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def _failed_row(cfg, kind):
    cols = SCHEMAS[kind]
    row = ["nan"] * len(cols)
    row[0] = cfg.run_id
    row[cols.index("pass")] = "false"
    return row


def write_outputs(cfg, records, configs=None):
    """Write CSVs and a JSON record into ``cfg.out``; returns the written paths."""
    os.makedirs(cfg.out, exist_ok=True)
    kind = OUTPUT_FILE[cfg.command]
    rows = []
    for i, rec in enumerate(records):
        if rec.error:
            rows.append(_failed_row(configs[i] if configs else cfg, kind))
        else:
            rows.extend(rec.rows)
    paths = []
    path = os.path.join(cfg.out, f"{kind}.csv")
    with open(path, "wb") as fh:
        fh.write(_csv_bytes(kind, rows))
    paths.append(path)
    traj = next((r.trajectory for r in records if r.trajectory), None)
    if traj is not None:
        tpath = os.path.join(cfg.out, "trajectory.csv")
        with open(tpath, "wb") as fh:
            fh.write(_csv_bytes("trajectory", traj))
        paths.append(tpath)
    meta = {
        "run_id": cfg.run_id,
        "subcommand": cfg.command,
        "config": cfg.identity(),
        "records": [
            {"run_id": r.run_id, "metrics": r.metrics, "wall_clock": r.wall_clock, "error": r.error}
            for r in records
        ],
    }
    jpath = os.path.join(cfg.out, f"record_{cfg.command}.json")
    with open(jpath, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
    paths.append(jpath)
    return paths


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return repr(o)


# ------------------------------------------------------------------ main --

_HELP_DEFAULTS = """defaults: profile=tanh L=2 k=2 alpha=1 N=2048 Y=40*max(1,L) window=-0.4,0.4
delta_g=0.1*|window| k_list=1,2 t_min=10 tmax=auto (min(recurrence/2, 300); 100 for
viscous-damping; 5*nu^(-1/3) for enhanced) n_times=24 dt=0.01 out=shearlab-out
nu: 1e-5 for viscous-damping, 1e-3,3e-4,1e-4,3e-5 for enhanced.
Config files hold key=value lines with the same keys (plus k_list, t_min,
n_times, delta_g, scheme, table); flags override the file."""


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", help="tanh | algebraic | table:<path>")
    common.add_argument("--L", help="stretching length (comma list in sweeps)")
    common.add_argument("--k", help="algebraic decay order (>= 2)")
    common.add_argument("--alpha", help="streamwise wavenumber, nonzero integer (comma list in sweeps)")
    common.add_argument("--nu", help="viscosity or comma list")
    common.add_argument("--N", help="interior grid nodes")
    common.add_argument("--Y", help="half-width of the truncated line")
    common.add_argument("--window", help="spectral window a,b")
    common.add_argument("--dt", help="trapezoidal step")
    common.add_argument("--tmax", help="end of the time window")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="key=value config file")
    ap = argparse.ArgumentParser(
        prog="shearlab",
        description="Shear-flow damping laboratory.",
        epilog=_HELP_DEFAULTS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], epilog=_HELP_DEFAULTS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    sw = sub.add_parser("sweep", parents=[common], epilog=_HELP_DEFAULTS,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    sw.add_argument("target", choices=COMMANDS)
    sw.add_argument("--workers", type=int, default=None)
    return ap


def _parse_args(argv):
    ap = _parser()
    return ap.parse_args(argv), ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns, _ = _parse_args(argv)
    except SystemExit as ex:
        # argparse exits 2 on malformed flags, 0 for --help/--version
        return int(ex.code or 0)
    flags = {k: v for k, v in vars(ns).items() if k in _KEYS and v is not None}
    sweep = ns.command == "sweep"
    command = ns.target if sweep else ns.command
    try:
        cfg = parse_config(command=command, path=ns.config, flags=flags)
        if not sweep and (len(cfg.L) > 1 or len(cfg.alpha) > 1):
            raise ConfigError("L/alpha: lists are only accepted by 'shearlab sweep'")
        configs = sweep_configs(cfg) if sweep else None
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    if sweep:
        records = run_sweep(cfg, workers=ns.workers)
        write_outputs(cfg, records, configs)
        for r in records:
            if r.error:
                sys.stderr.write(f"tuple {r.run_id} failed: {r.error}\n")
        return 0
    try:
        record = RUNNERS[command](cfg)
    except (ComputeError, CoercivityError) as exc:
        sys.stderr.write(f"compute error: {exc}\n")
        return 1
    except Exception as exc:
        sys.stderr.write(f"compute error: {command}: {type(exc).__name__}: {exc}\n")
        traceback.print_exc(file=sys.stderr)
        return 1
    write_outputs(cfg, [record])
    return 0


if __name__ == "__main__":
    sys.exit(main())
