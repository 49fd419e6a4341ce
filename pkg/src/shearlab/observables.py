"""Decay observables: weighted norms along trajectories, velocity recovery and fits.

Power laws are fitted by least squares on ``log q`` against ``log t``.  A fit
carries a status: ``"ok"``, ``"non-decaying"`` (slope above ``-0.2``) or
``"inconclusive"`` (max relative residual above 0.5).  Only ``"ok"`` fits
should be read as evidence of decay.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .discretization import first_derivative_op, solve_laplacian
from .evolution import (
    PropagatorConfig,
    energy_estimate_check,
    recurrence_horizon,
    viscous_generator,
    viscous_propagate,
    trapezoid_step_matrix,
)
from .spectral import apply_funcalc, bracket_decomposition, eigendecompose

__all__ = [
    "FitError",
    "DecayFit",
    "ViscousDampingReport",
    "DissipationReport",
    "fit_power_law",
    "inviscid_fit_window",
    "log_time_grid",
    "velocity_from_vorticity",
    "weighted_norms",
    "damping_fit",
    "velocity_damping_fit",
    "decay_time",
    "viscous_damping_fit",
    "viscous_fit_cap",
    "n_functional",
    "enhanced_dissipation_scan",
    "propagation_observable",
]

MIN_SAMPLES = 8
NON_DECAYING_SLOPE = -0.2
INCONCLUSIVE_RESIDUAL = 0.5


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    residual: float
    t_min: float
    t_max: float
    quantity: str
    status: str = "ok"
    n_samples: int = 0

    @property
    def ok(self):
        return self.status == "ok"


def fit_power_law(times, values, quantity="", expect_decay=True):
    """Least-squares fit ``values ~ prefactor * times**exponent``.

    Raises
    ------
    FitError
        With fewer than eight positive samples.
    """
    t = np.asarray(times, dtype=float)
    q = np.asarray(values, dtype=float)
    use = (t > 0) & (q > 0) & np.isfinite(q)
    if use.sum() < MIN_SAMPLES:
        raise FitError(f"{quantity or 'fit'}: only {int(use.sum())} usable samples (need {MIN_SAMPLES})")
    t, q = t[use], q[use]
    slope, intercept = np.polyfit(np.log(t), np.log(q), 1)
    pref = math.exp(intercept)
    resid = float(np.max(np.abs(q / (pref * t**slope) - 1.0)))
    status = "ok"
    if expect_decay and slope > NON_DECAYING_SLOPE:
        status = "non-decaying"
    elif resid > INCONCLUSIVE_RESIDUAL:
        status = "inconclusive"
    return DecayFit(float(slope), pref, resid, float(t[0]), float(t[-1]), quantity, status, int(t.size))


def inviscid_fit_window(rec, t_min=10.0, cap=300.0):
    """``[t_min, min(rec/2, cap)]``."""
    t_max = min(0.5 * rec, cap)
    if t_max <= t_min:
        raise FitError(f"recurrence horizon {rec:.4g} leaves no fit window above t = {t_min}")
    return t_min, t_max


def log_time_grid(t_min, t_max, n=24):
    if n < 20:
        raise ValueError("fit grids need at least 20 samples")
    return np.geomspace(t_min, t_max, n)


def velocity_from_vorticity(omega, grid, alpha, d_op=None):
    """Stream function ``phi = Delta_alpha^{-1} omega``; ``v1 = -D phi``, ``v2 = i alpha phi``.

    Accepts a single vector, an ``EvolutionState`` or a stack of row vectors.
    """
    w = getattr(omega, "values", omega)
    w = np.asarray(w)
    phi = solve_laplacian(grid, alpha, w.T).T
    if d_op is None:
        d_op = first_derivative_op(grid)
    v1 = -(phi @ d_op.matrix.T)
    v2 = 1j * alpha * phi
    return v1, v2


def weighted_norms(values, k, a_op):
    """Row-wise ``sqrt(h) ||<A>^{-k} v||`` for a stack of vectors."""
    w, Q = bracket_decomposition(a_op)
    c = np.asarray(values) @ Q
    if k:
        c = c * w[None, :] ** (-0.5 * k)
    return math.sqrt(a_op.grid.h) * np.linalg.norm(c, axis=1)


def _row_norms(values, grid):
    return math.sqrt(grid.h) * np.linalg.norm(values, axis=1)


def _check_localized(e_h, window, psi0, tol=1e-8):
    # spectral mass outside the support of g; g itself is not a projection,
    # so g(H) psi0 = psi0 cannot be asked of data of the form g(H) f
    c = e_h.eigenvectors.T @ psi0
    g = window(e_h.eigenvalues)
    err = np.linalg.norm(c[g == 0])
    if err > tol * max(np.linalg.norm(c), np.finfo(float).tiny):
        raise ValueError(f"initial data is not spectrally localized: ||(1-g)psi0|| = {err:.3e}")


def _check_times(e_h, window, t_grid, alpha=1, t_floor=5.0):
    rec = recurrence_horizon(e_h, window.core, alpha)
    t = np.asarray(t_grid, dtype=float)
    if t.min() < t_floor:
        raise ValueError(f"fit times must start at t >= {t_floor}")
    if t.max() > 0.5 * rec * (1 + 1e-9):
        raise ValueError(f"fit times exceed half the recurrence horizon ({0.5 * rec:.4g})")
    return rec


def _localized_trajectory(e_h, window, psi0, alpha, times):
    """``g(H) psi(t)`` for the inviscid flow (``g`` applied in the eigenbasis)."""
    V, w = e_h.eigenvectors, e_h.eigenvalues
    c = (V.T @ psi0) * window(w)
    phases = np.exp(-1j * alpha * np.outer(times, w))
    return (phases * c[None, :]) @ V.T


def damping_fit(e_h, spectral_window, psi0, k, alpha, t_grid, a_op):
    """Fit ``||<A>^{-k} g(H) psi(t)||`` over ``t_grid`` for the inviscid flow."""
    _check_localized(e_h, spectral_window, psi0)
    _check_times(e_h, spectral_window, t_grid, alpha)
    t = np.asarray(t_grid, dtype=float)
    vals = _localized_trajectory(e_h, spectral_window, psi0, alpha, t)
    q = weighted_norms(vals, k, a_op)
    return fit_power_law(t, q, f"weighted_k{k}", expect_decay=True)


def velocity_damping_fit(opset, spectral_window, psi0, alpha, t_grid, e_h=None, return_series=False):
    """Fits of ``||v1(t)||`` and ``||v2(t)||`` for prepared data ``omega0 = m S^{-1} g(H) psi0``."""
    e = e_h if e_h is not None else eigendecompose(opset.h)
    _check_times(e, spectral_window, t_grid, alpha)
    t = np.asarray(t_grid, dtype=float)
    vals = _localized_trajectory(e, spectral_window, psi0, alpha, t)
    omega = (vals @ opset.s_inv.matrix.T) * opset.m_values[None, :]
    v1, v2 = velocity_from_vorticity(omega, opset.grid, alpha, opset.d)
    n1, n2 = _row_norms(v1, opset.grid), _row_norms(v2, opset.grid)
    f1 = fit_power_law(t, n1, "norm_v1")
    f2 = fit_power_law(t, n2, "norm_v2")
    if return_series:
        return f1, f2, (t, n1, n2)
    return f1, f2


def decay_time(times, values, factor=10.0):
    """First time at which ``values`` falls to ``values[0]/factor`` (log-linear interpolation)."""
    t = np.asarray(times, dtype=float)
    q = np.asarray(values, dtype=float)
    target = q[0] / factor
    below = np.nonzero(q <= target)[0]
    if below.size == 0:
        return float("nan")
    i = int(below[0])
    if i == 0:
        return float(t[0])
    lq0, lq1 = math.log(q[i - 1]), math.log(q[i])
    lt = math.log(target)
    frac = (lq0 - lt) / (lq0 - lq1) if lq0 != lq1 else 1.0
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def viscous_fit_cap(opset, alpha, nu, tolerance=0.05):
    """Largest time at which the viscous mixing factor ``exp(-nu alpha^2 U'^2 t^3 / 3)`` stays within ``tolerance``.

    Beyond it, the enhanced-dissipation envelope bends the weighted norm away
    from a pure power law, so a damping exponent there measures a different
    effect.
    """
    if nu == 0:
        return float("inf")
    slope = float(np.max(opset.profile.dU(opset.grid.nodes)))
    return (3.0 * tolerance / (nu * alpha**2 * slope**2)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class ViscousDampingReport:
    fit: DecayFit
    inviscid_fit: DecayFit
    times: np.ndarray
    q_viscous: np.ndarray
    q_inviscid: np.ndarray
    gap: np.ndarray
    gap_constant: float
    t_cap: float
    nu: float

    def gap_at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        return float(self.gap[i])


def viscous_damping_fit(opset, spectral_window, psi0, alpha, nu, t_grid, k=1, dt=1e-2,
                        e_h=None, tolerance=0.05):
    """Damping fit on the viscous trajectory, with the gap to the inviscid one.

    The trajectory covers all of ``t_grid``; the fit uses the samples below
    :func:`viscous_fit_cap`, and the inviscid exponent is refitted on the
    same samples so the two are directly comparable.  ``gap_constant`` is
    the smallest ``C`` with ``|q_visc - q_inv| <= C (nu t)^{1/2}``.
    """
    e = e_h if e_h is not None else eigendecompose(opset.h)
    _check_localized(e, spectral_window, psi0)
    t = np.asarray(t_grid, dtype=float)
    if nu * t.max() > 0.1:
        raise ValueError(f"nu t reaches {nu * t.max():.3g} > 0.1; correction-dominated regime")
    if nu == 0:
        # the inviscid problem: exact propagation, so the gap vanishes identically
        times = t
        qv = weighted_norms(_localized_trajectory(e, spectral_window, psi0, alpha, times), k, opset.a)
    else:
        M = viscous_generator(opset, alpha, nu)
        traj = viscous_propagate(M, psi0, t, PropagatorConfig("trapezoidal", dt), alpha, nu)
        times = traj.times
        G = apply_funcalc(e, spectral_window).matrix
        qv = weighted_norms(traj.values @ G.T, k, opset.a)
    qi = weighted_norms(_localized_trajectory(e, spectral_window, psi0, alpha, times), k, opset.a)
    cap = viscous_fit_cap(opset, alpha, nu, tolerance)
    use = times <= cap
    fv = fit_power_law(times[use], qv[use], f"viscous_weighted_k{k}")
    fi = fit_power_law(times[use], qi[use], f"weighted_k{k}")
    gap = np.abs(qv - qi)
    if nu > 0:
        C = float(np.max(gap / np.sqrt(nu * times)))
    else:
        C = 0.0
    return ViscousDampingReport(fv, fi, times, qv, qi, gap, C, cap, float(nu))


def n_functional(g_psi, alpha, nu, opset):
    """``||g psi|| + ||alpha g psi|| + nu^{1/3} ||D g psi||`` (row-wise for stacks)."""
    v = np.atleast_2d(g_psi)
    base = _row_norms(v, opset.grid)
    der = _row_norms(v @ opset.d.matrix.T, opset.grid)
    out = (1.0 + abs(alpha)) * base + nu ** (1.0 / 3.0) * der
    return out if np.ndim(g_psi) > 1 else float(out[0])


@dataclass(frozen=True)
class DissipationReport:
    nu_list: tuple
    half_times: tuple
    beta: float
    c0_fit: float
    residual: float
    correction_magnitude: tuple
    flagged: tuple = ()
    c0_per_nu: tuple = ()
    M0_per_nu: tuple = ()
    series: dict = field(default_factory=dict)


def _crossing(t_prev, n_prev, t_cur, n_cur, target):
    l0, l1, lt = math.log(n_prev), math.log(n_cur), math.log(target)
    frac = (l0 - lt) / (l0 - l1) if l0 != l1 else 1.0
    return t_prev + frac * (t_cur - t_prev)


def enhanced_dissipation_scan(opset_builder, spectral_window, psi0, alpha, nu_list,
                              t_max_per_nu=None, dt=1e-2, sample_every=0.5, e_h=None):
    """Half-life of ``N(t)`` for each viscosity and the scaling exponent ``beta``.

    Parameters
    ----------
    opset_builder : OperatorSet or callable
        The operator set (or a zero-argument callable returning it).
    t_max_per_nu : callable or sequence, optional
        Horizon per viscosity; defaults to ``5 nu^{-1/3}``.
    dt : float
        Trapezoidal step.
    sample_every : float
        Spacing of the ``N(t)`` samples; the crossing of ``N(0)/2`` is
        located by log-linear interpolation between samples.

    Returns
    -------
    DissipationReport
        ``half_times`` holds NaN for flagged viscosities, which are left
        out of the ``beta`` fit.
    """
    opset = opset_builder() if callable(opset_builder) else opset_builder
    e = e_h if e_h is not None else eigendecompose(opset.h)
    nus = [float(v) for v in nu_list]
    if len(nus) < 2 or math.log10(max(nus) / min(nus)) < 1.5:
        raise ValueError("the viscosity list must span at least 1.5 decades")
    if t_max_per_nu is None:
        tmax = [5.0 * v ** (-1.0 / 3.0) for v in nus]
    elif callable(t_max_per_nu):
        tmax = [float(t_max_per_nu(v)) for v in nus]
    else:
        tmax = [float(x) for x in t_max_per_nu]
    for v, T in zip(nus, tmax):
        if v * T > 0.2:
            raise ValueError(f"nu t_max = {v * T:.3g} exceeds 0.2 for nu = {v}")
        if T < 5.0 * v ** (-1.0 / 3.0) * (1 - 1e-12):
            raise ValueError(f"t_max = {T:.4g} is shorter than 5 nu^(-1/3) for nu = {v}")
    G = apply_funcalc(e, spectral_window).matrix
    psi0 = np.asarray(psi0, dtype=complex)
    gp0 = G @ psi0
    n0_check = n_functional(gp0, alpha, max(nus), opset)
    if n0_check <= 1e-12 * (1 + abs(alpha)) * math.sqrt(opset.grid.h) * max(np.linalg.norm(psi0), 1e-300):
        raise ValueError("degenerate data: g(H) psi0 vanishes, N(0) = 0")

    stride = max(1, int(round(sample_every / dt)))
    halves, flagged, corr, c0s, m0s, series = [], [], [], [], [], {}
    for v, T in zip(nus, tmax):
        M = viscous_generator(opset, alpha, v).matrix
        P = trapezoid_step_matrix(M, dt)
        Ps = np.linalg.matrix_power(P, stride)
        p = psi0.copy()
        n_start = n_functional(gp0, alpha, v, opset)
        ts, ns, norms = [0.0], [n_start], [math.sqrt(opset.grid.h) * np.linalg.norm(p)]
        t_half = float("nan")
        nsteps = int(math.ceil(T / (stride * dt)))
        for j in range(1, nsteps + 1):
            p = Ps @ p
            if not np.all(np.isfinite(p)):
                raise RuntimeError(f"enhanced_dissipation_scan: non-finite state at nu = {v}")
            t = j * stride * dt
            n = n_functional(G @ p, alpha, v, opset)
            ts.append(t)
            ns.append(n)
            norms.append(math.sqrt(opset.grid.h) * np.linalg.norm(p))
            if n <= 0.5 * n_start:
                t_half = _crossing(ts[-2], ns[-2], t, n, 0.5 * n_start)
                break
        ts, ns, norms = np.array(ts), np.array(ns), np.array(norms)
        series[v] = (ts, ns)
        if math.isnan(t_half):
            flagged.append(v)
        halves.append(t_half)
        # early-time envelope rate from samples up to the half-life
        s = v ** (1.0 / 3.0) * ts[1:]
        y = np.log(n_start / ns[1:])
        c0s.append(float(np.dot(s, y) / np.dot(s, s)) if s.size else float("nan"))
        m0 = energy_estimate_check(_NormTrajectory(ts, norms), v)
        m0s.append(m0)
        tc = ts[-1]
        corr.append(float(math.sqrt(v * tc) * math.exp(m0 * v * tc)))

    good = [(v, T) for v, T in zip(nus, halves) if not math.isnan(T)]
    if len(good) >= 2:
        lx = np.log([g[0] for g in good])
        ly = np.log([g[1] for g in good])
        slope, icpt = np.polyfit(lx, ly, 1)
        beta = float(-slope)
        pred = np.exp(icpt + slope * lx)
        resid = float(np.max(np.abs(np.exp(ly) / pred - 1.0)))
    else:
        beta, resid = float("nan"), float("nan")
    valid = [c for c, T in zip(c0s, halves) if not math.isnan(T)]
    c0_fit = float(np.mean(valid)) if valid else float("nan")
    return DissipationReport(tuple(nus), tuple(halves), beta, c0_fit, resid, tuple(corr),
                             tuple(flagged), tuple(c0s), tuple(m0s), series)


class _NormTrajectory:
    """Minimal stand-in so :func:`energy_estimate_check` can read stored norms."""

    def __init__(self, times, norms):
        self.times = times
        self.values = norms[:, None]


_A_EIG_CACHE = weakref.WeakKeyDictionary()


def _a_eigh(a_op):
    hit = _A_EIG_CACHE.get(a_op)
    if hit is None:
        hit = linalg.eigh(a_op.matrix)
        _A_EIG_CACHE[a_op] = hit
    return hit


def propagation_observable(e_h, spectral_window, psi_t, a_op, a, s, theta, t, alpha):
    """``|| chi^{1/2}((A - a - theta alpha t) / (alpha s)) g(H) psi_t ||^2``, ``chi = (1 - tanh)/2``."""
    if s < 1:
        raise ValueError("the scale s must be at least 1")
    V, w = e_h.eigenvectors, e_h.eigenvalues
    gpsi = V @ (spectral_window(w) * (V.T @ np.asarray(psi_t)))
    lam, Q = _a_eigh(a_op)
    xi = (lam - a - theta * alpha * t) / (alpha * s)
    chi = 0.5 * (1.0 - np.tanh(xi))
    c = Q.conj().T @ gpsi
    return float(a_op.grid.h * np.sum(chi * np.abs(c) ** 2))
