"""Mixing-layer shear profiles and numerical checks of the stability hypotheses.

Every profile exposes closed-form (or precomputed) evaluators for the
velocity ``U`` and the weight ``m = sqrt(-U''/U)`` together with their first
two derivatives.  The zero of ``U`` is a removable singularity of ``m``; it is
never handled by dividing ``U''`` by ``U`` numerically near the zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, linalg, special

__all__ = [
    "ShearProfile",
    "TanhProfile",
    "AlgebraicProfile",
    "TableProfile",
    "SyntheticProfile",
    "Tolerances",
    "HypothesisReport",
    "make_tanh_profile",
    "make_algebraic_profile",
    "load_table_profile",
    "check_hypotheses",
    "schrodinger_lambda0",
]


class ShearProfile:
    """Base class for a monotone shear profile ``U(y)``.

    Subclasses implement the six evaluators.  The default ``dev_plus`` /
    ``dev_minus`` and ``curvature_ratio`` fall back to plain subtraction and
    division; the closed-form families override them so that the far tails
    stay accurate.
    """

    kind = "abstract"
    L = 1.0
    k = None
    U_minus = -1.0
    U_plus = 1.0

    def U(self, y):
        raise NotImplementedError

    def dU(self, y):
        raise NotImplementedError

    def d2U(self, y):
        raise NotImplementedError

    def m(self, y):
        raise NotImplementedError

    def dm(self, y):
        raise NotImplementedError

    def d2m(self, y):
        raise NotImplementedError

    def dev_plus(self, y):
        """``U(y) - U_plus``."""
        return self.U(y) - self.U_plus

    def dev_minus(self, y):
        """``U(y) - U_minus``."""
        return self.U(y) - self.U_minus

    def curvature_ratio(self, y, side):
        """``U''/(U - U_side)`` with ``side`` in ``{"plus", "minus"}``."""
        dev = self.dev_plus(y) if side == "plus" else self.dev_minus(y)
        return self.d2U(y) / dev

    def m_ratio(self, y, shift):
        """``m(y + shift) / m(y)``, used by the discrete viscous remainder."""
        return self.m(np.asarray(y) + shift) / self.m(y)

    def describe(self):
        return {"kind": self.kind, "L": self.L, "k": self.k}

    def __repr__(self):
        return f"{type(self).__name__}(L={self.L!r}, k={self.k!r})"


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


class TanhProfile(ShearProfile):
    """``U(y) = tanh(y/L)``, for which ``m = (sqrt(2)/L) sech(y/L)``."""

    kind = "tanh"

    def __init__(self, L):
        self.L = float(L)
        self.k = None
        self.U_minus = -1.0
        self.U_plus = 1.0

    def __reduce__(self):
        return (TanhProfile, (self.L,))

    def U(self, y):
        return np.tanh(np.asarray(y, dtype=float) / self.L)

    def dU(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return 1.0 / (np.cosh(z) ** 2 * self.L)

    def d2U(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return -2.0 * np.tanh(z) / (np.cosh(z) ** 2 * self.L**2)

    def m(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return math.sqrt(2.0) / (np.cosh(z) * self.L)

    def dm(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return -math.sqrt(2.0) * np.tanh(z) / (np.cosh(z) * self.L**2)

    def d2m(self, y):
        z = np.asarray(y, dtype=float) / self.L
        sech = 1.0 / np.cosh(z)
        return math.sqrt(2.0) * sech * (np.tanh(z) ** 2 - sech**2) / self.L**3

    def dev_plus(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return -2.0 * special.expit(-2.0 * z)

    def dev_minus(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return 2.0 * special.expit(2.0 * z)

    def curvature_ratio(self, y, side):
        z = np.asarray(y, dtype=float) / self.L
        if side == "plus":
            return 4.0 * np.tanh(z) * special.expit(2.0 * z) / self.L**2
        return -4.0 * np.tanh(z) * special.expit(-2.0 * z) / self.L**2

    def m_ratio(self, y, shift):
        z = np.asarray(y, dtype=float) / self.L
        return np.exp(_logcosh(z) - _logcosh(z + shift / self.L))


class AlgebraicProfile(ShearProfile):
    """``U(y) = V(y/L)`` with ``V(z) = int_0^z (1+s^2)^{-k} ds``.

    ``V`` is evaluated as ``z * 2F1(1/2, k; 3/2; -z^2)``, so ``z/V(z)`` is the
    reciprocal of a hypergeometric factor that equals one at ``z = 0``.  This
    removes the singularity of ``-U''/U`` at the origin analytically.
    """

    kind = "algebraic"

    def __init__(self, L, k):
        self.L = float(L)
        self.k = int(k)
        vinf = 0.5 * special.beta(0.5, self.k - 0.5)
        self.V_inf = vinf
        self.U_minus = -vinf
        self.U_plus = vinf

    def __reduce__(self):
        return (AlgebraicProfile, (self.L, self.k))

    # hypergeometric building blocks in the stretched variable z
    def _F(self, z):
        return special.hyp2f1(0.5, self.k, 1.5, -(z**2))

    def _dF(self, z):
        return -2.0 * z * (self.k / 3.0) * special.hyp2f1(1.5, self.k + 1, 2.5, -(z**2))

    def _d2F(self, z):
        k = self.k
        G = special.hyp2f1(1.5, k + 1, 2.5, -(z**2))
        dG = -2.0 * z * (1.5 * (k + 1) / 2.5) * special.hyp2f1(2.5, k + 2, 3.5, -(z**2))
        return -(2.0 * k / 3.0) * (G + z * dG)

    def _V(self, z):
        return z * self._F(z)

    def _tail(self, z):
        """``int_z^inf (1+s^2)^{-k} ds`` for ``z >= 0``."""
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        big = z >= 1.0
        k = self.k
        zb = z[big]
        out[big] = zb ** (1 - 2 * k) / (2 * k - 1) * special.hyp2f1(
            k, k - 0.5, k + 0.5, -1.0 / zb**2
        )
        out[~big] = self.V_inf - self._V(z[~big])
        return out

    def U(self, y):
        return self._V(np.asarray(y, dtype=float) / self.L)

    def dU(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return (1.0 + z**2) ** (-self.k) / self.L

    def d2U(self, y):
        z = np.asarray(y, dtype=float) / self.L
        return -2.0 * self.k * z * (1.0 + z**2) ** (-self.k - 1) / self.L**2

    def m(self, y):
        z = np.asarray(y, dtype=float) / self.L
        msq = 2.0 * self.k * (1.0 + z**2) ** (-self.k - 1) / self._F(z)
        return np.sqrt(msq) / self.L

    def _logm_derivs(self, z):
        k = self.k
        F, dF, d2F = self._F(z), self._dF(z), self._d2F(z)
        l1 = -(k + 1) * z / (1.0 + z**2) - dF / (2.0 * F)
        l2 = -(k + 1) * (1.0 - z**2) / (1.0 + z**2) ** 2 - (d2F * F - dF**2) / (2.0 * F**2)
        return l1, l2

    def dm(self, y):
        z = np.asarray(y, dtype=float) / self.L
        l1, _ = self._logm_derivs(z)
        return self.m(y) * l1 / self.L

    def d2m(self, y):
        z = np.asarray(y, dtype=float) / self.L
        l1, l2 = self._logm_derivs(z)
        return self.m(y) * (l2 + l1**2) / self.L**2

    def dev_plus(self, y):
        z = np.asarray(y, dtype=float) / self.L
        out = np.where(z >= 0, -self._tail(np.abs(z)), 0.0)
        neg = z < 0
        out = np.where(neg, -(self.V_inf + self._V(np.abs(z))), out)
        return out

    def dev_minus(self, y):
        return -self.dev_plus(-np.asarray(y, dtype=float))

    def m_ratio(self, y, shift):
        y = np.asarray(y, dtype=float)
        z0 = y / self.L
        z1 = (y + shift) / self.L
        k = self.k
        log_ratio = -(k + 1) * 0.5 * (np.log1p(z1**2) - np.log1p(z0**2)) - 0.5 * (
            np.log(self._F(z1)) - np.log(self._F(z0))
        )
        return np.exp(log_ratio)


class TableProfile(ShearProfile):
    """Profile read from a table of ``y, U, U', U''`` samples.

    ``m`` is derived from the table as ``sqrt(-U''/U)``.  Nodes where ``|U|``
    falls below ``zero_tol`` are filled by interpolating ``m^2`` across the
    zero of ``U``.  Derivatives of ``m`` come from a cubic spline of ``m``.
    """

    kind = "custom-table"

    def __init__(self, y, U, dU, d2U, zero_tol=1e-8):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size < 4:
            raise ValueError("table needs at least 4 rows")
        if np.any(np.diff(y) <= 0):
            raise ValueError("table y column must be strictly increasing")
        self.L = 1.0
        self.k = None
        self._y = y
        self._U = np.asarray(U, dtype=float)
        self._dU = np.asarray(dU, dtype=float)
        self._d2U = np.asarray(d2U, dtype=float)
        self.U_minus = float(self._U[0])
        self.U_plus = float(self._U[-1])
        msq = np.full_like(y, np.nan)
        ok = np.abs(self._U) > zero_tol * np.max(np.abs(self._U))
        msq[ok] = np.maximum(-self._d2U[ok] / self._U[ok], 0.0)
        if not np.all(ok):
            msq[~ok] = interpolate.CubicSpline(y[ok], msq[ok])(y[~ok])
        self._m_spline = interpolate.CubicSpline(y, np.sqrt(msq))
        self._splines = [interpolate.CubicSpline(y, c) for c in (self._U, self._dU, self._d2U)]

    def __reduce__(self):
        return (TableProfile, (self._y, self._U, self._dU, self._d2U))

    def U(self, y):
        return self._splines[0](y)

    def dU(self, y):
        return self._splines[1](y)

    def d2U(self, y):
        return self._splines[2](y)

    def m(self, y):
        return self._m_spline(y)

    def dm(self, y):
        return self._m_spline(y, 1)

    def d2m(self, y):
        return self._m_spline(y, 2)


class SyntheticProfile(ShearProfile):
    """Velocity of ``base`` with the weight frozen to a constant ``m_value``.

    ``U''`` is redefined as ``-U m^2`` so that the vorticity and symmetrized
    formulations stay algebraically consistent.  With ``m_value = 0`` the
    generator reduces to multiplication by ``U``.
    """

    kind = "synthetic"

    def __init__(self, base, m_value=0.0):
        self.base = base
        self.m_value = float(m_value)
        self.L = base.L
        self.k = base.k
        self.U_minus = base.U_minus
        self.U_plus = base.U_plus

    def __reduce__(self):
        return (SyntheticProfile, (self.base, self.m_value))

    def U(self, y):
        return self.base.U(y)

    def dU(self, y):
        return self.base.dU(y)

    def d2U(self, y):
        return -self.base.U(y) * self.m_value**2

    def m(self, y):
        return np.full(np.shape(y), self.m_value, dtype=float)

    def dm(self, y):
        return np.zeros(np.shape(y))

    def d2m(self, y):
        return np.zeros(np.shape(y))

    def dev_plus(self, y):
        return self.base.dev_plus(y)

    def dev_minus(self, y):
        return self.base.dev_minus(y)

    def m_ratio(self, y, shift):
        return np.ones(np.shape(y))

    def describe(self):
        d = self.base.describe()
        d.update(kind=self.kind, m_value=self.m_value)
        return d


def make_tanh_profile(L):
    if not (np.isfinite(L) and L > 0):
        raise ValueError(f"stretching length L must be positive, got {L!r}")
    return TanhProfile(L)


def make_algebraic_profile(L, k):
    if not (np.isfinite(L) and L > 0):
        raise ValueError(f"stretching length L must be positive, got {L!r}")
    if int(k) != k or k < 2:
        raise ValueError(f"algebraic decay order k must be an integer >= 2, got {k!r}")
    return AlgebraicProfile(L, int(k))


def load_table_profile(path):
    """Read a whitespace-separated table with header ``y U Uprime Uprimeprime``."""
    with open(path) as fh:
        header = fh.readline().split()
        if header != ["y", "U", "Uprime", "Uprimeprime"]:
            raise ValueError(f"unexpected table header {header!r}")
        data = np.loadtxt(fh, ndmin=2)
    if data.shape[1] != 4:
        raise ValueError("table must have exactly four columns")
    return TableProfile(*data.T)


@dataclass(frozen=True)
class Tolerances:
    """Thresholds used by :func:`check_hypotheses`."""

    tol_h3: float = 1e-6
    m_tail: float = 1e-3
    l2_convergence: float = 1e-3
    ratio_bound: float = 1e8


@dataclass(frozen=True)
class HypothesisReport:
    h1_pass: bool
    h2_pass: bool
    h3_pass: bool
    lambda0: float
    margins: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def all_pass(self):
        return self.h1_pass and self.h2_pass and self.h3_pass


def schrodinger_lambda0(p, grid):
    """Bottom of the spectrum of ``-d^2/dy^2 - m^2`` with Dirichlet ends."""
    y = grid.nodes
    m = p.m(y)
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("m is not finite on the grid")
    h = grid.h
    diag = 2.0 / h**2 - m**2
    off = np.full(grid.N - 1, -1.0 / h**2)
    try:
        w = linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"schrodinger_lambda0: eigensolver failed ({exc})") from exc
    return float(w[0])


def check_hypotheses(p, grid, tolerances=None):
    """Evaluate the monotonicity, decay and stability conditions on ``grid``.

    Violations are reported in the returned :class:`HypothesisReport`; only
    non-finite evaluations raise.
    """
    tol = tolerances or Tolerances()
    y = grid.nodes
    vals = {name: getattr(p, name)(y) for name in ("U", "dU", "d2U", "m", "dm", "d2m")}
    for name, v in vals.items():
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"profile evaluator {name} produced NaN/Inf on the grid")

    margins, diag = {}, {}

    # H1: U' > 0 and U''/U < 0 (equivalently m^2 > 0 away from the zero of U)
    margins["min_dU"] = float(vals["dU"].min())
    h1 = margins["min_dU"] > 0.0
    diag["U_limits"] = (p.U_minus, p.U_plus)

    # H2: decay and integrability of m, derivative bounds, curvature ratios
    m = vals["m"]
    tail = float(max(m[0], m[-1]))
    margins["m_tail"] = tol.m_tail - tail
    h = grid.h
    norm_m = math.sqrt(h * np.sum(m**2))
    y_wide = -2 * grid.Y + h * np.arange(1, int(round(4 * grid.Y / h)))
    norm_wide = math.sqrt(h * np.sum(p.m(y_wide) ** 2))
    l2_change = abs(norm_wide - norm_m) / max(norm_wide, np.finfo(float).tiny)
    margins["m_l2_change"] = tol.l2_convergence - l2_change
    diag["m_l2_norm"] = norm_m
    pos = m > 0
    c1 = float(np.max(np.abs(vals["dm"][pos] / m[pos]))) if pos.any() else 0.0
    c2 = float(np.max(np.abs(vals["d2m"][pos] / m[pos]))) if pos.any() else 0.0
    diag["C1"], diag["C2"] = c1, c2
    ratios = [p.curvature_ratio(y, side) for side in ("plus", "minus")]
    rmax = float(max(np.max(np.abs(r)) for r in ratios))
    rl2 = float(max(math.sqrt(h * np.sum(r**2)) for r in ratios))
    diag["curvature_ratio_max"], diag["curvature_ratio_l2"] = rmax, rl2
    finite_ratios = all(np.isfinite(x) and x < tol.ratio_bound for x in (c1, c2, rmax, rl2))
    margins["derivative_ratio"] = tol.ratio_bound - max(c1, c2, rmax)
    h2 = bool(margins["m_tail"] > 0 and margins["m_l2_change"] > 0 and finite_ratios)

    lam0 = schrodinger_lambda0(p, grid)
    margins["lambda0"] = lam0 + 1.0 - tol.tol_h3
    h3 = lam0 > -1.0 + tol.tol_h3
    return HypothesisReport(bool(h1), h2, bool(h3), lam0, margins, diag)
