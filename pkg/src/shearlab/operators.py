"""Symmetrized shear-flow operators and commutator diagnostics.

The vorticity generator ``U - U'' Delta_alpha^{-1}`` is conjugated into the
symmetric operator ``H = S U S`` with ``S = Sigma^{1/2}`` and
``Sigma = I + m Delta_alpha^{-1} m``.  Viscosity adds ``nu (Delta_alpha + R)``
in the same representation, with ``R`` the remainder produced by conjugating
the Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .discretization import (
    DenseOperator,
    GridMismatchError,
    conjugate_operator,
    first_derivative_op,
    laplacian_alpha,
    sandwiched_inverse,
    second_derivative_op,
    symmetrized,
)
from .profiles import Tolerances

__all__ = [
    "CoercivityError",
    "RemainderError",
    "OperatorSet",
    "MourreReport",
    "MourreCover",
    "assemble_sigma",
    "coercivity_check",
    "operator_sqrt",
    "assemble_H",
    "assemble_R",
    "remainder_terms",
    "remainder_direct",
    "remainder_split",
    "build_operator_set",
    "commutator_iHA",
    "compact_part",
    "singular_value_decay",
    "inverse_velocity_slope",
    "mourre_check",
    "mourre_cover",
]

EIGENVALUE_FLOOR = 1e-10
EDGE_MARGIN_FRACTION = 0.05


class CoercivityError(RuntimeError):
    """``Sigma`` has an eigenvalue below the floor; carries ``c0``."""

    def __init__(self, c0, floor):
        super().__init__(f"Sigma is not coercive: c0 = {c0:.6e} <= floor {floor:.1e}")
        self.c0 = c0
        self.floor = floor


class RemainderError(ValueError):
    pass


def _eigh(M, what):
    try:
        return linalg.eigh(M)
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"{what}: symmetric eigensolver failed ({exc})") from exc


def assemble_sigma(grid, profile, alpha):
    """``I + m Delta_alpha^{-1} m`` on ``grid``."""
    m = profile.m(grid.nodes)
    sand = sandwiched_inverse(grid, alpha, m)
    M = np.eye(grid.N) + sand.matrix
    return DenseOperator(M, "symmetric", grid)


def coercivity_check(sigma):
    """Smallest eigenvalue of a symmetric operator (reported, never asserted)."""
    if sigma.kind != "symmetric":
        raise ValueError("coercivity_check needs a symmetric operator")
    try:
        w = linalg.eigvalsh(sigma.matrix, subset_by_index=[0, 0])
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"coercivity_check: eigensolver failed ({exc})") from exc
    return float(w[0])


def operator_sqrt(sigma, floor=EIGENVALUE_FLOOR):
    """Symmetric square root and its inverse from one eigendecomposition.

    Returns
    -------
    s, s_inv : DenseOperator
    c0 : float
        Smallest eigenvalue of ``sigma``.

    Raises
    ------
    CoercivityError
        If the smallest eigenvalue is at or below ``floor``.
    """
    lam, V = _eigh(sigma.matrix, "operator_sqrt")
    c0 = float(lam[0])
    if c0 <= floor:
        raise CoercivityError(c0, floor)
    r = np.sqrt(lam)
    s, _ = symmetrized((V * r) @ V.T, sigma.grid)
    s_inv, _ = symmetrized((V / r) @ V.T, sigma.grid)
    return s, s_inv, c0


def assemble_H(s, profile, grid):
    """``S diag(U) S``, symmetrized; returns the operator and the defect."""
    if s.grid.tag != grid.tag:
        raise GridMismatchError("S and grid disagree")
    u = profile.U(grid.nodes)
    M = s.matrix @ (u[:, None] * s.matrix)
    return symmetrized(M, grid)


def _discrete_log_derivatives(profile, grid, ratio_bound):
    """Grid versions of ``m'/m`` and ``m''/m`` built from neighbor ratios.

    With ``r_pm = m(y_{j+-1}) / m(y_j)`` these are ``(r_+ - r_-)/(2h)`` and
    ``(r_+ - 2 + r_-)/h^2``; they make the four-term remainder identical to
    ``S m^{-1} D2 m S^{-1} - D2`` on the grid.
    """
    y, h = grid.nodes, grid.h
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        rp = np.asarray(profile.m_ratio(y, h), dtype=float)
        rm = np.asarray(profile.m_ratio(y, -h), dtype=float)
    if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
        raise RemainderError("m'/m is unbounded on the grid (m vanishes at a node)")
    # at the ends the ghost neighbour multiplies a Dirichlet zero, so any
    # finite ratio there gives the same operator
    lp = (rp - rm) / (2.0 * h)
    lpp = (rp - 2.0 + rm) / h**2
    worst = max(float(np.max(np.abs(lp))), float(np.max(np.abs(lpp))))
    if worst > ratio_bound:
        raise RemainderError(f"m'/m or m''/m exceeds {ratio_bound:.1e} on the grid")
    return lp, lpp, rp, rm


def _conjugated_laplacian_stencil(profile, grid, ratio_bound):
    """Tridiagonal ``m^{-1} D2 m`` as (lower, diag, upper) bands."""
    _, _, rp, rm = _discrete_log_derivatives(profile, grid, ratio_bound)
    h2 = grid.h**2
    upper = rp[:-1] / h2
    lower = rm[1:] / h2
    diag = np.full(grid.N, -2.0 / h2)
    return lower, diag, upper


def _tridiag_matrix(lower, diag, upper):
    return np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)


def _right_tridiag(A, lower, diag, upper):
    """``A @ T`` for tridiagonal ``T`` in O(N^2)."""
    out = A * diag[None, :]
    out[:, 1:] += A[:, :-1] * upper[None, :]
    out[:, :-1] += A[:, 1:] * lower[None, :]
    return out


def assemble_R(grid, profile, alpha, s, s_inv, ratio_bound=None):
    """Viscous remainder ``R`` in the symmetrized representation.

    The four terms ``S (m''/m) S^{-1} + 2 S (m'/m) d_y S^{-1}
    + (S - 1) d_y^2 S^{-1} + d_y^2 S^{-1} (1 - S)`` are regrouped as
    ``S T S^{-1} - D2`` with ``T = m^{-1} D2 m`` tridiagonal; this needs a
    single dense product.  :func:`remainder_terms` returns the terms one by
    one.  ``alpha`` does not enter ``R`` (the ``-alpha^2`` shift commutes with
    ``m``) and is accepted for signature symmetry.
    """
    if alpha == 0:
        raise ValueError("alpha = 0 is the no-mixing mode (d_t omega = 0); nothing to compute")
    bound = Tolerances().ratio_bound if ratio_bound is None else ratio_bound
    lower, diag, upper = _conjugated_laplacian_stencil(profile, grid, bound)
    ST = _right_tridiag(s.matrix, lower, diag, upper)
    M = ST @ s_inv.matrix
    h2 = grid.h**2
    idx = np.arange(grid.N)
    M[idx, idx] += 2.0 / h2
    M[idx[:-1], idx[1:]] -= 1.0 / h2
    M[idx[1:], idx[:-1]] -= 1.0 / h2
    return DenseOperator(M, "general", grid)


def remainder_terms(grid, profile, s, s_inv, ratio_bound=None):
    """The four remainder terms as separate dense matrices (small grids)."""
    bound = Tolerances().ratio_bound if ratio_bound is None else ratio_bound
    lp, lpp, _, _ = _discrete_log_derivatives(profile, grid, bound)
    N = grid.N
    S, Si = s.matrix, s_inv.matrix
    D = first_derivative_op(grid).matrix
    D2 = second_derivative_op(grid).matrix
    half = np.full(N - 1, 0.5)
    E = _tridiag_matrix(half, np.zeros(N), half)
    I = np.eye(N)
    return [
        S @ (lpp[:, None] * E) @ Si,
        2.0 * S @ (lp[:, None] * D) @ Si,
        (S - I) @ D2 @ Si,
        D2 @ Si @ (I - S),
    ]


def remainder_direct(grid, profile, alpha, s, s_inv):
    """Oracle ``S m^{-1} Delta_alpha m S^{-1} - Delta_alpha`` by explicit division."""
    m = profile.m(grid.nodes)
    lap = laplacian_alpha(grid, alpha).matrix
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = (1.0 / m)[:, None] * lap * m[None, :]
    if not np.all(np.isfinite(inner)):
        raise RemainderError("m vanishes on the grid; direct remainder undefined")
    return s.matrix @ inner @ s_inv.matrix - lap


def remainder_split(opset):
    """``R = R0 + D R1`` with ``R1 = 2 S (m'/m) S^{-1} + (S-1) D S^{-1} + D S^{-1}(1-S)``.

    Returns ``(R0, R1, norm_R0, norm_R1)``.
    """
    grid = opset.grid
    lp, _, _, _ = _discrete_log_derivatives(opset.profile, grid, Tolerances().ratio_bound)
    S, Si = opset.s.matrix, opset.s_inv.matrix
    D = opset.d.matrix
    I = np.eye(grid.N)
    R1 = 2.0 * S @ (lp[:, None] * Si) + (S - I) @ D @ Si + D @ Si @ (I - S)
    R0 = opset.r.matrix - D @ R1
    return (
        DenseOperator(R0, "general", grid),
        DenseOperator(R1, "general", grid),
        float(linalg.norm(R0, 2)),
        float(linalg.norm(R1, 2)),
    )


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Everything needed to evolve one Fourier mode ``alpha`` on one grid."""

    sigma: DenseOperator
    s: DenseOperator
    s_inv: DenseOperator
    h: DenseOperator
    r: DenseOperator
    a: DenseOperator
    c0: float
    alpha: int
    profile: object
    grid: object
    d: DenseOperator
    lap: DenseOperator
    m_values: np.ndarray
    u_values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def profile_tag(self):
        return self.profile.describe()

    @property
    def grid_tag(self):
        return self.grid.tag


def build_operator_set(profile, grid, alpha, floor=EIGENVALUE_FLOOR, with_remainder=True):
    """Assemble ``Sigma, S, S^{-1}, H, R`` and the derivative operators.

    ``with_remainder=False`` skips ``R`` (set to zero) for inviscid-only work.
    """
    if alpha == 0:
        raise ValueError("alpha = 0 is the no-mixing mode (d_t omega = 0); nothing to compute")
    sigma = assemble_sigma(grid, profile, alpha)
    s, s_inv, c0 = operator_sqrt(sigma, floor)
    h, h_defect = assemble_H(s, profile, grid)
    if with_remainder:
        r = assemble_R(grid, profile, alpha, s, s_inv)
    else:
        r = DenseOperator(np.zeros((grid.N, grid.N)), "general", grid)
    return OperatorSet(
        sigma=sigma,
        s=s,
        s_inv=s_inv,
        h=h,
        r=r,
        a=conjugate_operator(grid),
        c0=c0,
        alpha=int(alpha),
        profile=profile,
        grid=grid,
        d=first_derivative_op(grid),
        lap=laplacian_alpha(grid, alpha),
        m_values=profile.m(grid.nodes),
        u_values=profile.U(grid.nodes),
        diagnostics={"h_symmetry_defect": h_defect},
    )


def commutator_iHA(h, a):
    """``i(HA - AH)`` as a real symmetric operator.

    With ``A = iD`` this equals ``DH - HD``; it is formed in real arithmetic.
    """
    if h.grid.tag != a.grid.tag:
        raise GridMismatchError("H and A live on different grids")
    D = np.ascontiguousarray(np.real(-1j * a.matrix))
    H = h.matrix
    C = D @ H - H @ D
    op, _ = symmetrized(C, h.grid)
    return op


def compact_part(opset, commutator=None):
    """``K = i[H, A] - i[U, A]``, the part of the commutator beyond the free flow.

    On the grid ``i[U, A] = D U - U D`` is the discrete stand-in for ``U'``;
    subtracting it (rather than ``diag(U')``) removes the stencil error that
    would otherwise masquerade as non-compact mass at high frequency.
    """
    C = commutator if commutator is not None else commutator_iHA(opset.h, opset.a)
    D = opset.d.matrix
    u = opset.u_values
    free = D * u[None, :] - u[:, None] * D
    K = C.matrix - free
    op, _ = symmetrized(K, opset.grid)
    return op


def singular_value_decay(op, index=20):
    """Ratio ``s_index / s_1`` of the singular values (1-based index)."""
    sv = linalg.svdvals(op.matrix)
    if sv[0] == 0:
        return 0.0
    return float(sv[index - 1] / sv[0])


def inverse_velocity_slope(profile, grid, window, samples=257):
    """``F(u) = U'(U^{-1}(u))`` sampled on ``window`` by monotone inverse interpolation."""
    y = grid.nodes
    u = profile.U(y)
    us = np.linspace(window[0], window[1], samples)
    if us[0] < u[0] or us[-1] > u[-1]:
        raise ValueError("window leaves the range of U on the grid")
    # only the nodes bracketing the window matter; far out U may round to U_+-
    lo = max(int(np.searchsorted(u, us[0], side="right")) - 1, 0)
    hi = min(int(np.searchsorted(u, us[-1], side="left")) + 1, u.size)
    if np.any(np.diff(u[lo:hi]) <= 0):
        raise ValueError("U is not strictly increasing over the window")
    ys = np.interp(us, u[lo:hi], y[lo:hi])
    return us, profile.dU(ys)


@dataclass(frozen=True)
class MourreReport:
    window: tuple
    theta_I: float
    projected_min: float
    passed: bool
    width: float
    rank: int
    compression_trace: float = float("nan")
    note: str = ""

    @property
    def pass_(self):
        return self.passed


@dataclass(frozen=True)
class MourreCover:
    reports: tuple
    widths_tried: tuple
    width_at_pass: float
    covered: bool


def _edge_margin(profile):
    return EDGE_MARGIN_FRACTION * (profile.U_plus - profile.U_minus)


def _check_window(profile, window):
    a, b = float(window[0]), float(window[1])
    if not a < b:
        raise ValueError(f"window must satisfy a < b, got {window!r}")
    delta = _edge_margin(profile)
    lo, hi = profile.U_minus + delta, profile.U_plus - delta
    if a <= lo or b >= hi:
        raise ValueError(
            f"window [{a}, {b}] leaves ({lo:.4g}, {hi:.4g}); the spectrum edges are out of reach"
        )
    return a, b


def mourre_check(opset, window, eig=None, commutator=None, cutoff=1e-8):
    """Localized commutator positivity on a spectral window.

    The window ``[a, b]`` is the support of the bump ``g``: its plateau is
    ``[a + 2 d, b - 2 d]`` with ``d = (b - a)/14``, following the
    bump construction of :func:`shearlab.spectral.bump_function`.  The
    retained subspace is spanned by eigenvectors of ``H`` with ``g > cutoff``;
    on it the minimum Rayleigh quotient of ``G i[H,A] G`` against ``G^2`` is
    the smallest eigenvalue of the compression of ``i[H,A]``.

    Parameters
    ----------
    opset : OperatorSet
    window : tuple of float
    eig : EigenDecomposition, optional
        Decomposition of ``opset.h``; computed when omitted.
    commutator : DenseOperator, optional
        Precomputed :func:`commutator_iHA`.
    cutoff : float
        Threshold on ``g`` for the retained span.

    Returns
    -------
    MourreReport
        ``passed`` is ``projected_min >= theta_I / 2``.  An empty retained
        subspace is reported with ``rank = 0`` and ``passed = False``.
    """
    from .spectral import bump_function, eigendecompose

    a, b = _check_window(opset.profile, window)
    e = eig if eig is not None else eigendecompose(opset.h)
    C = commutator if commutator is not None else commutator_iHA(opset.h, opset.a)
    dg = (b - a) / 14.0
    bump = bump_function((a + 2 * dg, b - 2 * dg), dg, profile=opset.profile)
    g = bump(e.eigenvalues)
    sel = g > cutoff
    _, F = inverse_velocity_slope(opset.profile, opset.grid, (a, b))
    theta = float(F.min())
    rank = int(sel.sum())
    if rank == 0:
        return MourreReport((a, b), theta, float("nan"), False, b - a, 0, float("nan"),
                            "retained subspace is empty")
    Vr = e.eigenvectors[:, sel]
    Cr = Vr.T @ (C.matrix @ Vr)
    Cr = 0.5 * (Cr + Cr.T)
    w = linalg.eigvalsh(Cr)
    pmin = float(w[0])
    trace = float(np.trace(Cr))
    return MourreReport((a, b), theta, pmin, bool(pmin >= theta / 2), b - a, rank, trace)


def mourre_cover(opset, interval, start_width=0.2, min_width=0.0125, eig=None, commutator=None):
    """Bisection on window width until a tiling of ``interval`` passes everywhere.

    Returns the reports of the last width tried.  ``width_at_pass`` is NaN
    when no width down to ``min_width`` produced a passing cover.
    """
    from .spectral import eigendecompose

    lo, hi = float(interval[0]), float(interval[1])
    e = eig if eig is not None else eigendecompose(opset.h)
    C = commutator if commutator is not None else commutator_iHA(opset.h, opset.a)
    width = float(start_width)
    tried, reports = [], ()
    while width >= min_width * (1 - 1e-12):
        n = max(1, int(math.ceil((hi - lo) / width - 1e-9)))
        edges = np.linspace(lo, hi, n + 1)
        reports = tuple(
            mourre_check(opset, (edges[i], edges[i + 1]), eig=e, commutator=C) for i in range(n)
        )
        tried.append(float((hi - lo) / n))
        if all(r.passed for r in reports):
            return MourreCover(reports, tuple(tried), tried[-1], True)
        width /= 2.0
    return MourreCover(reports, tuple(tried), float("nan"), False)
