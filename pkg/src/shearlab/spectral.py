"""Eigendecompositions, smooth spectral cutoffs and frequency-weighted norms."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .discretization import symmetrized

__all__ = [
    "EigenDecomposition",
    "SpectralWindow",
    "SpectrumReport",
    "eigendecompose",
    "spectrum_report",
    "bump_function",
    "smooth_step",
    "apply_funcalc",
    "apply_funcalc_vector",
    "bracket_decomposition",
    "weighted_norm",
]


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: str = ""
    grid: object = None

    def residuals(self, matrix):
        """``(reconstruction error / ||M||, orthogonality defect)``."""
        V, w = self.eigenvectors, self.eigenvalues
        rec = (V * w) @ V.T - matrix
        scale = max(abs(w[0]), abs(w[-1]), np.finfo(float).tiny)
        orth = V.T @ V - np.eye(V.shape[1])
        return float(linalg.norm(rec, 2) / scale), float(np.max(np.abs(orth)))

    def mean_gap(self, interval):
        """Mean spacing of the eigenvalues inside ``interval``."""
        w = self.eigenvalues
        inside = w[(w > interval[0]) & (w < interval[1])]
        if inside.size < 2:
            return float("nan")
        return float(np.mean(np.diff(inside)))


def eigendecompose(op, source=None):
    """Symmetric eigendecomposition (``scipy.linalg.eigh``).

    Raises
    ------
    ValueError
        For operators not flagged symmetric.
    RuntimeError
        On eigensolver failure, with a condition diagnostic.
    """
    if op.kind != "symmetric":
        raise ValueError(f"eigendecompose needs a symmetric operator, got {op.kind!r}")
    try:
        w, V = linalg.eigh(op.matrix)
    except linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(op.matrix)))
        raise RuntimeError(
            f"eigendecompose: eigensolver did not converge ({exc}); finite entries: {finite}, "
            f"max |M| = {np.nanmax(np.abs(op.matrix)):.3e}"
        ) from exc
    return EigenDecomposition(w, V, source or "", op.grid)


@dataclass(frozen=True)
class SpectrumReport:
    n_outside: int
    max_excursion: float
    n_isolated: int
    isolated_candidates: tuple
    persistent_outside: int = None
    persistent_isolated: int = None
    refined_checked: bool = False
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        outside = self.persistent_outside if self.refined_checked else self.n_outside
        isolated = self.persistent_isolated if self.refined_checked else self.n_isolated
        return outside == 0 and isolated == 0


def _isolated_candidates(w, neighbours=20, factor=10.0, abs_floor=1e-10):
    """Indices whose gaps to both neighbours exceed ``factor`` times the local mean spacing."""
    n = w.size
    gaps = np.diff(w)
    found = []
    for i in range(1, n - 1):
        lo, hi = max(0, i - neighbours), min(n - 1, i + neighbours)
        local = (w[hi] - w[lo]) / (hi - lo)
        g_left, g_right = gaps[i - 1], gaps[i]
        if min(g_left, g_right) <= abs_floor:
            continue
        if g_left > factor * local and g_right > factor * local:
            found.append(i)
    return found


def spectrum_report(e, u_minus, u_plus, eps=1e-6, refined=None):
    """Outside-count, excursion and isolated-eigenvalue candidates.

    When a decomposition on the refined grid is supplied, outside eigenvalues
    and candidates only count if they persist: a refined eigenvalue lies
    within 10% of the relevant gap (the excursion for outside eigenvalues,
    the smaller neighbour gap for isolated ones).
    """
    w = e.eigenvalues
    lo, hi = u_minus - eps, u_plus + eps
    outside = (w < lo) | (w > hi)
    exc = np.maximum(u_minus - w, w - u_plus)
    max_exc = float(max(exc.max(), 0.0))
    cand = _isolated_candidates(w)
    cand_vals = tuple(float(w[i]) for i in cand)
    details = {"lambda_min": float(w[0]), "lambda_max": float(w[-1])}
    if refined is None:
        return SpectrumReport(int(outside.sum()), max_exc, len(cand), cand_vals, details=details)

    wr = refined.eigenvalues
    out_r = wr[(wr < lo) | (wr > hi)]
    persistent_out = 0
    for lam, x in zip(w[outside], exc[outside]):
        if out_r.size and np.min(np.abs(out_r - lam)) < 0.1 * max(x, eps):
            persistent_out += 1
    persistent_iso = 0
    gaps = np.diff(w)
    for i in cand:
        tol = 0.1 * min(gaps[i - 1], gaps[i])
        if np.min(np.abs(wr - w[i])) < tol:
            persistent_iso += 1
    details["refined_lambda_min"] = float(wr[0])
    details["refined_lambda_max"] = float(wr[-1])
    return SpectrumReport(
        int(outside.sum()), max_exc, len(cand), cand_vals,
        persistent_out, persistent_iso, True, details,
    )


def smooth_step(s):
    """``q(s) = e(s) / (e(s) + e(1 - s))`` with ``e(s) = exp(-1/s)`` for ``s > 0``."""
    s = np.asarray(s, dtype=float)

    def e(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a, b = e(s), e(1.0 - s)
    return a / (a + b)


@dataclass(frozen=True)
class SpectralWindow:
    """Smooth bump equal to one on ``core`` and supported in ``support``."""

    core: tuple
    delta_g: float

    @property
    def support(self):
        a, b = self.core
        return (a - 2 * self.delta_g, b + 2 * self.delta_g)

    def __call__(self, x):
        a, b = self.core
        d = self.delta_g
        x = np.asarray(x, dtype=float)
        return smooth_step((x - (a - 2 * d)) / (2 * d)) * smooth_step(((b + 2 * d) - x) / (2 * d))


def bump_function(i0, delta_g=None, profile=None, edge_fraction=0.05):
    """Build the window ``g`` for core interval ``i0``.

    ``delta_g`` defaults to ``0.1 |i0|``.  When ``profile`` is given the
    support must stay ``edge_fraction (U_+ - U_-)`` away from both limits.
    """
    a, b = float(i0[0]), float(i0[1])
    if not a < b:
        raise ValueError(f"core interval must satisfy a < b, got {i0!r}")
    d = 0.1 * (b - a) if delta_g is None else float(delta_g)
    if not d > 0:
        raise ValueError("transition width must be positive")
    win = SpectralWindow((a, b), d)
    if profile is not None:
        margin = edge_fraction * (profile.U_plus - profile.U_minus)
        lo, hi = win.support
        if lo <= profile.U_minus + margin or hi >= profile.U_plus - margin:
            raise ValueError(
                f"bump support [{lo:.4g}, {hi:.4g}] leaks into the edge margin of "
                f"({profile.U_minus}, {profile.U_plus})"
            )
    return win


def apply_funcalc(e, f):
    """``V f(Lambda) V^T`` as a symmetric operator."""
    fw = np.asarray(f(e.eigenvalues), dtype=float)
    if not np.all(np.isfinite(fw)):
        raise FloatingPointError("function is not finite on the spectrum")
    V = e.eigenvectors
    op, _ = symmetrized((V * fw) @ V.T, e.grid)
    return op


def apply_funcalc_vector(e, f, v):
    """``f(M) v`` without forming the matrix."""
    fw = np.asarray(f(e.eigenvalues))
    V = e.eigenvectors
    return V @ (fw * (V.T @ v))


_BRACKET_CACHE = weakref.WeakKeyDictionary()


def bracket_decomposition(a_op):
    """Eigen-pairs of ``I + A^2 = I - D^2`` for ``A = iD``, cached per operator."""
    hit = _BRACKET_CACHE.get(a_op)
    if hit is None:
        if a_op.kind != "hermitian":
            raise ValueError("the conjugate operator must be hermitian")
        A = a_op.matrix
        eye = np.eye(A.shape[0])
        if np.iscomplexobj(A) and np.max(np.abs(A.real)) == 0.0:
            # A = iD with D real antisymmetric, so I + A^2 = I + D^T D is real
            D = np.ascontiguousarray(A.imag)
            w, Q = linalg.eigh(eye + D.T @ D)
        else:
            w, Q = linalg.eigh(eye + A.conj().T @ A)
        hit = (w, Q)
        _BRACKET_CACHE[a_op] = hit
    return hit


def weighted_norm(v, k, a_op):
    """``sqrt(h) ||(I + A^2)^{-k/2} v||``.

    Negative ``k`` gives the positive-power norm ``||<A>^{|k|} v||`` used for
    data norms.
    """
    w, Q = bracket_decomposition(a_op)
    c = Q.conj().T @ v if np.iscomplexobj(Q) else Q.T @ v
    if k:
        c = c * w ** (-0.5 * k)
    return math.sqrt(a_op.grid.h) * float(np.linalg.norm(c))
