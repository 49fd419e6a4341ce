"""Uniform truncated-line grid and dense finite-difference operators.

All operators use homogeneous Dirichlet conditions at ``y = +-Y`` and
second-order central stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "Grid",
    "DenseOperator",
    "GridMismatchError",
    "build_grid",
    "second_derivative_op",
    "first_derivative_op",
    "conjugate_operator",
    "laplacian_alpha",
    "solve_laplacian",
    "sandwiched_inverse",
]

SYMMETRY_RTOL = 1e-12


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Interior nodes ``y_j = -Y + j h``, ``j = 1..N`` with ``h = 2Y/(N+1)``."""

    Y: float
    N: int

    @property
    def h(self):
        return 2.0 * self.Y / (self.N + 1)

    @property
    def nodes(self):
        return -self.Y + self.h * np.arange(1, self.N + 1)

    @property
    def tag(self):
        return (float(self.Y), int(self.N))

    def norm(self, v):
        """Grid-weighted L2 norm ``sqrt(h) * ||v||``."""
        return math.sqrt(self.h) * float(np.linalg.norm(v))

    def inner(self, u, v):
        """``h * sum(conj(u) v)``."""
        return self.h * np.vdot(u, v)

    def refined(self):
        """Grid with half the spacing whose odd nodes coincide with these nodes."""
        return Grid(self.Y, 2 * self.N + 1)


def build_grid(Y, N):
    if not (isinstance(Y, (int, float, np.floating, np.integer)) and math.isfinite(Y)):
        raise ValueError(f"half-width Y must be finite, got {Y!r}")
    if Y <= 0:
        raise ValueError(f"half-width Y must be positive, got {Y!r}")
    if int(N) != N or N < 8:
        raise ValueError(f"need an integer N >= 8 interior nodes, got {N!r}")
    return Grid(float(Y), int(N))


_KINDS = ("symmetric", "antisymmetric", "hermitian", "general")


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """A dense matrix tied to a grid, with a verified symmetry flag."""

    matrix: np.ndarray
    kind: str
    grid: Grid

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        M = self.matrix
        if M.ndim != 2 or M.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"matrix shape {M.shape} does not match grid N={self.grid.N}")
        if self.kind != "general":
            defect = self.symmetry_defect()
            scale = max(float(np.max(np.abs(M))), 1.0) if M.size else 1.0
            if defect > SYMMETRY_RTOL * scale:
                raise ValueError(f"{self.kind} flag violated: defect {defect:.3e}")

    def symmetry_defect(self):
        M = self.matrix
        if self.kind == "symmetric":
            return float(np.max(np.abs(M - M.T)))
        if self.kind == "antisymmetric":
            return float(np.max(np.abs(M + M.T)))
        if self.kind == "hermitian":
            return float(np.max(np.abs(M - M.conj().T)))
        return 0.0

    @property
    def shape(self):
        return self.matrix.shape

    def _check(self, other):
        if other.grid.tag != self.grid.tag:
            raise GridMismatchError(f"grid {other.grid.tag} does not match {self.grid.tag}")

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            self._check(other)
            return DenseOperator(self.matrix @ other.matrix, "general", self.grid)
        return self.matrix @ other

    def __add__(self, other):
        self._check(other)
        kind = self.kind if self.kind == other.kind else "general"
        return DenseOperator(self.matrix + other.matrix, kind, self.grid)

    def __sub__(self, other):
        self._check(other)
        kind = self.kind if self.kind == other.kind else "general"
        return DenseOperator(self.matrix - other.matrix, kind, self.grid)

    def __mul__(self, scalar):
        kind = self.kind
        if np.iscomplexobj(scalar) and kind in ("symmetric", "antisymmetric", "hermitian"):
            kind = "general"
        return DenseOperator(self.matrix * scalar, kind, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return DenseOperator(-self.matrix, self.kind, self.grid)

    def norm(self):
        """Spectral norm."""
        if self.kind in ("symmetric", "hermitian"):
            w = linalg.eigvalsh(self.matrix)
            return float(max(abs(w[0]), abs(w[-1])))
        return float(linalg.norm(self.matrix, 2))


def symmetrized(M, grid, kind="symmetric"):
    """Wrap ``(M + M^T)/2`` (or its hermitian analogue); returns operator and defect."""
    if kind == "hermitian":
        defect = float(np.max(np.abs(M - M.conj().T)))
        S = 0.5 * (M + M.conj().T)
    else:
        defect = float(np.max(np.abs(M - M.T)))
        S = 0.5 * (M + M.T)
    return DenseOperator(S, kind, grid), defect


def _tridiag(N, lower, diag, upper):
    M = np.zeros((N, N))
    idx = np.arange(N)
    M[idx, idx] = diag
    M[idx[:-1], idx[1:]] = upper
    M[idx[1:], idx[:-1]] = lower
    return M


def second_derivative_op(grid):
    h2 = grid.h**2
    M = _tridiag(grid.N, 1.0 / h2, -2.0 / h2, 1.0 / h2)
    return DenseOperator(M, "symmetric", grid)


def first_derivative_op(grid):
    """Central-difference ``d/dy`` (real antisymmetric)."""
    c = 1.0 / (2.0 * grid.h)
    M = _tridiag(grid.N, -c, 0.0, c)
    return DenseOperator(M, "antisymmetric", grid)


def conjugate_operator(grid):
    """``A = i d/dy`` built from the central difference; hermitian."""
    D = first_derivative_op(grid)
    return DenseOperator(1j * D.matrix, "hermitian", grid)


def laplacian_alpha(grid, alpha):
    """``d^2/dy^2 - alpha^2``; ``alpha = 0`` is the degenerate no-mixing mode."""
    if alpha == 0:
        raise ValueError("alpha = 0 is the no-mixing mode (d_t omega = 0); nothing to compute")
    D2 = second_derivative_op(grid)
    M = D2.matrix - float(alpha) ** 2 * np.eye(grid.N)
    return DenseOperator(M, "symmetric", grid)


def _neg_laplacian_banded(grid, alpha):
    h2 = grid.h**2
    ab = np.empty((2, grid.N))
    ab[0, :] = -1.0 / h2
    ab[1, :] = 2.0 / h2 + float(alpha) ** 2
    return ab


def solve_laplacian(grid, alpha, rhs):
    """Solve ``Delta_alpha x = rhs`` with a banded Cholesky factorization."""
    if alpha == 0:
        raise ValueError("alpha = 0 is the no-mixing mode (d_t omega = 0); nothing to compute")
    ab = _neg_laplacian_banded(grid, alpha)
    rhs = np.asarray(rhs)
    if np.iscomplexobj(rhs):
        re = linalg.solveh_banded(ab, rhs.real, lower=False)
        im = linalg.solveh_banded(ab, rhs.imag, lower=False)
        return -(re + 1j * im)
    return -linalg.solveh_banded(ab, rhs, lower=False)


def sandwiched_inverse(grid, alpha, m_values, method="solve"):
    """Matrix of ``m Delta_alpha^{-1} m``.

    ``method="solve"`` uses direct solves against the discrete ``Delta_alpha``
    and is authoritative.  ``method="kernel"`` assembles the free-line Green's
    function ``-(1/(2|alpha|)) exp(-|alpha||y_i - y_j|) m_i m_j h`` and exists
    only as a cross-check.
    """
    m = np.asarray(m_values, dtype=float)
    if m.shape != (grid.N,):
        raise ValueError("m_values must have one entry per node")
    if alpha == 0:
        raise ValueError("alpha = 0 is the no-mixing mode (d_t omega = 0); nothing to compute")
    if method == "solve":
        try:
            X = solve_laplacian(grid, alpha, np.diag(m))
        except linalg.LinAlgError as exc:
            raise RuntimeError(f"sandwiched_inverse: factorization failed ({exc})") from exc
        M = m[:, None] * X
    elif method == "kernel":
        y = grid.nodes
        a = abs(float(alpha))
        M = -(grid.h / (2.0 * a)) * np.exp(-a * np.abs(y[:, None] - y[None, :])) * np.outer(m, m)
    else:
        raise ValueError(f"unknown method {method!r}")
    op, _ = symmetrized(M, grid)
    return op
