"""Inviscid and viscous time propagation in the symmetrized representation.

The state variable is ``psi``; vorticity is recovered as ``omega = m S^{-1} psi``.
Time is physical throughout: the inviscid phase is ``exp(-i alpha lambda t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.integrate import cumulative_trapezoid

from .discretization import DenseOperator, solve_laplacian
from .spectral import apply_funcalc_vector, bump_function

__all__ = [
    "EvolutionState",
    "Trajectory",
    "PropagatorConfig",
    "OmegaTransformError",
    "PropagationError",
    "recurrence_horizon",
    "inviscid_propagate",
    "inviscid_trajectory",
    "viscous_generator",
    "generator_norm_bound",
    "numerical_abscissa",
    "viscous_propagate",
    "trapezoid_step_matrix",
    "transform_state",
    "omega_generator",
    "energy_estimate_check",
    "EnergyLedger",
    "energy_ledger",
    "default_initial_data",
]

SCHEMES = ("spectral-exact", "trapezoidal", "dense-exponential-oracle")
M_FLOOR_REL = 1e-8


class OmegaTransformError(ValueError):
    """``omega -> psi`` requested where ``omega / m`` is not controlled."""


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EvolutionState:
    representation: str
    values: np.ndarray
    alpha: int
    nu: float = 0.0
    t: float = 0.0
    mask: np.ndarray = None

    def __post_init__(self):
        if self.representation not in ("psi", "omega"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if not np.all(np.isfinite(self.values)):
            raise PropagationError(f"non-finite state at t = {self.t}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples ``values[i]`` at ``times[i]``."""

    times: np.ndarray
    values: np.ndarray
    representation: str
    alpha: int
    nu: float
    scheme: str = ""

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return EvolutionState(self.representation, self.values[i], self.alpha, self.nu,
                              float(self.times[i]))


@dataclass(frozen=True)
class PropagatorConfig:
    scheme: str = "trapezoidal"
    dt: float = 1e-2
    t_samples: tuple = ()
    recurrence_horizon: float = float("inf")

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")


def recurrence_horizon(e, interval, alpha=1):
    """``pi / (|alpha| * mean eigenvalue gap inside interval)``.

    The phases ``exp(-i alpha lambda t)`` of neighbouring modes realign
    after this physical time.
    """
    gap = e.mean_gap(interval)
    if not gap > 0:
        raise ValueError("fewer than two eigenvalues inside the interval")
    return math.pi / (abs(alpha) * gap)


def inviscid_propagate(e_h, psi0, alpha, t):
    """Exact discrete evolution ``V exp(-i alpha Lambda t) V^T psi0``."""
    if t == 0:
        return EvolutionState("psi", np.array(psi0, dtype=complex), int(alpha), 0.0, 0.0)
    c = e_h.eigenvectors.T @ psi0
    v = e_h.eigenvectors @ (np.exp(-1j * alpha * e_h.eigenvalues * t) * c)
    return EvolutionState("psi", v, int(alpha), 0.0, float(t))


def inviscid_trajectory(e_h, psi0, alpha, times):
    V, w = e_h.eigenvectors, e_h.eigenvalues
    c = V.T @ psi0
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * alpha * np.outer(times, w))
    values = (phases * c[None, :]) @ V.T
    return Trajectory(times, values, "psi", int(alpha), 0.0, "spectral-exact")


def viscous_generator(opset, alpha, nu):
    """``-i alpha H + nu Delta_alpha + nu R``."""
    if alpha != opset.alpha:
        raise ValueError(f"operator set was built for alpha = {opset.alpha}, not {alpha}")
    if not (0 <= nu <= 1):
        raise ValueError(f"viscosity must lie in [0, 1], got {nu!r}")
    M = -1j * alpha * opset.h.matrix
    if nu:
        M = M + nu * (opset.lap.matrix + opset.r.matrix)
    return DenseOperator(M, "general", opset.grid)


def generator_norm_bound(M):
    """Cheap upper bound ``sqrt(||M||_1 ||M||_inf)`` on the spectral norm."""
    A = M.matrix if isinstance(M, DenseOperator) else M
    return math.sqrt(float(linalg.norm(A, 1)) * float(linalg.norm(A, np.inf)))


def numerical_abscissa(M):
    """Largest eigenvalue of the hermitian part of ``M``."""
    A = M.matrix if isinstance(M, DenseOperator) else M
    Hp = 0.5 * (A + A.conj().T)
    return float(linalg.eigvalsh(Hp, subset_by_index=[A.shape[0] - 1, A.shape[0] - 1])[0])


def _snap(times, dt):
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("sample times must be ascending")
    if times.size and times[0] < 0:
        raise ValueError("sample times must be non-negative")
    steps = np.rint(times / dt).astype(np.int64)
    return steps, steps * dt


def trapezoid_step_matrix(A, dt):
    """One-step map ``(I - dt/2 A)^{-1} (I + dt/2 A)``."""
    N = A.shape[0]
    eye = np.eye(N, dtype=complex)
    try:
        lu = linalg.lu_factor(eye - 0.5 * dt * A)
    except (linalg.LinAlgError, ValueError) as exc:
        raise PropagationError(f"viscous_propagate: factorization failed ({exc})") from exc
    return linalg.lu_solve(lu, eye + 0.5 * dt * A)


def viscous_propagate(M, psi0, t_samples, cfg, alpha=0, nu=float("nan")):
    """Propagate ``d/dt psi = M psi`` and return samples at ``t_samples``.

    ``trapezoidal``: the one-step map ``(I - dt/2 M)^{-1}(I + dt/2 M)`` is
    formed once, and its powers ``P^(2^j)`` are reused to jump between
    output times.  Sample times are snapped to integer multiples of ``dt``;
    the returned trajectory carries the snapped times.

    ``dense-exponential-oracle``: ``expm(M t) psi0`` per sample (small N only).
    """
    A = M.matrix if isinstance(M, DenseOperator) else np.asarray(M)
    psi0 = np.asarray(psi0, dtype=complex)
    if cfg.scheme == "dense-exponential-oracle":
        times = np.asarray(t_samples, dtype=float)
        out = np.empty((times.size, psi0.size), dtype=complex)
        for i, t in enumerate(times):
            out[i] = linalg.expm(A * t) @ psi0
        if not np.all(np.isfinite(out)):
            raise PropagationError("non-finite values from the exponential oracle")
        return Trajectory(times, out, "psi", int(alpha), float(nu), cfg.scheme)
    if cfg.scheme != "trapezoidal":
        raise ValueError("spectral-exact propagation applies to the inviscid problem only")

    steps, times = _snap(t_samples, cfg.dt)
    P = trapezoid_step_matrix(A, cfg.dt)
    if not np.all(np.isfinite(P)):
        raise PropagationError("non-finite one-step matrix")
    powers = [P]
    top = int(steps.max()) if steps.size else 0
    while (1 << len(powers)) <= top:
        powers.append(powers[-1] @ powers[-1])
    out = np.empty((steps.size, psi0.size), dtype=complex)
    v = psi0.copy()
    cur = 0
    for i, s in enumerate(steps):
        d, b = int(s - cur), 0
        while d:
            if d & 1:
                v = powers[b] @ v
            d >>= 1
            b += 1
        if not np.all(np.isfinite(v)):
            raise PropagationError(f"non-finite state at t = {s * cfg.dt:.6g}")
        cur = int(s)
        out[i] = v
    return Trajectory(times, out, "psi", int(alpha), float(nu), cfg.scheme)


def _m_floor(opset, rel):
    return rel * float(np.max(opset.m_values)) if np.max(opset.m_values) > 0 else 0.0


def transform_state(state, target, opset, m_floor_rel=M_FLOOR_REL):
    """Convert between ``psi`` and ``omega = m S^{-1} psi``.

    ``omega -> psi`` uses ``S (omega / m)`` on nodes with ``m > m_floor``;
    ``omega`` must vanish (relative to ``m_floor_rel``) on the other nodes,
    otherwise :class:`OmegaTransformError` is raised.
    """
    if target == state.representation:
        return state
    m = opset.m_values
    if target == "omega":
        v = m * (opset.s_inv.matrix @ state.values)
        return EvolutionState("omega", v, state.alpha, state.nu, state.t)
    if target != "psi":
        raise ValueError(f"unknown representation {target!r}")
    floor = _m_floor(opset, m_floor_rel)
    keep = m > floor
    if not keep.any():
        raise OmegaTransformError("m vanishes identically; omega -> psi is ill-posed")
    w = np.asarray(state.values)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    leak = float(np.max(np.abs(w[~keep]), initial=0.0))
    if leak > m_floor_rel * scale:
        raise OmegaTransformError(
            f"omega carries mass {leak:.3e} where m < m_floor = {floor:.3e}"
        )
    q = np.zeros_like(w, dtype=complex)
    q[keep] = w[keep] / m[keep]
    v = opset.s.matrix @ q
    return EvolutionState("psi", v, state.alpha, state.nu, state.t, mask=keep)


def omega_generator(grid, profile, alpha, nu):
    """``-i alpha (U - U'' Delta_alpha^{-1}) + nu Delta_alpha`` in vorticity form."""
    y = grid.nodes
    u, u2 = profile.U(y), profile.d2U(y)
    inv = solve_laplacian(grid, alpha, np.eye(grid.N))
    lap = -float(alpha) ** 2 * np.eye(grid.N)
    h2 = grid.h**2
    idx = np.arange(grid.N)
    lap[idx, idx] -= 2.0 / h2
    lap[idx[:-1], idx[1:]] += 1.0 / h2
    lap[idx[1:], idx[:-1]] += 1.0 / h2
    L0 = np.diag(u) - u2[:, None] * inv
    return DenseOperator(-1j * alpha * L0 + nu * lap, "general", grid)


def energy_estimate_check(trajectory, nu, grid=None):
    """Smallest ``M0 >= 0`` with ``||psi(t_i)|| <= exp(M0 nu t_i) ||psi(0)||``."""
    norms = np.linalg.norm(trajectory.values, axis=1)
    t = np.asarray(trajectory.times)
    if nu == 0:
        return 0.0
    n0 = norms[0]
    pos = t > 0
    if not pos.any() or n0 == 0:
        return 0.0
    rates = np.log(norms[pos] / n0) / (nu * t[pos])
    return float(max(0.0, rates.max()))


@dataclass(frozen=True)
class EnergyLedger:
    """Discrete energy balance ``||psi||^2 + nu int ||grad psi||^2`` against its envelope."""

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    M0: float
    C: float
    holds: bool
    identity_residual: float
    details: dict = field(default_factory=dict)


def _grad_energy(opset, values):
    # -<psi, Delta_alpha psi> in the grid inner product
    lap = opset.lap.matrix
    return -opset.grid.h * np.real(np.einsum("ij,ij->i", values.conj(), values @ lap.T))


def energy_ledger(trajectory, nu, opset, M0=None):
    """Check ``||psi(t)||^2 + nu int_0^t ||grad_alpha psi||^2 <= ||psi0||^2 (1 + C nu t e^{2 M0 nu t})``.

    ``C`` is the smallest constant making the bound hold on the samples; it is
    finite precisely when the left side grows at most linearly in ``nu t``.
    The exact discrete balance
    ``||psi||^2 + 2 nu int ||grad psi||^2 = ||psi0||^2 + 2 nu int Re<psi, R psi>``
    is evaluated as a quadrature check (``identity_residual``, relative to
    ``||psi0||^2``).
    """
    t = np.asarray(trajectory.times, dtype=float)
    if t[0] != 0:
        raise ValueError("the trajectory must start at t = 0")
    V = trajectory.values
    h = opset.grid.h
    mass = h * np.sum(np.abs(V) ** 2, axis=1)
    grad = _grad_energy(opset, V)
    r_term = h * np.real(np.einsum("ij,ij->i", V.conj(), V @ opset.r.matrix.T))
    int_grad = cumulative_trapezoid(grad, t, initial=0.0)
    int_r = cumulative_trapezoid(r_term, t, initial=0.0)
    m0 = energy_estimate_check(trajectory, nu) if M0 is None else float(M0)
    lhs = mass + nu * int_grad
    base = mass[0]
    growth = nu * t * np.exp(2 * m0 * nu * t)
    excess = lhs / base - 1.0
    pos = growth > 0
    C = float(max(0.0, np.max(excess[pos] / growth[pos]))) if pos.any() else 0.0
    rhs = base * (1.0 + C * growth)
    holds = bool(np.all(lhs <= rhs * (1 + 1e-12)) and math.isfinite(C))
    ident = mass + 2 * nu * int_grad - base - 2 * nu * int_r
    resid = float(np.max(np.abs(ident)) / base)
    return EnergyLedger(t, lhs, rhs, m0, C, holds, resid)


def default_initial_data(opset, eig, core=(-0.4, 0.4), delta_g=None, width=1.0):
    """``g(H)`` applied to a unit-width Gaussian centred at the zero of ``U``."""
    y = opset.grid.nodes
    u = opset.u_values
    y0 = float(np.interp(0.0, u, y)) if u[0] < 0 < u[-1] else 0.0
    bump = bump_function(core, delta_g, profile=opset.profile)
    raw = np.exp(-((y - y0) ** 2) / (2.0 * width**2))
    return apply_funcalc_vector(eig, bump, raw), bump
