import numpy as np
import pytest
from scipy import linalg

from shearlab.discretization import build_grid, second_derivative_op, solve_laplacian
from shearlab.evolution import EvolutionState, default_initial_data, inviscid_trajectory, recurrence_horizon
from shearlab.observables import (
    FitError,
    damping_fit,
    decay_time,
    enhanced_dissipation_scan,
    fit_power_law,
    inviscid_fit_window,
    log_time_grid,
    n_functional,
    propagation_observable,
    velocity_damping_fit,
    velocity_from_vorticity,
    viscous_damping_fit,
    viscous_fit_cap,
    weighted_norms,
)
from shearlab.operators import build_operator_set
from shearlab.profiles import SyntheticProfile
from shearlab.spectral import apply_funcalc_vector, bump_function, eigendecompose, weighted_norm


def grid_norm(v, grid):
    return np.sqrt(grid.h) * np.linalg.norm(v)


# -- fits -------------------------------------------------------------------

def test_power_law_recovered_exactly():
    t = np.geomspace(10, 100, 24)
    f = fit_power_law(t, 3.0 * t**-1.5, "q")
    assert f.exponent == pytest.approx(-1.5, abs=1e-12)
    assert f.prefactor == pytest.approx(3.0, rel=1e-12)
    assert f.residual <= 1e-12 and f.ok and f.n_samples == 24
    assert (f.t_min, f.t_max) == (10.0, 100.0)


def test_fit_statuses():
    t = np.geomspace(10, 100, 24)
    with pytest.raises(FitError):
        fit_power_law(t[:7], t[:7] ** -1.0)
    assert fit_power_law(t, np.ones_like(t)).status == "non-decaying"
    wiggly = t**-1.0 * (1 + 0.9 * np.sin(t))
    f = fit_power_law(t, wiggly)
    assert f.status == "inconclusive" and not f.ok


def test_fit_windows():
    assert inviscid_fit_window(1000.0) == (10.0, 300.0)
    assert inviscid_fit_window(100.0) == (10.0, 50.0)
    with pytest.raises(FitError):
        inviscid_fit_window(15.0)
    assert log_time_grid(10, 50).size == 24
    with pytest.raises(ValueError):
        log_time_grid(10, 50, n=10)


def test_decay_time():
    t = np.linspace(0, 20, 2001)
    q = 1.0 / (1.0 + t)
    assert decay_time(t, q, 10) == pytest.approx(9.0, abs=1e-3)
    assert np.isnan(decay_time(t, np.ones_like(t)))


# -- velocities ---------------------------------------------------------------

def test_zero_vorticity_gives_zero_velocity(small_grid):
    v1, v2 = velocity_from_vorticity(np.zeros(small_grid.N), small_grid, 1)
    assert not v1.any() and not v2.any()


def test_curl_identity(small_grid, small_set):
    # on the grid: i alpha v2 - D v1 = (D D - alpha^2) phi exactly, and equals
    # omega = (D2 - alpha^2) phi up to the O(h^2) gap between D D and D2
    y = small_grid.nodes
    omega = np.exp(-y**2) * (1 + 0.5j * y)
    alpha = 2
    v1, v2 = velocity_from_vorticity(omega, small_grid, alpha)
    phi = solve_laplacian(small_grid, alpha, omega)
    D = small_set.d.matrix
    lhs = 1j * alpha * v2 - D @ v1
    np.testing.assert_allclose(lhs, D @ D @ phi - alpha**2 * phi, atol=1e-10 * np.max(np.abs(omega)))
    errs = []
    for N in (200, 401):
        g = build_grid(small_grid.Y, N)
        om = np.exp(-g.nodes**2) * (1 + 0.5j * g.nodes)
        a1, a2 = velocity_from_vorticity(om, g, alpha)
        Dg = np.diag(np.full(N - 1, 0.5 / g.h), 1) - np.diag(np.full(N - 1, 0.5 / g.h), -1)
        errs.append(np.max(np.abs(1j * alpha * a2 - Dg @ a1 - om)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_velocity_bounds(medium_set, medium_grid):
    y = medium_grid.nodes
    omega = np.exp(-(y - 1) ** 2) * medium_set.m_values
    for alpha in (1, 3):
        _, v2 = velocity_from_vorticity(omega, medium_grid, alpha)
        inv = -np.linalg.inv(second_derivative_op(medium_grid).matrix - alpha**2 * np.eye(medium_grid.N))
        bound = abs(alpha) * linalg.norm(inv, 2) * grid_norm(omega, medium_grid)
        assert grid_norm(v2, medium_grid) <= bound * (1 + 1e-12)


def test_velocity_apriori_comparison(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    traj = inviscid_trajectory(medium_eig, psi0, 1, [0.0, 10.0, 25.0])
    for psi in traj.values:
        omega = medium_set.m_values * (medium_set.s_inv.matrix @ psi)
        v1, _ = velocity_from_vorticity(omega, medium_set.grid, 1, medium_set.d)
        assert grid_norm(v1, medium_set.grid) <= weighted_norm(omega, 1, medium_set.a) * (1 + 1e-2)


def test_velocity_handles_stacks_and_states(small_grid):
    y = small_grid.nodes
    w = np.exp(-y**2)
    one = velocity_from_vorticity(w, small_grid, 1)
    st = velocity_from_vorticity(EvolutionState("omega", w, 1), small_grid, 1)
    stack = velocity_from_vorticity(np.vstack([w, 2 * w]), small_grid, 1)
    np.testing.assert_allclose(st[0], one[0])
    np.testing.assert_allclose(stack[0][1], 2 * one[0])


# -- inviscid damping ---------------------------------------------------------

def test_preconditions(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    rec = recurrence_horizon(medium_eig, bump.core)
    with pytest.raises(ValueError, match="t >= 5"):
        damping_fit(medium_eig, bump, psi0, 1, 1, np.geomspace(1, 20, 24), medium_set.a)
    with pytest.raises(ValueError, match="recurrence"):
        damping_fit(medium_eig, bump, psi0, 1, 1, np.geomspace(10, rec, 24), medium_set.a)
    raw = np.exp(-medium_set.grid.nodes**2 / 2)
    with pytest.raises(ValueError, match="localized"):
        damping_fit(medium_eig, bump, raw, 1, 1, np.geomspace(10, 25, 24), medium_set.a)


def test_recurrence_horizon_scales_with_alpha(medium_eig):
    assert recurrence_horizon(medium_eig, (-0.4, 0.4), 2) == pytest.approx(
        0.5 * recurrence_horizon(medium_eig, (-0.4, 0.4), 1))


@pytest.fixture(scope="module")
def free_flow(tanh2):
    ops = build_operator_set(SyntheticProfile(tanh2, 0.0), build_grid(30.0, 2048), 1, with_remainder=False)
    e = eigendecompose(ops.h)
    bump = bump_function((-0.4, 0.4))
    data = bump(ops.u_values) * np.exp(-ops.grid.nodes**2 / 2)
    t_grid = log_time_grid(*inviscid_fit_window(recurrence_horizon(e, bump.core)))
    return ops, e, bump, data, t_grid


def test_free_flow_stationary_phase(free_flow, tanh2):
    ops, e, bump, data, t_grid = free_flow
    fit = damping_fit(e, bump, data, 1, 1, t_grid, ops.a)
    # continuum oracle: <d/dy>^{-1}-weighted norm of exp(-i U t) f by FFT on a fine periodic grid
    M, half = 2**15, 60.0
    y = np.linspace(-half, half, M, endpoint=False)
    xi = 2 * np.pi * np.fft.fftfreq(M, y[1] - y[0])
    f = bump(tanh2.U(y)) * np.exp(-y**2 / 2)
    q = [np.linalg.norm(np.fft.fft(np.exp(-1j * tanh2.U(y) * t) * f) / np.sqrt(1 + xi**2)) for t in t_grid]
    oracle = np.polyfit(np.log(t_grid), np.log(q), 1)[0]
    assert oracle == pytest.approx(-1.0, abs=0.15)
    assert fit.exponent == pytest.approx(-1.0, abs=0.15)


def test_unweighted_norm_is_conserved(free_flow, medium_set, medium_eig, medium_data):
    ops, e, bump, data, t_grid = free_flow
    assert damping_fit(e, bump, data, 0, 1, t_grid, ops.a).exponent == pytest.approx(0.0, abs=0.02)
    psi0, bump = medium_data
    tg = np.geomspace(10, 25, 24)
    assert damping_fit(medium_eig, bump, psi0, 0, 1, tg, medium_set.a).exponent == pytest.approx(0.0, abs=0.02)


def test_weight_hierarchy(production):
    P = production
    k1 = damping_fit(P.eig, P.bump, P.psi0, 1, 1, P.t_grid, P.ops.a)
    k2 = damping_fit(P.eig, P.bump, P.psi0, 2, 1, P.t_grid, P.ops.a)
    assert k2.exponent <= k1.exponent - 0.6


def _decade_times(tanh2, alpha):
    ops = build_operator_set(tanh2, build_grid(35.0, 2048), alpha, with_remainder=False)
    e = eigendecompose(ops.h)
    psi0, bump = default_initial_data(ops, e)
    t = np.linspace(0, 0.5 * recurrence_horizon(e, bump.core, alpha), 1201)
    vals = inviscid_trajectory(e, apply_funcalc_vector(e, bump, psi0), alpha, t).values
    omega = (vals @ ops.s_inv.matrix.T) * ops.m_values[None, :]
    v1, _ = velocity_from_vorticity(omega, ops.grid, alpha, ops.d)
    return decay_time(t, np.linalg.norm(v1, axis=1)), decay_time(t, weighted_norms(vals, 1, ops.a))


@pytest.fixture(scope="module")
def decade_times(tanh2):
    return {a: _decade_times(tanh2, a) for a in (1, 2)}


def test_weighted_decade_time_scales_with_alpha(decade_times):
    assert decade_times[2][1] / decade_times[1][1] == pytest.approx(0.5, abs=0.1)


def test_velocity_decade_time_scales_with_alpha(decade_times):
    # rates in alpha t: doubling alpha halves the time to lose a decade
    assert decade_times[2][0] / decade_times[1][0] == pytest.approx(0.5, abs=0.1)


def test_prepared_velocity_data_without_vorticity(flat_set):
    e = eigendecompose(flat_set.h)
    bump = bump_function((-0.4, 0.4))
    data = bump(flat_set.u_values) * np.exp(-flat_set.grid.nodes**2 / 2)
    with pytest.raises(FitError):
        velocity_damping_fit(flat_set, bump, data, 1, np.geomspace(10, 25, 24), e_h=e)


# -- viscous damping ----------------------------------------------------------

def test_viscous_damping_zero_viscosity(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    rep = viscous_damping_fit(medium_set, bump, psi0, 1, 0.0, np.geomspace(10, 25, 24), e_h=medium_eig)
    assert np.max(rep.gap) == 0.0 and rep.gap_constant == 0.0
    assert np.isinf(rep.t_cap)


def test_viscous_damping_regime_guard(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    with pytest.raises(ValueError, match="correction"):
        viscous_damping_fit(medium_set, bump, psi0, 1, 1e-2, np.geomspace(10, 25, 24), e_h=medium_eig)


def test_viscous_fit_cap(small_set):
    cap = viscous_fit_cap(small_set, 1, 1e-5)
    assert cap == pytest.approx((3 * 0.05 / (1e-5 * 0.25)) ** (1 / 3), rel=1e-2)
    assert cap < viscous_fit_cap(small_set, 1, 1e-6) and np.isinf(viscous_fit_cap(small_set, 1, 0.0))


def test_viscous_gap_grows_with_viscosity(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    tg = np.geomspace(10, 24, 24)
    a = viscous_damping_fit(medium_set, bump, psi0, 1, 1e-5, tg, e_h=medium_eig)
    b = viscous_damping_fit(medium_set, bump, psi0, 1, 4e-5, tg, e_h=medium_eig)
    assert 0 < a.gap_at(24) < b.gap_at(24)


# -- enhanced dissipation -----------------------------------------------------

def test_n_functional(small_set):
    v = np.exp(-small_set.grid.nodes**2)
    base = grid_norm(v, small_set.grid)
    assert n_functional(np.zeros(small_set.grid.N), 1, 1e-3, small_set) == 0.0
    assert n_functional(v, 2, 0.0, small_set) == pytest.approx(3 * base)
    assert n_functional(v, 1, 1e-3, small_set) > 2 * base


def test_enhanced_rejections(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    with pytest.raises(ValueError, match="decades"):
        enhanced_dissipation_scan(medium_set, bump, psi0, 1, [1e-3, 3e-4], e_h=medium_eig)
    with pytest.raises(ValueError, match="0.2"):
        enhanced_dissipation_scan(medium_set, bump, psi0, 1, [1e-2, 1e-4], e_h=medium_eig)
    far = bump_function((0.6, 0.7))
    outside = apply_funcalc_vector(medium_eig, far, np.exp(-(medium_set.grid.nodes - 2) ** 2))
    with pytest.raises(ValueError, match="degenerate"):
        enhanced_dissipation_scan(medium_set, bump, outside, 1, [1e-3, 3e-5], e_h=medium_eig)


def test_enhanced_flags_short_horizon(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    rep = enhanced_dissipation_scan(medium_set, bump, psi0, 1, [1e-3, 3e-5], e_h=medium_eig,
                                    t_max_per_nu=[50.0, 5.0 * 3e-5 ** (-1 / 3)])
    assert rep.half_times[0] < 50.0


def test_enhanced_uniform_in_alpha(tanh2):
    halves = {}
    for alpha in (1, 2):
        ops = build_operator_set(tanh2, build_grid(30.0, 1024), alpha)
        e = eigendecompose(ops.h)
        psi0, bump = default_initial_data(ops, e)
        halves[alpha] = enhanced_dissipation_scan(ops, bump, psi0, alpha, [1e-3, 3e-5], e_h=e).half_times
    for a, b in zip(halves[1], halves[2]):
        assert b <= 1.2 * a


def test_enhanced_rate_stable_under_refinement(tanh2):
    c0 = []
    for N in (512, 1024):
        ops = build_operator_set(tanh2, build_grid(30.0, N), 1)
        e = eigendecompose(ops.h)
        psi0, bump = default_initial_data(ops, e)
        rep = enhanced_dissipation_scan(ops, bump, psi0, 1, [1e-3, 3e-4, 1e-4, 3e-5], e_h=e)
        c0.append(rep.c0_fit)
    assert c0[0] > 0 and c0[1] == pytest.approx(c0[0], rel=0.3)


# -- propagation diagnostic ---------------------------------------------------

def test_propagation_observable_limits(medium_set, medium_eig, medium_data):
    psi0, bump = medium_data
    gpsi = apply_funcalc_vector(medium_eig, bump, psi0)
    full = medium_set.grid.h * np.linalg.norm(gpsi) ** 2
    hi = propagation_observable(medium_eig, bump, psi0, medium_set.a, 1e6, 1.0, 0.0, 0.0, 1)
    lo = propagation_observable(medium_eig, bump, psi0, medium_set.a, -1e6, 1.0, 0.0, 0.0, 1)
    assert hi == pytest.approx(full, rel=1e-12)
    assert lo <= 1e-12 * full
    with pytest.raises(ValueError):
        propagation_observable(medium_eig, bump, psi0, medium_set.a, 0.0, 0.5, 0.0, 0.0, 1)


def test_propagation_observable_does_not_grow(production):
    from shearlab.operators import mourre_check

    P = production
    theta_i = mourre_check(P.ops, (-0.3, 0.3), eig=P.eig).theta_I
    times = np.linspace(10, 50, 9)
    traj = inviscid_trajectory(P.eig, P.psi0, 1, times)
    obs = []
    for t, psi in zip(times, traj.values):
        obs.append(propagation_observable(P.eig, P.bump, psi, P.ops.a, -theta_i * t / 8,
                                          max(1.0, np.sqrt(theta_i * t)), theta_i / 4, t, 1))
    obs = np.array(obs)
    full = P.ops.grid.h * np.linalg.norm(apply_funcalc_vector(P.eig, P.bump, P.psi0)) ** 2
    forward = max(0.0, max(obs[j] - obs[i] for i in range(obs.size) for j in range(i + 1, obs.size)))
    assert forward <= 0.05 * full
