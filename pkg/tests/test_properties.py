import numpy as np
from hypothesis import given, settings, strategies as st
from scipy import linalg

from shearlab.discretization import (
    build_grid,
    first_derivative_op,
    laplacian_alpha,
    second_derivative_op,
    solve_laplacian,
)
from shearlab.evolution import EvolutionState, inviscid_propagate, transform_state
from shearlab.observables import fit_power_law
from shearlab.operators import assemble_sigma, coercivity_check
from shearlab.profiles import make_tanh_profile
from shearlab.spectral import bump_function, smooth_step, weighted_norm

FAST = settings(max_examples=25, deadline=None)

sizes = st.integers(min_value=8, max_value=80)
half_widths = st.floats(min_value=0.5, max_value=50.0)
alphas = st.integers(min_value=1, max_value=5)


def vectors(n):
    return st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n).map(np.array)


@FAST
@given(half_widths, sizes)
def test_grid_geometry(Y, N):
    g = build_grid(Y, N)
    y = g.nodes
    assert y[0] > -Y and y[-1] < Y
    np.testing.assert_allclose(np.diff(y), g.h, rtol=1e-10)
    np.testing.assert_allclose(g.refined().nodes[1::2], y, atol=1e-12 * Y)


@FAST
@given(half_widths, sizes)
def test_stencil_symmetries(Y, N):
    g = build_grid(Y, N)
    D2 = second_derivative_op(g).matrix
    D = first_derivative_op(g).matrix
    assert np.array_equal(D2, D2.T) and np.array_equal(D, -D.T)
    assert linalg.eigvalsh(D2)[-1] < 0


@FAST
@given(half_widths, sizes, alphas, st.data())
def test_laplacian_solve_inverts(Y, N, alpha, data):
    g = build_grid(Y, N)
    rhs = data.draw(vectors(N)) + 1j * data.draw(vectors(N))
    x = solve_laplacian(g, alpha, rhs)
    back = laplacian_alpha(g, alpha).matrix @ x
    assert np.linalg.norm(back - rhs) <= 1e-8 * max(np.linalg.norm(rhs), 1.0)


@FAST
@given(st.floats(-2.0, 3.0))
def test_smooth_step_partition(s):
    a, b = smooth_step(np.array([s, 1.0 - s]))
    assert 0.0 <= a <= 1.0 and abs(a + b - 1.0) <= 1e-15


@FAST
@given(st.floats(-0.8, 0.7), st.floats(0.01, 0.5), st.floats(0.005, 0.1), st.floats(-2.0, 2.0))
def test_bump_range_and_plateau(a, width, d, x):
    g = bump_function((a, a + width), delta_g=d)
    v = float(g(x))
    assert 0.0 <= v <= 1.0
    lo, hi = g.support
    if a <= x <= a + width:
        assert v == 1.0
    if x <= lo or x >= hi:
        assert v == 0.0


@FAST
@given(st.floats(-0.4, 0.4), st.floats(0.0, 0.15))
def test_bump_symmetric(c, off):
    g = bump_function((c - 0.1, c + 0.1))
    assert abs(float(g(c + off)) - float(g(c - off))) <= 1e-14


@FAST
@given(st.data(), st.integers(0, 4))
def test_weighted_norm_contraction_and_ordering(small_set, data, k):
    n = small_set.grid.N
    v = data.draw(vectors(n)) + 0j
    a = small_set.a
    nk, nk1 = weighted_norm(v, k, a), weighted_norm(v, k + 1, a)
    assert nk1 <= nk * (1 + 1e-12) + 1e-300
    assert weighted_norm(v, 0, a) >= nk * (1 - 1e-12)


@FAST
@given(st.floats(-3.0, -0.1), st.floats(0.1, 10.0))
def test_power_law_fit_recovers_exponent(p, c):
    t = np.geomspace(10, 200, 24)
    f = fit_power_law(t, c * t**p)
    assert abs(f.exponent - p) <= 1e-9 and abs(f.prefactor / c - 1) <= 1e-9


@FAST
@given(st.floats(0.0, 500.0), st.data())
def test_inviscid_unitary_and_semigroup(small_set, small_eig, t, data):
    psi = data.draw(vectors(small_set.grid.N)) + 0j
    a = inviscid_propagate(small_eig, psi, 1, t).values
    assert abs(np.linalg.norm(a) - np.linalg.norm(psi)) <= 1e-10 * max(np.linalg.norm(psi), 1.0)
    half = inviscid_propagate(small_eig, psi, 1, t / 2).values
    b = inviscid_propagate(small_eig, half, 1, t / 2).values
    assert np.linalg.norm(a - b) <= 1e-9 * max(np.linalg.norm(psi), 1.0)


@FAST
@given(st.data())
def test_transform_round_trip(small_set, data):
    psi = data.draw(vectors(small_set.grid.N)) + 0j
    om = transform_state(EvolutionState("psi", psi, 1), "omega", small_set)
    back = transform_state(om, "psi", small_set).values
    assert np.linalg.norm(back - psi) <= 1e-8 * max(np.linalg.norm(psi), 1e-300)


@settings(max_examples=8, deadline=None)
@given(st.floats(1.2, 4.0), alphas)
def test_sigma_between_oracle_and_one(L, alpha):
    # 0 < Sigma <= 1 and its bottom follows 1 - 2/(s(s+1)), s = alpha L
    g = build_grid(40.0 * L, 384)
    sigma = assemble_sigma(g, make_tanh_profile(L), alpha)
    w = linalg.eigvalsh(sigma.matrix)
    s = alpha * L
    assert w[-1] <= 1.0 + 1e-12
    assert abs(coercivity_check(sigma) - (1 - 2 / (s * (s + 1)))) <= 5e-3
