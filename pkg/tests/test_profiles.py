import math

import numpy as np
import pytest
import sympy as sp
from scipy import integrate

from shearlab.discretization import build_grid
from shearlab.profiles import (
    SyntheticProfile,
    TableProfile,
    check_hypotheses,
    load_table_profile,
    make_algebraic_profile,
    make_tanh_profile,
    schrodinger_lambda0,
)


def _sympy_tanh(L):
    y = sp.symbols("y", real=True)
    U = sp.tanh(y / L)
    return y, U


def test_tanh_values_at_origin():
    p = make_tanh_profile(2.0)
    assert p.U(0.0) == 0.0
    assert p.dU(0.0) == pytest.approx(0.5, abs=1e-15)
    assert p.m(0.0) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    assert (p.U_minus, p.U_plus) == (-1.0, 1.0)


def test_tanh_far_field():
    p = make_tanh_profile(1.0)
    assert p.U(50.0) == pytest.approx(1.0)
    assert p.m(50.0) < 1e-20


@pytest.mark.parametrize("L", [0.0, -1.0, float("nan")])
def test_tanh_rejects_bad_length(L):
    with pytest.raises(ValueError):
        make_tanh_profile(L)


def test_tanh_derivatives_match_symbolic_oracle():
    L = 2.0
    y, U = _sympy_tanh(sp.Rational(2))
    dU, d2U = sp.diff(U, y), sp.diff(U, y, 2)
    m = sp.sqrt(2) / 2 * sp.sech(y / 2)
    fun = {name: sp.lambdify(y, e, "numpy") for name, e in
           dict(U=U, dU=dU, d2U=d2U, m=m, dm=sp.diff(m, y), d2m=sp.diff(m, y, 2)).items()}
    p = make_tanh_profile(L)
    ys = np.linspace(-12, 12, 97)
    for name, f in fun.items():
        np.testing.assert_allclose(getattr(p, name)(ys), f(ys), rtol=1e-12, atol=1e-14, err_msg=name)


def test_tanh_weight_from_curvature_matches_closed_form():
    p = make_tanh_profile(2.0)
    g = build_grid(40.0, 2048)
    y = g.nodes
    away = np.abs(y) > 1e-3
    m_from_ratio = np.sqrt(-p.d2U(y[away]) / p.U(y[away]))
    np.testing.assert_allclose(m_from_ratio, p.m(y[away]), rtol=1e-12)


def test_algebraic_limits_and_slope():
    p = make_algebraic_profile(1.0, 2)
    assert p.U(0.0) == 0.0
    assert p.dU(0.0) == pytest.approx(1.0)
    oracle, _ = integrate.quad(lambda s: (1 + s * s) ** -2, 0, np.inf, epsabs=1e-14)
    assert p.U_plus == pytest.approx(math.pi / 4, abs=1e-14)
    assert p.U_plus == pytest.approx(oracle, abs=1e-12)
    assert make_algebraic_profile(3.0, 2).dU(0.0) == pytest.approx(1.0 / 3.0, abs=1e-15)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_algebraic_velocity_matches_quadrature(k):
    p = make_algebraic_profile(1.5, k)
    for y in (-40.0, -3.0, -0.2, 0.7, 2.5, 9.0, 60.0):
        z = y / 1.5
        oracle, _ = integrate.quad(lambda s: (1 + s * s) ** -k, 0, z, epsabs=1e-14, epsrel=1e-13, limit=200)
        assert p.U(y) == pytest.approx(oracle, abs=1e-13)


def test_algebraic_k2_symbolic_weight():
    z = sp.symbols("z", real=True)
    V = (z / (1 + z**2) + sp.atan(z)) / 2
    m = sp.sqrt(-sp.diff(V, z, 2) / V)
    f = sp.lambdify(z, sp.simplify(m), "mpmath")
    p = make_algebraic_profile(1.0, 2)
    for zz in (0.3, 1.0, 4.0, 20.0):
        assert p.m(zz) == pytest.approx(float(f(zz)), rel=1e-12)
    assert np.isfinite(p.m(0.0)) and p.m(0.0) > 0


@pytest.mark.parametrize("k", [0, 1, 2.5])
def test_algebraic_rejects_low_order(k):
    with pytest.raises(ValueError):
        make_algebraic_profile(1.0, k)


def test_hypotheses_pass_for_stable_tanh():
    rep = check_hypotheses(make_tanh_profile(2.0), build_grid(80.0, 2048))
    assert rep.h1_pass and rep.h2_pass and rep.h3_pass
    assert rep.lambda0 == pytest.approx(-0.25, abs=1e-3)


def test_hypotheses_flag_unstable_tanh():
    rep = check_hypotheses(make_tanh_profile(0.5), build_grid(40.0, 2048))
    assert not rep.h3_pass
    assert rep.h1_pass


def test_table_with_sign_change_fails_monotonicity(tmp_path):
    y = np.linspace(-30, 30, 601)
    U = np.tanh(y / 2) + 0.6 * np.exp(-((y - 5.0) ** 2))
    dU = np.gradient(U, y)
    d2U = np.gradient(dU, y)
    path = tmp_path / "bumpy.txt"
    with open(path, "w") as fh:
        fh.write("y U Uprime Uprimeprime\n")
        np.savetxt(fh, np.column_stack([y, U, dU, d2U]))
    p = load_table_profile(path)
    rep = check_hypotheses(p, build_grid(25.0, 400))
    assert not rep.h1_pass


def test_table_reproduces_tanh(tmp_path):
    ref = make_tanh_profile(2.0)
    y = np.linspace(-40, 40, 4001)
    path = tmp_path / "tanh.txt"
    with open(path, "w") as fh:
        fh.write("y U Uprime Uprimeprime\n")
        np.savetxt(fh, np.column_stack([y, ref.U(y), ref.dU(y), ref.d2U(y)]), fmt="%.17g")
    p = load_table_profile(path)
    ys = np.linspace(-10, 10, 77)
    np.testing.assert_allclose(p.U(ys), ref.U(ys), atol=1e-8)
    np.testing.assert_allclose(p.m(ys), ref.m(ys), atol=1e-5)


def test_table_header_and_order_validated(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("y U dU d2U\n0 0 1 0\n")
    with pytest.raises(ValueError):
        load_table_profile(bad)
    with pytest.raises(ValueError):
        TableProfile([0.0, 0.0, 1.0], [0, 0, 1], [1, 1, 1], [0, 0, 0])


@pytest.mark.parametrize("L,tol", [(2.0, 1e-3), (1.0, 5e-3)])
def test_lambda0_formula(L, tol):
    lam = schrodinger_lambda0(make_tanh_profile(L), build_grid(40.0 * L, 2048))
    assert lam == pytest.approx(-1.0 / L**2, abs=tol)


def test_lambda0_without_weight_is_dirichlet_laplacian():
    p = SyntheticProfile(make_tanh_profile(2.0), 0.0)
    g = build_grid(10.0, 300)
    lam = schrodinger_lambda0(p, g)
    assert lam >= 0.0
    assert lam == pytest.approx((math.pi / 20.0) ** 2, rel=1e-3)


def test_lambda0_deepens_as_L_shrinks():
    vals = [schrodinger_lambda0(make_tanh_profile(L), build_grid(40.0 * L, 2048))
            for L in (4.0, 2.0, 1.5, 1.25)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("L", [2.0, 4.0])
def test_lambda0_refinement(L):
    p = make_tanh_profile(L)
    a = schrodinger_lambda0(p, build_grid(40.0 * L, 1024))
    b = schrodinger_lambda0(p, build_grid(60.0 * L, 2048))
    assert abs(a - b) < 1e-3


def test_monotonicity_for_both_families():
    g = build_grid(30.0, 600)
    for p in (make_tanh_profile(0.7), make_tanh_profile(3.0),
              make_algebraic_profile(1.0, 2), make_algebraic_profile(2.0, 4)):
        assert check_hypotheses(p, g).h1_pass
