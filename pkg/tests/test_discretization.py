import math

import numpy as np
import pytest
from scipy import linalg

from shearlab.discretization import (
    DenseOperator,
    GridMismatchError,
    build_grid,
    conjugate_operator,
    first_derivative_op,
    laplacian_alpha,
    sandwiched_inverse,
    second_derivative_op,
    solve_laplacian,
)
from shearlab.profiles import make_tanh_profile


def test_grid_arithmetic():
    g = build_grid(1.0, 9)
    assert g.h == pytest.approx(0.2)
    assert g.nodes[0] == pytest.approx(-0.8)
    g = build_grid(40.0, 2048)
    assert g.h == 80.0 / 2049
    assert g.h * (g.N + 1) == pytest.approx(2 * g.Y, rel=1e-15)


@pytest.mark.parametrize("Y,N", [(0.0, 10), (-1.0, 10), (float("inf"), 10), (1.0, 7), (1.0, 8.5)])
def test_grid_rejects_degenerate(Y, N):
    with pytest.raises(ValueError):
        build_grid(Y, N)


def test_refined_grid_is_nested():
    g = build_grid(3.0, 20)
    f = g.refined()
    np.testing.assert_allclose(f.nodes[1::2], g.nodes, atol=1e-14)


def test_second_derivative_on_dirichlet_mode():
    errs = []
    for N in (99, 199):
        g = build_grid(5.0, N)
        y = g.nodes
        v = np.sin(math.pi * y / g.Y)
        D2 = second_derivative_op(g)
        err = np.max(np.abs(D2 @ v + (math.pi / g.Y) ** 2 * v))
        errs.append(err / g.h**2)
    # err <= C h^2 with a grid-independent C
    assert errs[1] == pytest.approx(errs[0], rel=0.05)


def test_second_derivative_constants_and_symmetry():
    g = build_grid(2.0, 30)
    D2 = second_derivative_op(g)
    r = D2 @ np.ones(g.N)
    assert np.all(r[1:-1] == 0) and r[0] != 0 and r[-1] != 0
    assert D2.symmetry_defect() <= 1e-14
    assert np.max(linalg.eigvalsh(D2.matrix)) <= 0


def test_first_derivative_exact_on_linears():
    g = build_grid(2.0, 30)
    D = first_derivative_op(g)
    np.testing.assert_allclose((D @ g.nodes)[1:-1], 1.0, rtol=1e-13)
    assert np.max(np.abs(D.matrix + D.matrix.T)) <= 1e-14
    A = conjugate_operator(g)
    w = linalg.eigvals(A.matrix)
    assert np.max(np.abs(w.imag)) < 1e-12


def test_laplacian_alpha_shift():
    g = build_grid(3.0, 64)
    l1 = linalg.eigvalsh(laplacian_alpha(g, 1).matrix)
    l2 = linalg.eigvalsh(laplacian_alpha(g, 2).matrix)
    assert l1.max() <= -1
    np.testing.assert_allclose(l2 - l1, -3.0, atol=1e-10)
    with pytest.raises(ValueError, match="no-mixing"):
        laplacian_alpha(g, 0)


def test_dense_operator_guards():
    g = build_grid(1.0, 10)
    with pytest.raises(ValueError):
        DenseOperator(np.triu(np.ones((10, 10))), "symmetric", g)
    with pytest.raises(ValueError):
        DenseOperator(np.eye(9), "general", g)
    a = second_derivative_op(g)
    b = second_derivative_op(build_grid(2.0, 10))
    with pytest.raises(GridMismatchError):
        a + b
    assert (a + a).kind == "symmetric"
    assert (a @ a).kind == "general"


def test_sandwich_zero_weight():
    g = build_grid(5.0, 50)
    S = sandwiched_inverse(g, 1, np.zeros(g.N))
    assert np.all(S.matrix == 0)


def test_sandwich_solve_matches_kernel():
    p = make_tanh_profile(2.0)
    g = build_grid(40.0, 1024)
    m = p.m(g.nodes)
    a = sandwiched_inverse(g, 1, m, method="solve").matrix
    b = sandwiched_inverse(g, 1, m, method="kernel").matrix
    rel = linalg.norm(a - b, 2) / linalg.norm(a, 2)
    assert rel <= 2e-2
    assert np.max(np.abs(a - a.T)) <= 1e-10
    assert np.max(linalg.eigvalsh(a)) <= 1e-10


def test_laplacian_round_trip():
    g = build_grid(6.0, 120)
    rng = np.random.default_rng(3)
    f = rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)
    x = solve_laplacian(g, 2, f)
    back = laplacian_alpha(g, 2) @ x
    assert np.linalg.norm(back - f) <= 1e-10 * np.linalg.norm(f)


def test_sandwich_refinement_convergence():
    p = make_tanh_profile(2.0)
    diffs = []
    for N in (127, 255):
        g = build_grid(20.0, N)
        f = g.refined()
        a = sandwiched_inverse(g, 1, p.m(g.nodes)).matrix / g.h
        b = sandwiched_inverse(f, 1, p.m(f.nodes)).matrix[1::2, 1::2] / f.h
        diffs.append(np.max(np.abs(a - b)))
    # second order: halving h divides the coarse/fine gap by ~4
    assert 3.0 < diffs[0] / diffs[1] < 5.0
