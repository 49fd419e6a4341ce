"""Coercivity of the weighted operator and the spectrum of H for tanh mixing layers.

For ``U = tanh(y/L)`` the bottom of ``Sigma = I + m Delta^{-1} m`` has the
closed form ``1 - 2/(s(s+1))`` with ``s = alpha L``.  This script compares
the grid value to it and counts eigenvalues of ``H`` outside ``[U-, U+]``.
"""

from shearlab.discretization import build_grid
from shearlab.operators import CoercivityError, assemble_sigma, build_operator_set, coercivity_check
from shearlab.profiles import make_tanh_profile
from shearlab.spectral import eigendecompose, spectrum_report

N = 1024

print(f"{'L':>5} {'alpha':>5} {'c0 grid':>10} {'c0 exact':>10}  H spectrum")
for L in (0.5, 1.0, 2.0, 4.0):
    p = make_tanh_profile(L)
    grid = build_grid(40.0 * max(1.0, L), N)
    for alpha in (1, 2, 3):
        s = alpha * L
        exact = 1 - 2 / (s * (s + 1))
        c0 = coercivity_check(assemble_sigma(grid, p, alpha))
        try:
            ops = build_operator_set(p, grid, alpha, with_remainder=False)
        except CoercivityError:
            print(f"{L:5.1f} {alpha:5d} {c0:10.5f} {exact:10.5f}  Sigma not positive, H undefined")
            continue
        rep = spectrum_report(eigendecompose(ops.h), p.U_minus, p.U_plus)
        print(f"{L:5.1f} {alpha:5d} {c0:10.5f} {exact:10.5f}  "
              f"{rep.n_outside} outside, excursion {rep.max_excursion:.1e}")
