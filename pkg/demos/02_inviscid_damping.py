"""Inviscid damping rates of the frequency-weighted norms and of the velocity.

The state is filtered to the spectral window [-0.4, 0.4] of H and evolved
exactly through the eigendecomposition.  Power laws are fitted on
``[10, recurrence/2]``, where the finite grid still behaves like the line.
Expected exponents are about -1 (k = 1, v1) and -2 (k = 2, v2).
"""

from shearlab.discretization import build_grid
from shearlab.evolution import default_initial_data, recurrence_horizon
from shearlab.observables import damping_fit, inviscid_fit_window, log_time_grid, velocity_damping_fit
from shearlab.operators import build_operator_set
from shearlab.profiles import make_tanh_profile
from shearlab.spectral import eigendecompose

Y, N = 35.0, 2048

ops = build_operator_set(make_tanh_profile(2.0), build_grid(Y, N), 1, with_remainder=False)
eig = eigendecompose(ops.h)
psi0, bump = default_initial_data(ops, eig)
rec = recurrence_horizon(eig, bump.core)
times = log_time_grid(*inviscid_fit_window(rec))
print(f"recurrence horizon {rec:.1f}, fit window [{times[0]:.0f}, {times[-1]:.1f}]")

fits = [damping_fit(eig, bump, psi0, k, 1, times, ops.a) for k in (1, 2)]
fits += list(velocity_damping_fit(ops, bump, psi0, 1, times, e_h=eig))
for f in fits:
    print(f"{f.quantity:>28}: t^{f.exponent:+.3f}  residual {f.residual:.2f}  [{f.status}]")

# grid refinement at fixed Y shows how the rates drift with the spacing h
for n in (1024, 2048):
    o = build_operator_set(make_tanh_profile(2.0), build_grid(Y, n), 1, with_remainder=False)
    e = eigendecompose(o.h)
    p0, b = default_initial_data(o, e)
    tg = log_time_grid(*inviscid_fit_window(recurrence_horizon(e, b.core)))
    k1 = damping_fit(e, b, p0, 1, 1, tg, o.a)
    print(f"N = {n}: h = {o.grid.h:.4f}, k=1 exponent {k1.exponent:+.3f}, t_max {tg[-1]:.0f}")
