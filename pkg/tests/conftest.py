from types import SimpleNamespace

import pytest

from shearlab.discretization import build_grid
from shearlab.evolution import default_initial_data, recurrence_horizon
from shearlab.observables import inviscid_fit_window, log_time_grid
from shearlab.operators import build_operator_set
from shearlab.profiles import SyntheticProfile, make_tanh_profile
from shearlab.spectral import eigendecompose

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def tanh2():
    return make_tanh_profile(2.0)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(20.0, 200)


@pytest.fixture(scope="session")
def small_set(tanh2, small_grid):
    return build_operator_set(tanh2, small_grid, 1)


@pytest.fixture(scope="session")
def small_eig(small_set):
    return eigendecompose(small_set.h)


@pytest.fixture(scope="session")
def medium_grid():
    return build_grid(30.0, 512)


@pytest.fixture(scope="session")
def medium_set(tanh2, medium_grid):
    return build_operator_set(tanh2, medium_grid, 1)


@pytest.fixture(scope="session")
def medium_eig(medium_set):
    return eigendecompose(medium_set.h)


@pytest.fixture(scope="session")
def medium_data(medium_set, medium_eig):
    return default_initial_data(medium_set, medium_eig)


@pytest.fixture(scope="session")
def flat_set(tanh2, medium_grid):
    """Velocity tanh(y/2) with the weight switched off (pure multiplication)."""
    return build_operator_set(SyntheticProfile(tanh2, 0.0), medium_grid, 1)


PRODUCTION_Y = 35.0
PRODUCTION_N = 2048


@pytest.fixture(scope="session")
def production(tanh2):
    """tanh L=2, alpha=1 at the damping resolution, with default data and fit grid."""
    ops = build_operator_set(tanh2, build_grid(PRODUCTION_Y, PRODUCTION_N), 1)
    e = eigendecompose(ops.h)
    psi0, bump = default_initial_data(ops, e)
    rec = recurrence_horizon(e, bump.core)
    t_grid = log_time_grid(*inviscid_fit_window(rec))
    return SimpleNamespace(ops=ops, eig=e, psi0=psi0, bump=bump, rec=rec, t_grid=t_grid)


def record(number, passed, detail):
    """Register one acceptance line for the terminal summary and print it."""
    line = f"CRITERION {number:02d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
