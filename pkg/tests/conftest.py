import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nlacoustics.grid import Grid  # noqa: E402
from nlacoustics.params import PhysicalParams  # noqa: E402

# desk preset: long domain so that a(1 + B/A) pi^2 T / L^2 is small over the a sweep
DESK_PARAMS = PhysicalParams(c0=1.0, nu_lambda=0.1, b_over_a=0.5, a=0.05)
DESK_LENGTH = 4.0
DESK_N = 64
DESK_DT = 0.01
DESK_T = 1.0
A_VALUES = (0.1, 0.05, 0.025, 0.0125)


@pytest.fixture(scope="session")
def desk_params():
    return DESK_PARAMS


@pytest.fixture(scope="session")
def desk_grid():
    return Grid(1, DESK_N, DESK_LENGTH)


@pytest.fixture
def report(capsys):
    """Print one acceptance line (outside capture) and return the verdict."""

    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE criterion {number}: {'PASS' if ok else 'FAIL'} [{detail}]")
        return ok

    return _report
