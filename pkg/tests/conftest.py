import numpy as np
import pytest

from refrabill.geometry import CurveSpec, build_boundary
from refrabill.model import BilliardParams
from refrabill.words import build_interval_system

# Threshold found by the default scan (8-point log grid from 1 to 1000) and
# the working energy jump used by the chaos experiments.
H1_GRID = [float(h) for h in np.geomspace(1.0, 1000.0, 8)]
H1 = H1_GRID[2]
H_WORK = 10.0 * H1


@pytest.fixture(scope="session")
def ellipse():
    return build_boundary(CurveSpec.ellipse(1.5, 1.0))


@pytest.fixture(scope="session")
def system(ellipse):
    return build_interval_system(ellipse)


@pytest.fixture(scope="session")
def params():
    return BilliardParams(h=100.0)


@pytest.fixture(scope="session")
def work_params():
    return BilliardParams(h=H_WORK)


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    _ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
