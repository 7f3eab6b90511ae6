import numpy as np
import pytest

from cuspext import CellQuadrature, Scenario
from cuspext.squeeze import SqueezeParams


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def simple_quad():
    return CellQuadrature(Scenario(1.5, 6))


@pytest.fixture(scope="session")
def squeezed_quad():
    return CellQuadrature(Scenario(1.5, 6, "squeezed"))


@pytest.fixture(scope="session")
def powerlog_quad():
    return CellQuadrature(Scenario(3.0, 6, "squeezed", SqueezeParams("power_log", 2.0)))


@pytest.fixture(scope="session")
def cardioid_quad():
    return CellQuadrature(Scenario(cardioid=True))


def cusp_arc_points(profile, U, sign=1.0):
    """Square roots of (-U, sign phi(U)): points of the cusp arcs bounding M_s."""
    z = np.sqrt(-np.asarray(U) + 1j * sign * profile.phi(U))
    return np.stack([z.real, z.imag], -1)


_ACCEPTANCE = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line per criterion; echoed inline and in the session summary."""
    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
