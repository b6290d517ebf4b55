import numpy as np
import pytest

from mechlab import FiniteSupport, IndependentMarginals, ModelDims


def assert_close(est, expected, k=3.0, floor=1e-12):
    """``est`` (an EstimateWithCI) lies within ``k`` standard errors of ``expected``."""
    assert abs(est.mean - expected) <= k * est.std_error + floor, (
        f"{est.mean} vs {expected}: |diff|={abs(est.mean - expected):.3g} > {k}*{est.std_error:.3g}")


@pytest.fixture
def dims22():
    return ModelDims(2, 2)


@pytest.fixture
def uniform22(dims22):
    return IndependentMarginals(dims22)


@pytest.fixture
def opposed_model():
    """Each agent independently uniform over types (1, 0) and (0, 1)."""
    types = [(1.0, 0.0), (0.0, 1.0)]
    atoms = [[a, b] for a in types for b in types]
    return FiniteSupport(atoms, np.full(4, 0.25))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
