import os
import sys

import numpy as np
import pytest
from hypothesis import settings

from lejaexp.problems import ADVECTION_TRANSPORT, Grid1D, laplacian, upwind3_dx

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def dense(op, n):
    """Assemble a linear map column by column."""
    return np.column_stack([op(e) for e in np.eye(n)])


def laplacian_matrix(n):
    g = Grid1D(n)
    return dense(lambda e: laplacian(e, g), n)


def advection_matrix(n, eta=1.0, transport=ADVECTION_TRANSPORT):
    g = Grid1D(n)
    return eta * dense(lambda e: upwind3_dx(e, g, transport), n)


def centered_derivative_matrix(n):
    """Periodic (u[i+1] - u[i-1]) / 2h; skew-symmetric."""
    m = np.zeros((n, n))
    for i in range(n):
        m[i, (i + 1) % n] = 0.5 * n
        m[i, (i - 1) % n] = -0.5 * n
    return m


def spectral_radius(m):
    return float(np.max(np.abs(np.linalg.eigvals(m))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
