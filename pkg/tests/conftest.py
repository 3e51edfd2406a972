import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("xcflab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("xcflab")

entries = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
mat3 = arrays(np.float64, (3, 3), elements=entries)


@st.composite
def spd(draw, floor=0.3):
    M = draw(mat3)
    return M @ M.T + floor * np.eye(3)


@st.composite
def sym(draw):
    M = draw(mat3)
    return 0.5 * (M + M.T)


def random_spd(rng, floor=0.3):
    M = rng.uniform(-1, 1, (3, 3))
    return M @ M.T + floor * np.eye(3)


def random_sym(rng):
    M = rng.standard_normal((3, 3))
    return 0.5 * (M + M.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
