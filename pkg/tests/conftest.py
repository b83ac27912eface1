import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stokes_lagrange.geometry import Domain, JordanCurve, SigmaArc

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance results collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def right_half():
    return SigmaArc(0, 0.75, 0.25)


@pytest.fixture(scope="session")
def disk():
    return Domain(JordanCurve.circle(m=256), sigma=[right_half()])


@pytest.fixture(scope="session")
def annulus():
    return Domain(JordanCurve.circle(m=256), holes=[JordanCurve.circle(radius=0.3, m=128)],
                  sigma=[right_half()])


@pytest.fixture
def rng():
    return np.random.default_rng(20240614)


def random_points_in(domain, n, rng, margin=0.0):
    lo = domain.outer.points.min(axis=0)
    hi = domain.outer.points.max(axis=0)
    out = []
    while sum(len(o) for o in out) < n:
        x = rng.uniform(lo, hi, size=(4 * n, 2))
        out.append(x[domain.inside(x, margin=margin)])
    return np.vstack(out)[:n]
