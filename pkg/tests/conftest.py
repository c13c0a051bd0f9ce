import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from divkit.geometry import ModelSpace

settings.register_profile("divkit", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("divkit")

SPACES = {
    "H2": ModelSpace.hyperbolic(2),
    "H3": ModelSpace.hyperbolic(3),
    "R2": ModelSpace.euclidean(2),
    "H2xR": ModelSpace.hyperbolic(2).times(ModelSpace.euclidean(1)),
    "H2xR2": ModelSpace.hyperbolic(2).times(ModelSpace.euclidean(2)),
    "H2xH2": ModelSpace.hyperbolic(2, 2),
}


@pytest.fixture(params=sorted(SPACES))
def space(request):
    return SPACES[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(space, rng, n, scale=2.0):
    from divkit.geometry import tangent_exp

    c = rng.normal(0, scale, (n, space.dim))
    return tangent_exp(space, np.broadcast_to(space.basepoint, (n, space.ambient_dim)), c)


# -- acceptance criteria: one pass/fail line each in the terminal summary

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")
