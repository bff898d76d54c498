import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from deckcover.atlas import builtin_atlas
from deckcover.cech import CechCocycle
from deckcover.covering import Covering

settings.register_profile("deckcover", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("deckcover")


def standard_cover(name: str, **kw) -> Covering:
    at = builtin_atlas(name, **kw)
    return Covering(at, CechCocycle.standard(at))


@pytest.fixture(scope="session")
def circle_cov():
    return standard_cover("circle")


@pytest.fixture(scope="session")
def cylinder_cov():
    return standard_cover("cylinder")


@pytest.fixture(scope="session")
def torus_cov():
    return standard_cover("torus")


@pytest.fixture(scope="session")
def annulus_cov():
    return standard_cover("annulus")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
