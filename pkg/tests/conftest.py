import datetime as dt

import pytest
from hypothesis import HealthCheck, settings
from shapely.geometry import box

from bipv.ephemeris import GeoLocation
from bipv.scene import Building, build_scene

settings.register_profile("repo", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

HK = GeoLocation(22.3, 114.2)
EQUINOX = dt.date(2023, 3, 21)

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def hk():
    return HK


@pytest.fixture
def square_scene():
    return build_scene([Building("a", box(0, 0, 10, 10), 20.0)], HK)


@pytest.fixture
def pair_scene():
    """Tall caster directly south of a low target, 5 m apart."""
    return build_scene([Building("tall", box(0, -15, 10, -5), 30.0),
                        Building("low", box(0, 0, 10, 10), 10.0)], HK)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
