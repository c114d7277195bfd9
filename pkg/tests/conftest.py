import pytest
from hypothesis import HealthCheck, settings

from modaldisp.dispersion import LossModel, Scenario
from modaldisp.fibermodes import solve_lp_modes
from modaldisp.launch import GaussianBeam, LaunchSpec
from modaldisp.profile import RadialFiberSpec, synth_gi_profile

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def coarse_profile():
    """The default synthetic waveguide on a 0.5 um grid (fast enough for unit tests)."""
    return synth_gi_profile(step=0.5)


@pytest.fixture(scope="session")
def coarse_scenario(coarse_profile):
    sc = Scenario(coarse_profile, 0.85, 1.0, LaunchSpec(GaussianBeam(4.0)), LossModel())
    sc.modeset  # solve once for the whole session
    return sc


@pytest.fixture(scope="session")
def mmf_modes():
    return solve_lp_modes(RadialFiberSpec(), 0.85)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
