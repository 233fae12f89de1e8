import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dragflow.spectral import build_grid, to_spectral

settings.register_profile("dragflow", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dragflow")

ACCEPTANCE_LINES: list[str] = []


def random_field(grid, rng, vector=False, smooth=0.0):
    """Spectrum of a real random field, optionally damped by exp(-smooth |xi|^2)."""
    shape = (3, *grid.shape) if vector else grid.shape
    fhat = to_spectral(rng.standard_normal(shape))
    return fhat * np.exp(-smooth * grid.xi_mag_sq) if smooth else fhat


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 2 * np.pi)


@pytest.fixture(scope="session")
def grid12():
    return build_grid(12, 10.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
