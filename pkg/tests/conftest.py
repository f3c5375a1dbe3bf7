from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from heraldsim.builders import dispersion_model, pump_envelope, reference_jsa, reference_weights
from heraldsim.config import load_config

ROOT = Path(__file__).resolve().parents[1]
REFERENCE_CONFIG = ROOT / "configs" / "reference.yaml"

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def cfg():
    return load_config(REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def model(cfg):
    return dispersion_model(cfg)


@pytest.fixture(scope="session")
def pump(cfg):
    return pump_envelope(cfg)


@pytest.fixture(scope="session")
def ref_jsa(cfg):
    return reference_jsa(cfg)


@pytest.fixture(scope="session")
def ref_weights(cfg):
    return reference_weights(cfg)


def gaussian_jsa(grid, rho: float = 0.0, sx: float = 1.0, sy: float = 1.0, phase=None):
    """Correlated 2D Gaussian amplitude on ``grid`` in units of the grid half-spans."""
    from heraldsim.jsa import JointSpectralAmplitude

    ws, wi = grid.mesh()
    x = (ws - grid.signal_center) / (0.2 * grid.signal_span)
    y = (wi - grid.idler_center) / (0.2 * grid.idler_span)
    q = (x / sx) ** 2 - 2 * rho * (x / sx) * (y / sy) + (y / sy) ** 2
    amp = np.exp(-q / (2 * (1 - rho**2))).astype(complex)
    if phase is not None:
        amp = amp * np.exp(1j * phase)
    return JointSpectralAmplitude(grid, amp)
