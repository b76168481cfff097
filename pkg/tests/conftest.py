import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings

from pulseorigin.constants import OMEGA0, SLICE_DT
from pulseorigin.characterize import dispersion_gradient
from pulseorigin.dynamics import Waveform
from pulseorigin.errors import UndefinedPhaseError

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_waveform(seed: int, n: int = 20, scale: float = 1.0) -> Waveform:
    rng = np.random.default_rng(seed)
    return Waveform(rng.uniform(-scale, scale, n) * OMEGA0, SLICE_DT, OMEGA0,
                    label=f"random-{seed}")


def phase_waveform(seed: int, n: int = 20, scale: float = 1.0, eps: float = 0.0) -> Waveform:
    """Random waveform whose resonant phase is defined; rejects pole cases."""
    w = random_waveform(seed, n, scale)
    try:
        dispersion_gradient(w, eps)
    except UndefinedPhaseError:
        assume(False)
    return w


@pytest.fixture
def rand_wf():
    return random_waveform


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
