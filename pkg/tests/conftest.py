import numpy as np
import pytest

from fprsim.geometry import build_hex_grid
from fprsim.propagation import PropagationModel

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("FPR_SIM_CACHE_DIR", str(tmp_path_factory.getbasetemp() / "mu-cache"))


@pytest.fixture(scope="session")
def grid():
    return build_hex_grid(1.0, 3)


@pytest.fixture(scope="session")
def model():
    return PropagationModel(3.5)


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def random_mu(rng, n_cells, spread=0.3):
    """Plausible moment arrays: own cell 1, others small, second moment above the squared first."""
    mu1 = rng.uniform(0.001, spread, n_cells)
    mu2 = mu1**2 * rng.uniform(1.0, 3.0, n_cells)
    mu1[0] = mu2[0] = 1.0
    return mu1, mu2


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
