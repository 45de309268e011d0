import math

import numpy as np
import pytest

from core import config
from core.run_config import RunConfig
from processing.grid import Grid


@pytest.fixture(autouse=True)
def isolated_outputs(tmp_path, monkeypatch):
    """Keeps baselines and the ledger inside the test's temporary directory."""
    monkeypatch.setattr(config, "BASELINE_FILE", str(tmp_path / "baselines.json"))
    monkeypatch.setattr(config, "LEDGER_URL", None)
    monkeypatch.setattr(config, "OUTPUT_ROOT", None)
    return tmp_path


@pytest.fixture
def grid():
    return Grid(L_x=2.0 * math.pi, N_x=16, Y_max=10.0, N_y=64)


@pytest.fixture
def stretched_grid():
    return Grid(L_x=2.0 * math.pi, N_x=16, Y_max=10.0, N_y=64, y_stretch=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """Desk-scale configuration small enough for solver-backed tests."""
    cfg = RunConfig()
    cfg.grid.N_x = 16
    cfg.grid.N_y = 64
    cfg.physics.u_scale = 0.01
    cfg.physics.epsilon = 0.025
    cfg.time.dt = 1e-3
    cfg.time.T_end = 0.005
    return cfg.validate()
