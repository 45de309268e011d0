import asyncio

import numpy as np
import pytest

from core.exceptions import AnalyticityDeficitError
from experiments.trajectory import (
    STATUS_ABORTED,
    STATUS_COMPLETE,
    STATUS_DEFICIT,
    STATUS_T_STAR,
    ExperimentOutcome,
    Observer,
    data_from_config,
    gather_jobs,
    grid_from_config,
    initial_state,
    run_trajectory,
)
from processing.grid import enforce_neumann_row
from processing.phase import PhaseState
from processing.solver import make_state


class Recorder(Observer):
    def __init__(self):
        self.events = []

    def on_start(self, state, phase):
        self.events.append(("start", state.t))

    def on_step(self, prev, curr, phase, forcing):
        self.events.append(("step", curr.t - prev.t))

    def on_finish(self, state, phase, status):
        self.events.append(("finish", status))


@pytest.fixture
def zero_state(grid):
    return make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-3)


def phase():
    return PhaseState(delta=0.5, lam=10.0)


class TestRunTrajectory:
    def test_zero_data_completes_without_mu_growth(self, zero_state):
        result = run_trajectory(zero_state, phase(), 0.005)
        assert result.status == STATUS_COMPLETE
        assert result.steps == 5
        assert result.final.t == pytest.approx(0.005)
        assert result.phase.mu == 0.0
        assert len(result.phase.history) == 6

    def test_last_step_is_clipped_to_t_end(self, zero_state):
        recorder = Recorder()
        result = run_trajectory(zero_state, phase(), 0.0025, observers=[recorder])
        assert result.steps == 3
        assert result.final.t == pytest.approx(0.0025)
        assert recorder.events[0] == ("start", 0.0)
        assert recorder.events[3][1] == pytest.approx(0.0005)
        assert recorder.events[-1] == ("finish", STATUS_COMPLETE)

    def test_stops_at_t_star(self, zero_state):
        result = run_trajectory(zero_state, phase(), 1.0, rate=lambda state, w, ph: 20.0)
        assert result.status == STATUS_T_STAR
        assert result.steps == 3
        assert result.phase.t_star_reached

    def test_positivity_gate_aborts(self, grid):
        values = enforce_neumann_row(np.broadcast_to(-0.8 * np.exp(-(grid.y_nodes**2)), grid.shape), grid)
        state = make_state(grid.zeros(), grid.zeros().with_values(values), nu=0.0, theta_E=1.0, dt=1e-3)
        result = run_trajectory(state, phase(), 0.01)
        assert result.status == STATUS_ABORTED and result.aborted
        assert result.abort_time == 0.0
        assert result.steps == 0

    def test_floor_crossed_inside_a_step_aborts_at_its_end(self, grid, zero_state):
        cooling = grid.from_function(lambda X, Y: -100.0 * np.exp(-((Y - 3.0) ** 2)) + 0.0 * X)
        result = run_trajectory(
            zero_state, phase(), 0.05, dt_cap=0.01, forcing=lambda t: (grid.zeros(), cooling)
        )
        assert result.status == STATUS_ABORTED
        assert result.abort_time == pytest.approx(0.01)
        assert result.steps == 0

    def test_analyticity_deficit_stops_cleanly(self, zero_state):
        def failing_rate(state, w, ph):
            raise AnalyticityDeficitError("deficit", mode=7, xi=7.0)

        recorder = Recorder()
        result = run_trajectory(zero_state, phase(), 0.01, rate=failing_rate, observers=[recorder])
        assert result.status == STATUS_DEFICIT
        assert result.steps == 0
        assert recorder.events[-1] == ("finish", STATUS_DEFICIT)

    def test_untracked_mu(self, zero_state):
        result = run_trajectory(zero_state, phase(), 0.002, rate=None)
        assert result.phase.history == [(0.0, 0.0, 0.0)]


class TestConfigHelpers:
    def test_grid_and_data(self, small_config):
        grid = grid_from_config(small_config, N_y=32)
        assert grid.shape == (16, 32)
        data = data_from_config(small_config, grid)
        assert data.epsilon == pytest.approx(0.025)
        assert data.u0.max_abs() == pytest.approx(0.01)
        state = initial_state(data, nu=0.0, dt=1e-3)
        assert state.t == 0.0 and state.dt == 1e-3

    def test_zero_initial_data(self, small_config):
        small_config.physics.initial = "zero"
        data = data_from_config(small_config, grid_from_config(small_config))
        assert data.u0.max_abs() == 0.0 and data.theta0.max_abs() == 0.0


class TestJobs:
    def test_gather_runs_every_job(self):
        jobs = [(f"job_{i}", (lambda i=i: i * i)) for i in range(5)]
        results = asyncio.run(gather_jobs(jobs))
        assert results == {f"job_{i}": i * i for i in range(5)}

    def test_outcome_metrics_keep_numbers_only(self):
        outcome = ExperimentOutcome("PASS", {"ratio": 0.5, "steps": 3, "ok": True, "note": "x"})
        assert outcome.metrics() == {"ratio": 0.5, "steps": 3.0}
