import math
from dataclasses import replace

import numpy as np
import pytest

from experiments.monitors import (
    APRIORI_NORMS,
    INF,
    AprioriMonitor,
    NormMonitor,
    NormSpec,
    RadiusAudit,
    SnapshotWriter,
    StateRecorder,
)
from experiments.trajectory import run_trajectory
from processing.grid import enforce_neumann_row
from processing.lpaley import WeightProfile
from processing.phase import PhasedSpectra, PhaseState
from processing.solver import make_state
from tools.snapshot_io import read_snapshot


@pytest.fixture
def state(grid):
    u = grid.from_function(lambda X, Y: 0.01 * np.sin(2 * X) * Y * np.exp(-(Y**2)))
    theta = grid.from_function(lambda X, Y: 0.01 * np.cos(X) * np.exp(-(Y**2)))
    theta = theta.with_values(enforce_neumann_row(theta.values, grid))
    return make_state(u, theta, nu=0.0, theta_E=1.0, dt=0.1)


def block_values(state, radius=0.5):
    w = WeightProfile.for_grid(state.grid, state.theta_E, state.t)
    return PhasedSpectra(state.stacks, w, radius).u.blockwise(1)


class TestNormMonitor:
    SPECS = (
        NormSpec("u_phi", "u", 1.0, 1, INF),
        NormSpec("u_phi", "u", 1.0, 1, 2),
        NormSpec("u_phi", "u", 1.0, 1, 2, density="mu"),
    )

    def test_left_rectangle_and_running_sup(self, grid, state):
        ph = PhaseState(delta=0.5, lam=10.0, mu_dot=2.0)
        later = replace(state, t=0.1)
        last = replace(state, t=0.25)
        monitor = NormMonitor(grid, self.SPECS)
        monitor.on_start(state, ph)
        monitor.on_step(state, later, ph, None)
        monitor.on_step(later, last, ph, None)
        monitor.on_finish(last, ph, "complete")

        scales = monitor.partition.scales(1.0)
        b0, b1, b2 = block_values(state), block_values(later), block_values(last)
        sup = scales @ np.maximum(np.maximum(b0, b1), b2).sum(axis=1)
        l2 = scales @ np.sqrt(0.1 * b0**2 + 0.15 * b1**2).sum(axis=1)
        values = monitor.values()
        assert values["u_phi:B1,1w_Linf"] == pytest.approx(sup, rel=1e-12)
        assert values["u_phi:B1,1w_L2"] == pytest.approx(l2, rel=1e-12)
        assert values["u_phi:B1,1w_L2mu"] == pytest.approx(math.sqrt(2.0) * l2, rel=1e-12)
        # weights shrink in time, so the sup sits at t = 0
        assert values["u_phi:B1,1w_Linf"] == pytest.approx(scales @ b0.sum(axis=1), rel=1e-12)
        assert len(monitor.rows) == 3 * len(self.SPECS)

    def test_recording_interval(self, grid, state):
        ph = PhaseState(delta=0.5, lam=10.0)
        monitor = NormMonitor(grid, self.SPECS[:1], norm_every=2)
        monitor.on_start(state, ph)
        for i in range(3):
            monitor.on_step(replace(state, t=0.1 * i), replace(state, t=0.1 * (i + 1)), ph, None)
        monitor.on_finish(replace(state, t=0.3), ph, "complete")
        assert [row[0] for row in monitor.rows] == pytest.approx([0.0, 0.2, 0.3])

    def test_shifted_radius(self, grid, state):
        ph = PhaseState(delta=0.5, lam=10.0)
        full = NormMonitor(grid, self.SPECS[:1])
        half = NormMonitor(grid, self.SPECS[:1], radius_of=lambda p: p.shifted_radius(0.5))
        full.on_start(state, ph)
        half.on_start(state, ph)
        assert half.value("u_phi:B1,1w_Linf") < full.value("u_phi:B1,1w_Linf")


class TestAprioriMonitor:
    def test_lhs_combines_sixteen_norms(self, grid, state):
        monitor = AprioriMonitor(grid, lam=4.0, data_norm=2.0, epsilon=0.01)
        ph = PhaseState(delta=0.5, lam=4.0, mu_dot=0.5)
        monitor.on_start(state, ph)
        monitor.on_step(state, replace(state, t=0.1), ph, None)
        values = [acc.value() for acc in monitor.accumulators[: len(APRIORI_NORMS)]]
        assert monitor.lhs() == pytest.approx(sum(values[:8]) + 2.0 * sum(values[8:]))
        assert monitor.ratio() == pytest.approx(monitor.lhs() / 2.0)
        assert monitor.ratio_rows[-1][2] == 2.0

    def test_consistency_ratios_are_bounded(self, grid, state):
        monitor = AprioriMonitor(grid, lam=10.0, data_norm=1.0, epsilon=0.01)
        result = run_trajectory(state, PhaseState(delta=0.5, lam=0.1), 0.3, observers=[monitor])
        assert result.steps == 3
        ratios = monitor.consistency_ratios()
        assert 0.0 < ratios["mu_linear_consistency"] <= 1.0 + 1e-10
        assert 0.0 < ratios["mu_quadratic_consistency"] <= 1.0 + 1e-10

    def test_zero_data_norm(self, grid, state):
        monitor = AprioriMonitor(grid, lam=10.0, data_norm=0.0, epsilon=0.0)
        monitor.on_start(state, PhaseState(delta=0.5, lam=10.0))
        assert monitor.ratio() == 0.0
        assert monitor.smallness_ratio() == 0.0


class TestOtherObservers:
    def test_snapshots(self, grid, state, tmp_path):
        writer = SnapshotWriter(tmp_path, every=2)
        run_trajectory(state, PhaseState(delta=0.5, lam=10.0), 0.4, observers=[writer], rate=None)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [
            "theta_000000.bin",
            "theta_000002.bin",
            "theta_000004.bin",
            "u_000000.bin",
            "u_000002.bin",
            "u_000004.bin",
        ]
        assert read_snapshot(tmp_path / "u_000002.bin", grid).t == pytest.approx(0.2)

    def test_state_recorder(self, grid, state):
        recorder = StateRecorder()
        run_trajectory(state, PhaseState(delta=0.5, lam=10.0), 0.2, observers=[recorder], rate=None)
        assert recorder.times == pytest.approx([0.0, 0.1, 0.2])
        assert len(recorder.u) == len(recorder.theta) == len(recorder.mu) == 3

    def test_radius_audit_skips_band_limited_states(self, grid, state):
        audit = RadiusAudit()
        run_trajectory(state, PhaseState(delta=0.5, lam=10.0), 0.1, observers=[audit], rate=None)
        assert audit.skipped >= 1
        assert audit.skipped + len(audit.rows) >= 2
