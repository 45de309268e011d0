import asyncio
from typing import Any, Dict, Tuple

from loguru import logger

from core.run_config import RunConfig
from experiments.monitors import AprioriMonitor, SnapshotWriter
from experiments.trajectory import (
    ExperimentOutcome,
    TrajectoryResult,
    data_from_config,
    grid_from_config,
    initial_state,
    phase_from_config,
    run_trajectory,
)
from handlers.report_handler import ReportHandler
from processing.grid import Grid
from processing.initial_data import InitialData
from processing.phase import smallness_horizon


def simulate(
    cfg: RunConfig, grid: Grid, data: InitialData, report: ReportHandler, label: str
) -> Tuple[TrajectoryResult, AprioriMonitor]:
    """One mu-tracked trajectory with its norm ledger; writes norms.csv and mu.csv."""
    monitor = AprioriMonitor(
        grid, cfg.physics.lam, data.data_norm(), data.epsilon, norm_every=cfg.output.norm_every
    )
    observers = [monitor]
    if cfg.output.snapshot_every > 0:
        observers.append(SnapshotWriter(report.directory / "snapshots", cfg.output.snapshot_every))
    result = run_trajectory(
        initial_state(data, cfg.physics.nu, cfg.time.dt),
        phase_from_config(cfg),
        cfg.time.T_end,
        dt_policy=cfg.time.dt_policy,
        safety=cfg.time.safety,
        observers=observers,
        label=label,
    )
    report.write_rows("norms.csv", ("t", "norm_name", "value"), monitor.rows)
    report.write_rows("mu.csv", ("t", "mu", "mu_dot"), result.phase.history)
    return result, monitor


def trajectory_summary(result: TrajectoryResult, monitor: AprioriMonitor) -> Dict[str, Any]:
    summary = {
        "trajectory_status": result.status,
        "steps": result.steps,
        "t_final": result.final.t,
        "mu_final": result.phase.mu,
        "radius_final": result.phase.radius,
        "t_star_reached": result.phase.t_star_reached,
        "min_temperature": result.final.temperature_floor(),
        "lhs": monitor.lhs(),
        "rhs": monitor.data_norm,
        "smallness_ratio": monitor.smallness_ratio(),
    }
    if result.abort_reason:
        summary["abort_reason"] = result.abort_reason
        summary["abort_time"] = result.abort_time
    summary.update(monitor.values())
    return summary


async def run_simulation(cfg: RunConfig, report: ReportHandler) -> ExperimentOutcome:
    grid = grid_from_config(cfg)
    data = data_from_config(cfg, grid)
    horizon = smallness_horizon(data.epsilon, data.theta_E)
    if 1.0 + cfg.time.T_end > horizon:
        logger.info(
            f"T_end={cfg.time.T_end:g} is past the smallness horizon <t> <= {horizon:.4g} "
            f"for epsilon={data.epsilon:g}."
        )
    result, monitor = await asyncio.to_thread(simulate, cfg, grid, data, report, "run")
    summary = trajectory_summary(result, monitor)
    summary["smallness_horizon"] = horizon
    return ExperimentOutcome("ABORTED" if result.aborted else "COMPLETE", summary)
