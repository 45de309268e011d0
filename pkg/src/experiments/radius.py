import asyncio

from loguru import logger

from core.run_config import RunConfig
from experiments.monitors import RadiusAudit
from experiments.trajectory import (
    ExperimentOutcome,
    data_from_config,
    grid_from_config,
    initial_state,
    phase_from_config,
    run_trajectory,
)
from handlers.report_handler import ReportHandler


async def run_radius(cfg: RunConfig, report: ReportHandler) -> ExperimentOutcome:
    """Measured spectral decay rate against the predicted radius delta - lambda mu(t)."""
    grid = grid_from_config(cfg)
    data = data_from_config(cfg, grid)
    audit = RadiusAudit(every=cfg.output.norm_every)
    result = await asyncio.to_thread(
        run_trajectory,
        initial_state(data, cfg.physics.nu, cfg.time.dt),
        phase_from_config(cfg),
        cfg.time.T_end,
        dt_policy=cfg.time.dt_policy,
        safety=cfg.time.safety,
        observers=[audit],
        label="radius",
    )
    report.write_rows(
        "radius.csv", ("t", "predicted", "measured_u", "measured_theta", "measured"), audit.rows
    )
    report.write_rows("spectrum.csv", ("t", "field", "abs_xi", "amplitude"), audit.spectra)
    report.write_rows("mu.csv", ("t", "mu", "mu_dot"), result.phase.history)

    tolerance = cfg.radius_tolerance
    margin = audit.worst_margin()
    summary = {
        "trajectory_status": result.status,
        "samples": len(audit.rows),
        "skipped_samples": audit.skipped,
        "tolerance": tolerance,
        "worst_margin": margin,
        "mu_final": result.phase.mu,
        "radius_final": result.phase.radius,
    }
    if result.aborted:
        summary["abort_reason"] = result.abort_reason
        return ExperimentOutcome("ABORTED", summary)
    if not audit.rows:
        logger.error("No resolved spectrum sample; the radius audit has nothing to compare.")
        return ExperimentOutcome("FAIL", summary)
    passed = margin >= -tolerance
    if not passed:
        logger.error(
            f"Measured radius falls below the prediction by {-margin:.4g} (tolerance {tolerance:.4g})."
        )
    return ExperimentOutcome("PASS" if passed else "FAIL", summary)
