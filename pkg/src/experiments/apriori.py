import asyncio
from typing import Dict

from loguru import logger

from core.run_config import RunConfig
from experiments.simulation import simulate, trajectory_summary
from experiments.trajectory import (
    STATUS_COMPLETE,
    ExperimentOutcome,
    data_from_config,
    gather_jobs,
    grid_from_config,
)
from handlers.report_handler import ReportHandler
from utils.state_manager import compare_with_baseline

CONSISTENCY_SLACK = 1e-10
SMALLNESS_SPREAD = 2.0


def _smallness_job(cfg: RunConfig, grid, epsilon: float, report: ReportHandler, label: str):
    def job() -> Dict[str, float]:
        data = data_from_config(cfg, grid, epsilon=epsilon)
        result, monitor = simulate(cfg, grid, data, report, label)
        return {
            "epsilon": epsilon,
            "smallness_ratio": monitor.smallness_ratio(),
            "status": result.status,
        }

    return job


async def run_apriori(cfg: RunConfig, report: ReportHandler) -> ExperimentOutcome:
    """Checks the a priori estimate along the canonical trajectory and the smallness of theta."""
    grid = grid_from_config(cfg)
    data = data_from_config(cfg, grid)
    result, monitor = await asyncio.to_thread(simulate, cfg, grid, data, report, "apriori")

    report.write_rows("apriori.csv", ("t", "lhs", "rhs", "ratio"), monitor.ratio_rows)
    summary = trajectory_summary(result, monitor)
    max_ratio = max(row[3] for row in monitor.ratio_rows)
    summary["max_ratio"] = max_ratio
    consistency = monitor.consistency_ratios()
    summary.update(consistency)
    consistent = all(value <= 1.0 + CONSISTENCY_SLACK for value in consistency.values())
    if not consistent:
        logger.error(f"mu-rate consistency ratios exceed 1: {consistency}.")

    baseline = compare_with_baseline(f"apriori:{cfg.fingerprint()}:max_ratio", max_ratio)
    summary["baseline_ratio"] = baseline["recorded"]
    summary["baseline_deviation"] = baseline["deviation"]
    summary["baseline_first_release"] = baseline["first_release"]

    jobs = []
    if cfg.physics.initial != "zero":
        for fraction in cfg.experiment_params.smallness_fractions:
            epsilon = fraction * cfg.physics.theta_E
            name = f"eps_{fraction:g}"
            jobs.append((name, _smallness_job(cfg, grid, epsilon, ReportHandler.for_job(report, name), name)))
    sweep = await gather_jobs(jobs)
    constants = [entry["smallness_ratio"] for entry in sweep.values() if entry["smallness_ratio"] > 0]
    spread = max(constants) / min(constants) if constants else 1.0
    for name, entry in sweep.items():
        summary[f"smallness_constant_{name}"] = entry["smallness_ratio"]
    summary["smallness_spread"] = spread
    uniform = spread <= SMALLNESS_SPREAD
    if not uniform:
        logger.error(f"sup theta_phi / epsilon varies by a factor {spread:.3g} across epsilon.")

    if result.aborted or any(entry["status"] == "aborted" for entry in sweep.values()):
        return ExperimentOutcome("ABORTED", summary)
    passed = result.status == STATUS_COMPLETE and baseline["passed"] and consistent and uniform
    logger.info(f"A priori check: max lhs/rhs = {max_ratio:.4g}, {'PASS' if passed else 'FAIL'}.")
    return ExperimentOutcome("PASS" if passed else "FAIL", summary)
