import math
from typing import Dict, List, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import trapezoid

from core.run_config import RunConfig
from experiments.monitors import NU_LIMIT_NORMS, NormMonitor, StateRecorder
from experiments.trajectory import (
    ExperimentOutcome,
    data_from_config,
    gather_jobs,
    grid_from_config,
    initial_state,
    phase_from_config,
    run_trajectory,
)
from handlers.report_handler import ReportHandler
from processing.grid import Field, Grid, d_dx, d_dy

UNIFORMITY_FACTOR = 1.1


def window_h1_squared(grid: Grid, values: np.ndarray) -> float:
    """||f||^2 in H^1 over [0, L_x] x [0, Y_max / 2]."""
    f = Field(grid, values)
    mask = grid.y_nodes <= 0.5 * grid.Y_max
    density = values**2 + d_dx(f).values ** 2 + d_dy(f, 1).values ** 2
    column = density[:, mask].sum(axis=0) * grid.dx
    return float(trapezoid(column, x=grid.y_nodes[mask]))


def cauchy_difference(grid: Grid, first: StateRecorder, second: StateRecorder) -> float:
    """L^2(0, T; H^1(window)) distance of two recorded trajectories, left rectangle in time."""
    n = min(len(first.times), len(second.times))
    total = 0.0
    for i in range(n - 1):
        dt = first.times[i + 1] - first.times[i]
        total += dt * (
            window_h1_squared(grid, first.u[i] - second.u[i])
            + window_h1_squared(grid, first.theta[i] - second.theta[i])
        )
    return math.sqrt(total)


def _nu_job(cfg: RunConfig, grid: Grid, data, nu: float):
    def job() -> Tuple[str, float, StateRecorder]:
        monitor = NormMonitor(
            grid,
            NU_LIMIT_NORMS,
            radius_of=lambda phase: phase.shifted_radius(0.5),
            norm_every=cfg.output.norm_every,
        )
        recorder = StateRecorder()
        result = run_trajectory(
            initial_state(data, nu, cfg.time.dt),
            phase_from_config(cfg),
            cfg.time.T_end,
            dt_policy="fixed",
            observers=[monitor, recorder],
            label=f"nu={nu:g}",
        )
        return result.status, sum(monitor.values().values()), recorder

    return job


async def run_viscosity_limit(cfg: RunConfig, report: ReportHandler) -> ExperimentOutcome:
    """Bounds uniform in nu under the halved phase, and Cauchy behaviour as nu -> 0."""
    grid = grid_from_config(cfg)
    data = data_from_config(cfg, grid)
    nus = sorted(set(cfg.experiment_params.nus), reverse=True)
    if len(nus) < 2:
        logger.error("The viscosity-limit experiment needs at least two viscosities.")
        return ExperimentOutcome("FAIL", {"nus": len(nus)})
    if cfg.time.dt_policy != "fixed":
        logger.warning("Trajectories are compared step by step; using the fixed dt policy.")
    results = await gather_jobs([(f"nu_{nu:g}", _nu_job(cfg, grid, data, nu)) for nu in nus])
    ordered = [results[f"nu_{nu:g}"] for nu in nus]
    if any(status == "aborted" for status, _, _ in ordered):
        return ExperimentOutcome("ABORTED", {"nus": len(nus)})

    bounds = [bound for _, bound, _ in ordered]
    differences: List[float] = [
        cauchy_difference(grid, ordered[i][2], ordered[i + 1][2]) for i in range(len(nus) - 1)
    ]
    rows = [(nus[0], bounds[0], "")]
    rows.extend((nus[i + 1], bounds[i + 1], differences[i]) for i in range(len(differences)))
    report.write_rows("nu_limit.csv", ("nu", "uniform_bound", "cauchy_difference"), rows)

    spread = max(bounds) / min(bounds) if min(bounds) > 0 else (1.0 if max(bounds) == 0 else math.inf)
    uniform = spread <= UNIFORMITY_FACTOR
    decreasing = all(later < earlier for earlier, later in zip(differences, differences[1:]))
    summary: Dict[str, object] = {
        "bound_spread": spread,
        "bound_max": max(bounds),
        "bound_min": min(bounds),
        "cauchy_decreasing": decreasing,
    }
    for nu, bound in zip(nus, bounds):
        summary[f"uniform_bound_nu_{nu:g}"] = bound
    for i, diff in enumerate(differences):
        summary[f"cauchy_{nus[i]:g}_{nus[i + 1]:g}"] = diff
    if not uniform:
        logger.error(f"Bounds vary by a factor {spread:.4g} across nu (allowed {UNIFORMITY_FACTOR}).")
    if not decreasing:
        logger.error(f"Successive differences do not decrease: {differences}.")
    return ExperimentOutcome("PASS" if uniform and decreasing else "FAIL", summary)
