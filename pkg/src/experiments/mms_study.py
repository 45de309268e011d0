"""Convergence of the stepper against a manufactured solution, in dy and in dt."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from core.exceptions import RunAbortedError
from core.run_config import RunConfig
from experiments.trajectory import ExperimentOutcome, Observer, gather_jobs, run_trajectory
from handlers.report_handler import ReportHandler
from processing.derived_equations import DerivedQuantity, derived_equation_residual, u_phi_residual
from processing.grid import Grid, enforce_neumann_row
from processing.manufactured import ManufacturedSolution
from processing.phase import PhaseState
from processing.solver import Forcing, SolveState, make_state

MMS_Y_MAX = 30.0
MMS_N_X = 16
BASE_INTERVALS = 240
MMS_T_END = 0.1
DT_PER_H2 = 0.05
TIME_STEPS = (0.02, 0.01, 0.005, 0.0025)
MIN_SPACE_ORDER = 1.8
MIN_TIME_ORDER = 0.9
# The d_y^2 equations need d_y^4 of the computed solution, a nested stencil that is
# one-sided at the rows next to the wall; their residuals are held to first order.
MIN_RESIDUAL_ORDERS = {
    "dy_u": MIN_SPACE_ORDER,
    "dy_theta": MIN_SPACE_ORDER,
    "dyy_u": 0.9,
    "dyy_theta": 0.9,
    "wall": MIN_SPACE_ORDER,
    "u_phi": MIN_SPACE_ORDER,
}


@dataclass
class MMSLevel:
    h: float
    dt: float
    err_u: float
    err_theta: float
    err_v: float
    u: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    residuals: Dict[str, float] = field(default_factory=dict)


class LastStep(Observer):
    def __init__(self):
        self.prev: Optional[SolveState] = None
        self.curr: Optional[SolveState] = None
        self.forcing: Optional[Forcing] = None

    def on_step(self, prev: SolveState, curr: SolveState, phase: PhaseState, forcing: Optional[Forcing]):
        self.prev, self.curr, self.forcing = prev, curr, forcing


def mms_grid(cfg: RunConfig, level: int) -> Grid:
    return Grid(
        L_x=cfg.grid.L_x,
        N_x=MMS_N_X,
        Y_max=MMS_Y_MAX,
        N_y=BASE_INTERVALS * 2**level + 1,
        fd_order=cfg.grid.fd_order,
        integration_rule=cfg.grid.integration_rule,
    )


def solve_manufactured(
    cfg: RunConfig, solution: ManufacturedSolution, grid: Grid, dt: float, T_end: float = MMS_T_END
) -> MMSLevel:
    u0, theta0 = solution.exact(grid, 0.0)
    theta0 = theta0.with_values(enforce_neumann_row(theta0.values, grid))
    state = make_state(u0, theta0, nu=solution.nu, theta_E=solution.theta_E, dt=dt, t=0.0)
    last = LastStep()
    result = run_trajectory(
        state,
        PhaseState(delta=cfg.physics.delta, lam=cfg.physics.lam),
        T_end,
        forcing=solution.forcing_callback(grid),
        observers=[last],
        rate=None,
        label=f"mms N_y={grid.N_y} dt={dt:g}",
    )
    if result.aborted:
        raise RunAbortedError(f"manufactured run aborted: {result.abort_reason}", t=result.abort_time)
    final = result.final
    u_exact, theta_exact = solution.exact(grid, final.t)
    residuals = {}
    if last.prev is not None:
        for which in DerivedQuantity:
            res = derived_equation_residual(last.prev, last.curr, which, last.forcing)
            residuals[which.value] = res.interior
            if res.boundary is not None:
                residuals["wall"] = res.boundary
        radius = result.phase.radius
        residuals["u_phi"] = u_phi_residual(
            last.prev, last.curr, radius, radius, result.phase.mu_dot, result.phase.lam, last.forcing
        )
    return MMSLevel(
        h=float(grid.dy_min),
        dt=dt,
        err_u=float(np.abs(final.u.values - u_exact.values).max()),
        err_theta=float(np.abs(final.theta.values - theta_exact.values).max()),
        err_v=float(np.abs(final.v.values - solution.exact_v(grid, final.t).values).max()),
        u=final.u.values,
        theta=final.theta.values,
        residuals=residuals,
    )


def observed_orders(errors: List[float]) -> List[float]:
    return [
        math.log2(coarse / fine) if coarse > 0 and fine > 0 else math.nan
        for coarse, fine in zip(errors, errors[1:])
    ]


def residual_orders(name: str, values: List[float]) -> Tuple[List[float], bool]:
    """Observed orders of one residual under dy refinement and whether they meet its bound."""
    orders = observed_orders(values)
    bound = MIN_RESIDUAL_ORDERS[name]
    decays = values[-1] < values[0] and all(order >= bound for order in orders)
    if not decays:
        logger.error(f"Residual of the {name} equation decays at orders {orders}, below {bound}: {values}.")
    return orders, decays


def _job(cfg, solution, grid, dt):
    return lambda: solve_manufactured(cfg, solution, grid, dt)


async def run_mms(cfg: RunConfig, report: ReportHandler) -> ExperimentOutcome:
    solution = ManufacturedSolution(L_x=cfg.grid.L_x, theta_E=cfg.physics.theta_E, nu=cfg.physics.nu)
    levels = cfg.experiment_params.mms_levels
    grids = [mms_grid(cfg, level) for level in range(levels)]

    space_jobs = [(f"dy_{g.N_y}", _job(cfg, solution, g, DT_PER_H2 * g.dy_min**2)) for g in grids]
    time_jobs = [(f"dt_{dt:g}", _job(cfg, solution, grids[-1], dt)) for dt in TIME_STEPS]
    results = await gather_jobs(space_jobs + time_jobs)
    space = [results[name] for name, _ in space_jobs]
    time = [results[name] for name, _ in time_jobs]

    space_errors = [max(level.err_u, level.err_theta) for level in space]
    space_orders = observed_orders(space_errors)
    self_diffs = [
        max(float(np.abs(a.u - b.u).max()), float(np.abs(a.theta - b.theta).max()))
        for a, b in zip(time, time[1:])
    ]
    time_orders = observed_orders(self_diffs)

    residual_names = [q.value for q in DerivedQuantity] + ["wall", "u_phi"]
    columns = ("study", "h", "dt", "err_u", "err_theta", "err_v", "self_difference") + tuple(
        f"res_{name}" for name in residual_names
    )
    rows = []
    for level in space:
        rows.append(("dy", level.h, level.dt, level.err_u, level.err_theta, level.err_v, "")
                    + tuple(level.residuals.get(name, "") for name in residual_names))
    for i, level in enumerate(time):
        diff = self_diffs[i] if i < len(self_diffs) else ""
        rows.append(("dt", level.h, level.dt, level.err_u, level.err_theta, level.err_v, diff)
                    + tuple(level.residuals.get(name, "") for name in residual_names))
    report.write_rows("mms.csv", columns, rows)

    summary: Dict[str, object] = {}
    for i, order in enumerate(space_orders):
        summary[f"space_order_{i}"] = order
    for i, order in enumerate(time_orders):
        summary[f"time_order_{i}"] = order
    residuals_ok = True
    for name in residual_names:
        values = [level.residuals.get(name) for level in space]
        if any(v is None for v in values):
            continue
        orders, decays = residual_orders(name, values)
        for i, order in enumerate(orders):
            summary[f"residual_order_{name}_{i}"] = order
        residuals_ok = residuals_ok and decays
    summary["finest_err_u"] = space[-1].err_u
    summary["finest_err_theta"] = space[-1].err_theta

    space_ok = all(order >= MIN_SPACE_ORDER for order in space_orders)
    time_ok = all(order >= MIN_TIME_ORDER for order in time_orders)
    if not space_ok:
        logger.error(f"Observed dy orders {space_orders} below {MIN_SPACE_ORDER}.")
    if not time_ok:
        logger.error(f"Observed dt orders {time_orders} below {MIN_TIME_ORDER}.")
    passed = space_ok and time_ok and residuals_ok
    return ExperimentOutcome("PASS" if passed else "FAIL", summary)
