import asyncio
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

from loguru import logger

from core import config
from core.exceptions import AnalyticityDeficitError, RunAbortedError
from core.run_config import RunConfig
from processing.grid import Grid
from processing.initial_data import InitialData, make_initial_data, zero_data
from processing.lpaley import WeightProfile
from processing.phase import PhaseState, advance_mu, mu_rhs
from processing.solver import Forcing, SolveState, choose_dt, make_state, stepper_for

STATUS_COMPLETE = "complete"
STATUS_T_STAR = "t_star"
STATUS_ABORTED = "aborted"
STATUS_DEFICIT = "analyticity_deficit"

RateFunction = Callable[[SolveState, WeightProfile, PhaseState], float]


class Observer:
    """Hooks called by the run loop; subclasses override what they need."""

    def on_start(self, state: SolveState, phase: PhaseState):
        pass

    def on_step(self, prev: SolveState, curr: SolveState, phase: PhaseState, forcing: Optional[Forcing]):
        pass

    def on_finish(self, state: SolveState, phase: PhaseState, status: str):
        pass


@dataclass
class TrajectoryResult:
    status: str
    final: SolveState
    phase: PhaseState
    steps: int
    abort_reason: Optional[str] = None
    abort_time: Optional[float] = None

    @property
    def aborted(self) -> bool:
        return self.status == STATUS_ABORTED


@dataclass
class ExperimentOutcome:
    """What an experiment hands back to the orchestrator."""

    status: str  # PASS, FAIL, ABORTED or COMPLETE
    summary: Dict[str, Any] = field(default_factory=dict)

    def metrics(self) -> Dict[str, float]:
        return {
            k: float(v)
            for k, v in self.summary.items()
            if isinstance(v, (int, float)) and not isinstance(v, bool)
        }


def grid_from_config(cfg: RunConfig, **overrides) -> Grid:
    params = dict(
        L_x=cfg.grid.L_x,
        N_x=cfg.grid.N_x,
        Y_max=cfg.y_max,
        N_y=cfg.grid.N_y,
        y_stretch=cfg.grid.y_stretch,
        fd_order=cfg.grid.fd_order,
        integration_rule=cfg.grid.integration_rule,
    )
    params.update(overrides)
    return Grid(**params)


def data_from_config(
    cfg: RunConfig, grid: Grid, epsilon: Optional[float] = None, seed: Optional[int] = None
) -> InitialData:
    p = cfg.physics
    if p.initial == "zero":
        return zero_data(grid, p.delta, p.theta_E)
    return make_initial_data(
        grid,
        delta=p.delta,
        epsilon=cfg.epsilon if epsilon is None else epsilon,
        theta_E=p.theta_E,
        seed=p.seed if seed is None else seed,
        u_scale=p.u_scale,
        n_modes=cfg.n_modes,
        enforce_smallness=p.enforce_smallness,
    )


def initial_state(data: InitialData, nu: float, dt: float) -> SolveState:
    return make_state(data.u0, data.theta0, nu=nu, theta_E=data.theta_E, dt=dt, t=0.0)


def run_trajectory(
    state: SolveState,
    phase: PhaseState,
    T_end: float,
    dt_policy: str = "fixed",
    dt_cap: Optional[float] = None,
    safety: float = 0.4,
    forcing: Optional[Callable[[float], Forcing]] = None,
    observers: Sequence[Observer] = (),
    rate: Optional[RateFunction] = mu_rhs,
    label: str = "trajectory",
) -> TrajectoryResult:
    """Advances state to T_end, updating mu with rate (None disables mu tracking).

    Stops early when T* is reached, when the run aborts at the positivity gate
    or on blow-up, and when the phase can no longer be applied.
    """
    dt_cap = state.dt if dt_cap is None else dt_cap
    stepper = stepper_for(state.grid)
    for obs in observers:
        obs.on_start(state, phase)
    steps = 0
    status = STATUS_COMPLETE
    abort_reason, abort_time = None, None
    logger.info(f"[{label}] integrating to T={T_end:g} (dt policy '{dt_policy}', cap {dt_cap:g}).")

    while state.t < T_end * (1.0 - 1e-12):
        dt = min(choose_dt(state, dt_policy, dt_cap, safety), T_end - state.t)
        f = forcing(state.t) if forcing is not None else None
        rhs = 0.0
        if rate is not None:
            try:
                rhs = rate(state, WeightProfile.for_grid(state.grid, state.theta_E, state.t), phase)
            except AnalyticityDeficitError as e:
                logger.warning(f"[{label}] {e} at t={state.t:.6g}; stopping the trajectory.")
                status, abort_reason, abort_time = STATUS_DEFICIT, str(e), state.t
                break
        try:
            new_state = stepper.step(state, f, dt)
        except RunAbortedError as e:
            logger.critical(f"[{label}] run aborted: {e}")
            status, abort_reason, abort_time = STATUS_ABORTED, str(e), e.t
            break
        if rate is not None:
            phase = advance_mu(phase, rhs, dt)
        for obs in observers:
            obs.on_step(state, new_state, phase, f)
        state = new_state
        steps += 1
        if steps % 50 == 0:
            logger.debug(f"[{label}] step {steps}, t={state.t:.6g}, mu={phase.mu:.4e}.")
        if phase.t_star_reached:
            status = STATUS_T_STAR
            break

    for obs in observers:
        obs.on_finish(state, phase, status)
    logger.info(f"[{label}] finished with status '{status}' after {steps} steps at t={state.t:.6g}.")
    return TrajectoryResult(status, state, phase, steps, abort_reason, abort_time)


def phase_from_config(cfg: RunConfig) -> PhaseState:
    return PhaseState(delta=cfg.physics.delta, lam=cfg.physics.lam)


async def gather_jobs(jobs: Sequence[Tuple[str, Callable[[], Any]]]) -> Dict[str, Any]:
    """Runs blocking jobs in worker threads, at most BLGV_THREADS at a time."""
    semaphore = asyncio.Semaphore(config.THREADS)

    async def run(name: str, job: Callable[[], Any]):
        async with semaphore:
            logger.info(f"Job '{name}' started.")
            result = await asyncio.to_thread(job)
            logger.info(f"Job '{name}' finished.")
            return name, result

    results = await asyncio.gather(*(run(name, job) for name, job in jobs))
    return dict(results)
