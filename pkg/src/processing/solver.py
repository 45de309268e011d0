"""IMEX time stepping of the regularized boundary-layer system.

    d_t u + u d_x u + v d_y u = nu d_x^2 u + (theta + theta_E) d_y^2 u + F_u
    d_t theta + u d_x theta + v d_y theta = nu d_x^2 theta + (theta + theta_E) d_y^2 theta
                                            + (theta + theta_E) (d_y u)^2 + F_theta
    v = -int_0^y d_x u + int_0^y (d_y u)^2 + d_y theta

with u = v = d_y theta = 0 at the wall and u = theta = 0 at Y_max.
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.fft
from loguru import logger
from scipy.linalg import solve_banded

from core import config
from core.exceptions import BlowUpError, CompatibilityError, TemperatureFloorError
from processing.grid import (
    Field,
    Grid,
    cumulative_integral_y,
    d_dx,
    d_dy,
    dealiased_product,
)
from processing.phase import SpectralStacks

WALL_COMPATIBILITY_TOLERANCE = 1e-8

Forcing = Tuple[Field, Field]


def recover_v(u: Field, theta: Field, rule: Optional[str] = None) -> Field:
    dtheta = d_dy(theta, 1)
    wall = float(np.abs(dtheta.values[:, 0]).max())
    if wall > WALL_COMPATIBILITY_TOLERANCE:
        logger.error(f"d_y theta at the wall is {wall:.3e} at t={theta.t}.")
        raise CompatibilityError(
            f"d_y theta|_(y=0) = {wall:.3e} exceeds {WALL_COMPATIBILITY_TOLERANCE:.0e}"
        )
    du = d_dy(u, 1)
    transport = cumulative_integral_y(d_dx(u), rule)
    production = cumulative_integral_y(dealiased_product(du, du), rule)
    return dtheta.with_values(production.values - transport.values + dtheta.values)


@dataclass(frozen=True, eq=False)
class SolveState:
    u: Field
    theta: Field
    v: Field
    t: float
    nu: float
    theta_E: float
    dt: float
    step_index: int = 0

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @cached_property
    def stacks(self) -> SpectralStacks:
        return SpectralStacks(self.u, self.theta)

    @cached_property
    def derivatives(self) -> Dict[str, Field]:
        """y-derivatives of u and theta up to order 3, keyed like 'u_y', 'theta_yyy'."""
        out = {}
        for name, f in (("u", self.u), ("theta", self.theta)):
            for order in (1, 2, 3):
                out[f"{name}_{'y' * order}"] = d_dy(f, order)
        return out

    def temperature_floor(self) -> float:
        return float((self.theta.values + self.theta_E).min())


def make_state(
    u: Field,
    theta: Field,
    nu: float,
    theta_E: float,
    dt: float,
    t: Optional[float] = None,
    step_index: int = 0,
) -> SolveState:
    t = u.t if t is None else t
    u, theta = u.with_values(u.values, t), theta.with_values(theta.values, t)
    return SolveState(u, theta, recover_v(u, theta), t, nu, theta_E, dt, step_index)


def check_positivity(theta: Field, theta_E: float, t: float):
    floor = float((theta.values + theta_E).min())
    if floor < 0.5 * theta_E:
        logger.critical(
            f"Temperature floor breached at t={t:.6g}: min(theta + theta_E) = {floor:.6g} "
            f"< theta_E/2 = {0.5 * theta_E:.6g}."
        )
        raise TemperatureFloorError(f"temperature floor breached at t={t:.6g}", t=t)


class ImplicitDiffusion:
    """Backward-Euler solve of (I - dt c(y) D2) q = rhs per x-column in banded form."""

    def __init__(self, grid: Grid, neumann_wall: bool):
        self.grid = grid
        self.neumann_wall = neumann_wall
        n = grid.N_y
        D2 = grid.derivative_matrix(2).tocoo()
        wall_row = grid.derivative_matrix(1).getrow(0).tocoo()
        offsets = D2.col - D2.row
        lower = int(max(0, -offsets.min()))
        upper = int(max(0, offsets.max(), wall_row.col.max() if neumann_wall else 0))
        self.bands = (lower, upper)
        self.d2_banded = np.zeros((lower + upper + 1, n))
        self.d2_banded[upper + D2.row - D2.col, D2.col] = D2.data
        band_rows = np.arange(lower + upper + 1)[:, None]
        self.row_of = np.clip(band_rows - upper + np.arange(n)[None, :], 0, n - 1)
        self.identity = np.zeros_like(self.d2_banded)
        self.identity[upper, :] = 1.0
        self.wall_row = wall_row

    def _system(self, coefficient: np.ndarray, dt: float) -> np.ndarray:
        lower, upper = self.bands
        n = self.grid.N_y
        ab = self.identity - dt * coefficient[self.row_of] * self.d2_banded
        for j in range(0, min(n, upper + 1)):
            ab[upper - j, j] = 0.0
        for j in range(max(0, n - 1 - lower), n):
            ab[upper + (n - 1) - j, j] = 0.0
        if self.neumann_wall:
            for j, value in zip(self.wall_row.col, self.wall_row.data):
                ab[upper - j, j] = value
        else:
            ab[upper, 0] = 1.0
        ab[upper, n - 1] = 1.0
        return ab

    def solve(self, rhs: np.ndarray, coefficient: np.ndarray, dt: float) -> np.ndarray:
        out = np.empty_like(rhs)
        for i in range(rhs.shape[0]):
            b = np.array(rhs[i], dtype=float)
            b[0] = 0.0
            b[-1] = 0.0
            out[i] = solve_banded(self.bands, self._system(coefficient[i], dt), b)
        return out


class Stepper:
    """Holds the per-grid implicit operators; step() is the public entry point."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.velocity_solver = ImplicitDiffusion(grid, neumann_wall=False)
        self.temperature_solver = ImplicitDiffusion(grid, neumann_wall=True)

    def step(
        self, state: SolveState, forcing: Optional[Forcing] = None, dt: Optional[float] = None
    ) -> SolveState:
        dt = state.dt if dt is None else dt
        if dt <= 0:
            raise ValueError(f"dt must be positive (got {dt})")
        u, theta, v = state.u, state.theta, state.v
        check_positivity(theta, state.theta_E, state.t)

        c = theta.values + state.theta_E
        u_y = state.derivatives["u_y"]
        theta_y = state.derivatives["theta_y"]
        c_field = theta.with_values(c)

        u_rhs = -dealiased_product(u, d_dx(u)).values - dealiased_product(v, u_y).values
        theta_rhs = (
            -dealiased_product(u, d_dx(theta)).values
            - dealiased_product(v, theta_y).values
            + dealiased_product(c_field, u_y, u_y).values
        )
        if forcing is not None:
            u_rhs = u_rhs + forcing[0].values
            theta_rhs = theta_rhs + forcing[1].values

        u_star = u.values + dt * u_rhs
        theta_star = theta.values + dt * theta_rhs
        u_new = self.velocity_solver.solve(u_star, c, dt)
        theta_new = self.temperature_solver.solve(theta_star, c, dt)
        if state.nu > 0:
            u_new = tangential_heat_solve(u_new, self.grid, state.nu, dt)
            theta_new = tangential_heat_solve(theta_new, self.grid, state.nu, dt)

        t_new = state.t + dt
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(theta_new))):
            logger.critical(f"Non-finite values after the step to t={t_new:.6g}.")
            raise BlowUpError(f"blow-up suspected at t={t_new:.6g}: NaN or Inf", t=t_new)
        peak = float(np.abs(u_new).max())
        if peak > config.BLOW_UP_THRESHOLD:
            logger.critical(f"max|u| = {peak:.3e} after the step to t={t_new:.6g}.")
            raise BlowUpError(f"blow-up suspected at t={t_new:.6g}: max|u| = {peak:.3e}", t=t_new)

        u_field = Field(self.grid, u_new, t_new)
        theta_field = Field(self.grid, theta_new, t_new)
        check_positivity(theta_field, state.theta_E, t_new)
        return replace(
            state,
            u=u_field,
            theta=theta_field,
            v=recover_v(u_field, theta_field),
            t=t_new,
            dt=dt,
            step_index=state.step_index + 1,
        )


def tangential_heat_solve(values: np.ndarray, grid: Grid, nu: float, dt: float) -> np.ndarray:
    coeffs = scipy.fft.fft(values, axis=0) / (1.0 + dt * nu * grid.xi**2)[:, None]
    return scipy.fft.ifft(coeffs, axis=0).real


STEPPER_CACHE_SIZE = 8


@lru_cache(maxsize=STEPPER_CACHE_SIZE)
def stepper_for(grid: Grid) -> Stepper:
    return Stepper(grid)


def step(state: SolveState, forcing: Optional[Forcing] = None) -> SolveState:
    return stepper_for(state.grid).step(state, forcing)


def choose_dt(state: SolveState, policy: str, dt_cap: float, safety: float = 0.4) -> float:
    """Step size under the 'fixed' or 'cfl' policy."""
    if policy == "fixed":
        return dt_cap
    if policy != "cfl":
        raise ValueError(f"unknown dt policy '{policy}'")
    grid = state.grid
    candidates = [dt_cap]
    u_max = state.u.max_abs()
    v_max = state.v.max_abs()
    if u_max > 0:
        candidates.append(safety * grid.dx / u_max)
    if v_max > 0:
        candidates.append(safety * grid.dy_min / v_max)
    shear = state.derivatives["u_y"].max_abs()
    candidates.append(safety * 2.0 * grid.dy_min**2 / (state.theta_E * max(1.0, shear**2)))
    dt = min(candidates)
    if dt < dt_cap:
        logger.debug(f"CFL policy reduced dt to {dt:.3e} at t={state.t:.6g}.")
    return dt


def heat_decay_factor(theta_E: float, wavenumber: float, T: float) -> float:
    return math.exp(-theta_E * wavenumber**2 * T)
