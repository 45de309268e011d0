import math

import numpy as np
import pytest

from core.exceptions import CompatibilityError, TemperatureFloorError
from processing.grid import Grid, enforce_neumann_row
from processing.solver import (
    STEPPER_CACHE_SIZE,
    choose_dt,
    heat_decay_factor,
    make_state,
    recover_v,
    step,
    stepper_for,
    tangential_heat_solve,
)


@pytest.fixture
def fine_grid():
    return Grid(L_x=2.0 * math.pi, N_x=16, Y_max=10.0, N_y=257)


class TestRecoverV:
    def test_shear_production_of_x_independent_profile(self, fine_grid):
        a = 0.3
        u = fine_grid.from_function(lambda X, Y: a * Y * np.exp(-(Y**2)) + 0.0 * X)
        v = recover_v(u, fine_grid.zeros())
        # int_0^inf ((1 - 2y^2) e^{-y^2})^2 dy = 3/8 sqrt(pi/2)
        expected = a**2 * 0.375 * math.sqrt(math.pi / 2.0)
        np.testing.assert_allclose(v.values[:, -1], expected, rtol=1e-4)
        assert np.abs(v.values[:, 0]).max() == 0.0

    def test_transport_term_dominates_small_data(self, fine_grid):
        a = 1e-3
        u = fine_grid.from_function(lambda X, Y: a * np.sin(X) * Y * np.exp(-(Y**2)))
        v = recover_v(u, fine_grid.zeros())
        expected = fine_grid.from_function(lambda X, Y: -a * np.cos(X) * (1.0 - np.exp(-(Y**2))) / 2.0)
        np.testing.assert_allclose(v.values, expected.values, atol=1e-6)

    def test_wall_flux_of_theta_is_rejected(self, grid):
        theta = grid.from_function(lambda X, Y: 0.1 * np.cos(X) * Y * np.exp(-(Y**2)))
        with pytest.raises(CompatibilityError):
            recover_v(grid.zeros(), theta)


class TestStep:
    def test_zero_state_is_a_fixed_point(self, grid):
        state = make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-3)
        for _ in range(1000):
            state = step(state)
        assert state.u.max_abs() < 1e-14
        assert state.theta.max_abs() < 1e-14
        assert state.t == pytest.approx(1.0)
        assert state.step_index == 1000

    def test_temperature_floor_aborts(self, grid):
        values = enforce_neumann_row(np.broadcast_to(-2.0 * np.exp(-(grid.y_nodes**2)), grid.shape), grid)
        state = make_state(grid.zeros(), grid.zeros().with_values(values), nu=0.0, theta_E=1.0, dt=1e-3)
        with pytest.raises(TemperatureFloorError) as info:
            step(state)
        assert info.value.t == 0.0

    def test_floor_is_checked_after_the_step(self, grid):
        state = make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-2)
        cooling = grid.from_function(lambda X, Y: -100.0 * np.exp(-((Y - 3.0) ** 2)) + 0.0 * X)
        with pytest.raises(TemperatureFloorError) as info:
            stepper_for(grid).step(state, (grid.zeros(), cooling))
        assert info.value.t == pytest.approx(1e-2)

    def test_linear_heat_decay(self, grid):
        a = 1e-4
        kappa = math.pi / (2.0 * grid.Y_max)
        theta = grid.from_function(lambda X, Y: a * np.cos(kappa * Y) + 0.0 * X)
        state = make_state(grid.zeros(), theta, nu=0.0, theta_E=1.0, dt=1e-2)
        for _ in range(100):
            state = step(state)
        expected = a * heat_decay_factor(1.0, kappa, state.t) * np.cos(kappa * grid.y_nodes)
        assert state.t == pytest.approx(1.0)
        np.testing.assert_allclose(state.theta.values, np.broadcast_to(expected, grid.shape), atol=1e-4 * a)
        assert state.u.max_abs() == 0.0

    def test_wall_conditions_hold_after_a_step(self, grid):
        u = grid.from_function(lambda X, Y: 0.01 * np.sin(X) * Y * np.exp(-(Y**2)))
        theta = grid.from_function(lambda X, Y: 0.01 * np.cos(X) * np.exp(-(Y**2)) * (1.0 + 2.0 * Y**2))
        theta = theta.with_values(enforce_neumann_row(theta.values, grid))
        state = step(make_state(u, theta, nu=0.1, theta_E=1.0, dt=1e-3))
        assert np.abs(state.u.values[:, 0]).max() < 1e-14
        assert np.abs(state.u.values[:, -1]).max() < 1e-14
        assert np.abs(state.theta.values[:, -1]).max() < 1e-14
        assert np.abs(state.v.values[:, 0]).max() < 1e-8

    def test_non_positive_dt_rejected(self, grid):
        state = make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-3)
        with pytest.raises(ValueError):
            stepper_for(grid).step(state, dt=0.0)

    def test_stepper_is_cached_per_grid(self, grid):
        assert stepper_for(grid) is stepper_for(grid)

    def test_stepper_cache_is_bounded(self):
        for n_y in range(16, 16 + 3 * STEPPER_CACHE_SIZE):
            stepper_for(Grid(L_x=2.0 * math.pi, N_x=8, Y_max=10.0, N_y=n_y))
        assert stepper_for.cache_info().currsize <= STEPPER_CACHE_SIZE


class TestChooseDt:
    def test_fixed_policy_returns_cap(self, grid):
        state = make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-3)
        assert choose_dt(state, "fixed", 5e-3) == 5e-3

    def test_cfl_policy_respects_diffusion_limit(self, grid):
        state = make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-3)
        assert choose_dt(state, "cfl", 1e-3) == 1e-3
        assert choose_dt(state, "cfl", 1.0) == pytest.approx(0.4 * 2.0 * grid.dy_min**2)

    def test_unknown_policy(self, grid):
        state = make_state(grid.zeros(), grid.zeros(), nu=0.0, theta_E=1.0, dt=1e-3)
        with pytest.raises(ValueError):
            choose_dt(state, "adaptive", 1e-3)


def test_tangential_heat_solve(grid):
    f = grid.from_function(lambda X, Y: np.cos(2 * X) * np.exp(-Y))
    out = tangential_heat_solve(f.values, grid, nu=0.1, dt=0.5)
    np.testing.assert_allclose(out, f.values / 1.2, atol=1e-14)
