import math

import numpy as np
import pytest

from core.exceptions import InvalidFieldError, SymmetryViolationError
from processing.grid import (
    Field,
    Grid,
    SpectralField,
    cumulative_integral_y,
    d_dx,
    d_dy,
    dealiased_product,
    enforce_neumann_row,
    fornberg_weights,
    forward_transform,
    inverse_transform,
    padded_length,
    stencil_widths,
    tangential_energy,
    truncate_nyquist,
)


class TestStencils:
    def test_centered_second_derivative_weights(self):
        weights = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
        np.testing.assert_allclose(weights[:, 2], [1.0, -2.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(weights[:, 0], [0.0, 1.0, 0.0], atol=1e-14)

    @pytest.mark.parametrize(
        "order, expected",
        [(1, (5, 5)), (2, (5, 6)), (3, (7, 7))],
    )
    def test_widths_for_fourth_order(self, order, expected):
        assert stencil_widths(order, 4) == expected

    def test_too_few_nodes_rejected(self):
        from processing.grid import derivative_matrix

        with pytest.raises(ValueError):
            derivative_matrix(np.linspace(0.0, 1.0, 4), 3, 4)


class TestGrid:
    def test_basic_attributes(self, grid):
        assert grid.shape == (16, 64)
        assert grid.dx == pytest.approx(2.0 * math.pi / 16)
        assert grid.y_nodes[0] == 0.0 and grid.y_nodes[-1] == 10.0
        assert grid.mode_index[1] == 1 and grid.mode_index[-1] == -1
        assert grid.xi_max == pytest.approx(8.0)

    def test_stretched_nodes_cluster_at_wall(self, stretched_grid):
        spacing = np.diff(stretched_grid.y_nodes)
        assert np.all(np.diff(spacing) > 0)
        assert stretched_grid.y_nodes[-1] == 10.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(N_x=12),
            dict(N_y=8),
            dict(L_x=-1.0),
            dict(fd_order=3),
            dict(integration_rule="midpoint"),
        ],
    )
    def test_invalid_parameters(self, kwargs):
        params = dict(L_x=2.0 * math.pi, N_x=16, Y_max=10.0, N_y=64)
        params.update(kwargs)
        with pytest.raises(ValueError):
            Grid(**params)


class TestField:
    def test_values_are_read_only(self, grid):
        f = grid.zeros()
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_rejects_non_finite(self, grid):
        values = np.zeros(grid.shape)
        values[3, 4] = np.nan
        with pytest.raises(InvalidFieldError):
            Field(grid, values)

    def test_rejects_wrong_shape(self, grid):
        with pytest.raises(InvalidFieldError):
            Field(grid, np.zeros((4, 4)))

    def test_arithmetic(self, grid):
        f = grid.from_function(lambda X, Y: np.sin(X) * np.exp(-Y))
        g = (f + f) * 0.5 - f
        assert g.max_abs() == pytest.approx(0.0, abs=1e-15)

    def test_mixed_grids_rejected(self, grid, stretched_grid):
        with pytest.raises(InvalidFieldError):
            grid.zeros() + stretched_grid.zeros()


class TestDerivatives:
    @pytest.mark.parametrize("order, power", [(1, 3), (2, 4), (3, 4)])
    def test_polynomials_exact_on_stretched_grid(self, stretched_grid, order, power):
        f = stretched_grid.from_function(lambda X, Y: Y**power + 0.0 * X)
        factor = math.factorial(power) / math.factorial(power - order)
        exact = factor * stretched_grid.y_nodes ** (power - order)
        got = d_dy(f, order).values
        scale = float(np.abs(exact).max())
        np.testing.assert_allclose(got, np.broadcast_to(exact, got.shape), atol=1e-6 * scale)

    def test_tangential_derivative_is_spectral(self, grid):
        f = grid.from_function(lambda X, Y: np.sin(3 * X) * np.exp(-Y))
        expected = grid.from_function(lambda X, Y: 3 * np.cos(3 * X) * np.exp(-Y))
        np.testing.assert_allclose(d_dx(f).values, expected.values, atol=1e-12)

    def test_odd_derivative_drops_nyquist(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(8 * X) + 0.0 * Y)
        assert d_dx(f).max_abs() == pytest.approx(0.0, abs=1e-12)

    def test_second_tangential_derivative(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(2 * X) + 0.0 * Y)
        np.testing.assert_allclose(d_dx(f, 2).values, -4.0 * f.values, atol=1e-12)


class TestIntegration:
    @pytest.mark.parametrize("rule", ["simpson", "trapezoid"])
    def test_antiderivative_vanishes_at_wall(self, grid, rule):
        f = grid.from_function(lambda X, Y: np.exp(-Y) + 0.0 * X)
        F = cumulative_integral_y(f, rule)
        assert np.all(F.values[:, 0] == 0.0)

    def test_simpson_exact_for_quadratics(self, grid):
        f = grid.from_function(lambda X, Y: Y**2 + 0.0 * X)
        F = cumulative_integral_y(f, "simpson")
        np.testing.assert_allclose(F.values[0], grid.y_nodes**3 / 3.0, atol=1e-10)


class TestTransforms:
    def test_round_trip(self, grid, rng):
        f = Field(grid, rng.standard_normal(grid.shape))
        np.testing.assert_allclose(inverse_transform(forward_transform(f)).values, f.values, atol=1e-13)

    def test_normalization(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(X) + 0.0 * Y)
        F = forward_transform(f)
        assert abs(F.coeffs[1, 0] - 0.5) < 1e-14
        assert abs(F.coeffs[-1, 0] - 0.5) < 1e-14
        assert abs(F.coeffs[2, 0]) < 1e-14

    def test_asymmetric_spectrum_rejected(self, grid):
        coeffs = np.zeros(grid.shape, dtype=complex)
        coeffs[1] = 1.0
        with pytest.raises(SymmetryViolationError):
            inverse_transform(SpectralField(grid, coeffs))

    def test_parseval(self, grid, rng):
        f = Field(grid, rng.standard_normal(grid.shape))
        physical, spectral = tangential_energy(f)
        np.testing.assert_allclose(physical, spectral, rtol=1e-12)


class TestDealiasedProduct:
    def test_padded_length(self):
        assert padded_length(16, 2) == 24
        assert padded_length(16, 3) == 32

    def test_resolved_product_is_pointwise(self, grid):
        f = grid.from_function(lambda X, Y: np.sin(X) + 0.0 * Y)
        g = grid.from_function(lambda X, Y: np.sin(2 * X) + 0.0 * Y)
        np.testing.assert_allclose(dealiased_product(f, g).values, f.values * g.values, atol=1e-13)

    def test_aliased_mode_removed(self):
        small = Grid(L_x=2.0 * math.pi, N_x=8, Y_max=1.0, N_y=16)
        f = small.from_function(lambda X, Y: np.cos(3 * X) + 0.0 * Y)
        np.testing.assert_allclose(dealiased_product(f, f).values, 0.5, atol=1e-13)

    def test_single_factor_passthrough(self, grid):
        f = grid.from_function(lambda X, Y: np.sin(X) * Y)
        assert dealiased_product(f) is f

    def test_truncate_nyquist(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(8 * X) + np.cos(X) + 0.0 * Y)
        expected = grid.from_function(lambda X, Y: np.cos(X) + 0.0 * Y)
        np.testing.assert_allclose(truncate_nyquist(f).values, expected.values, atol=1e-13)


def test_neumann_row_projection(stretched_grid):
    f = stretched_grid.from_function(lambda X, Y: np.cos(X) * np.exp(-((Y - 0.3) ** 2)))
    values = enforce_neumann_row(f.values, stretched_grid)
    wall = d_dy(f.with_values(values), 1).values[:, 0]
    assert np.abs(wall).max() < 1e-12
    np.testing.assert_array_equal(values[:, 1:], f.values[:, 1:])
