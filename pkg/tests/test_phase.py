import math

import numpy as np
import pytest

from core.exceptions import AnalyticityDeficitError, SpectrumUnderresolvedError
from processing.grid import Field, Grid, forward_transform
from processing.lpaley import WeightProfile
from processing.phase import (
    PhasedSpectra,
    PhaseState,
    SpectralStacks,
    advance_mu,
    apply_phase,
    convexity_check,
    convexity_exhaustive,
    measured_radius,
    mu_rate_terms,
    smallness_horizon,
)


class TestPhaseState:
    def test_radius_and_limit(self):
        phase = PhaseState(delta=0.5, lam=10.0, mu=0.01)
        assert phase.radius == pytest.approx(0.4)
        assert phase.mu_limit == pytest.approx(0.05)
        assert phase.shifted_radius(0.5) == pytest.approx(0.15)

    @pytest.mark.parametrize("delta, lam", [(0.0, 1.0), (0.5, 0.0), (-1.0, 1.0)])
    def test_parameters_must_be_positive(self, delta, lam):
        with pytest.raises(ValueError):
            PhaseState(delta=delta, lam=lam)

    def test_history_starts_with_initial_point(self):
        assert PhaseState(delta=1.0, lam=1.0).history == [(0.0, 0.0, 0.0)]


class TestAdvanceMu:
    def test_forward_euler(self):
        phase = advance_mu(PhaseState(delta=1.0, lam=1.0), rhs=2.0, dt=0.1)
        assert phase.mu == pytest.approx(0.2)
        assert phase.mu_dot == 2.0
        assert phase.t == pytest.approx(0.1)
        assert not phase.t_star_reached

    def test_t_star_is_flagged(self):
        phase = PhaseState(delta=0.5, lam=10.0)
        for _ in range(2):
            advance_mu(phase, rhs=0.2, dt=0.1)
        assert not phase.t_star_reached
        advance_mu(phase, rhs=0.2, dt=0.1)
        assert phase.t_star_reached
        assert phase.radius <= 1e-12

    def test_mu_is_non_decreasing(self):
        phase = PhaseState(delta=1.0, lam=1.0)
        for rhs in (0.0, 0.3, 0.1):
            advance_mu(phase, rhs=rhs, dt=0.01)
        mus = [mu for _, mu, _ in phase.history]
        assert mus == sorted(mus)

    @pytest.mark.parametrize("rhs, dt", [(-1.0, 0.1), (1.0, 0.0)])
    def test_invalid_steps(self, rhs, dt):
        with pytest.raises(ValueError):
            advance_mu(PhaseState(delta=1.0, lam=1.0), rhs=rhs, dt=dt)


class TestApplyPhase:
    def test_multiplies_by_exponential(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(2 * X) * np.exp(-Y))
        F = forward_transform(f)
        G = apply_phase(F, 0.3)
        np.testing.assert_allclose(G.coeffs[2], F.coeffs[2] * math.exp(0.6), rtol=1e-14)
        np.testing.assert_allclose(G.coeffs[0], F.coeffs[0])

    def test_negative_radius_rejected(self, grid):
        with pytest.raises(ValueError):
            apply_phase(forward_transform(grid.zeros()), -0.1)

    def test_overflow_names_the_mode(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(8 * X) + 0.0 * Y)
        with pytest.raises(AnalyticityDeficitError) as info:
            apply_phase(forward_transform(f), 100.0)
        assert abs(info.value.mode) == 8


class TestConvexity:
    def test_triangle_inequality_holds(self, grid):
        phase = PhaseState(delta=0.5, lam=1.0)
        assert convexity_check(phase, 3.0, -5.0)
        assert convexity_exhaustive(phase, grid.xi)

    def test_requires_positive_radius(self):
        phase = PhaseState(delta=0.5, lam=1.0, mu=1.0)
        with pytest.raises(ValueError):
            convexity_check(phase, 1.0, 2.0)


class TestMeasuredRadius:
    def test_recovers_decay_rate(self):
        grid = Grid(L_x=2.0 * math.pi, N_x=64, Y_max=10.0, N_y=32)
        rho = 1.5
        # sum_m e^{-rho |m|} e^{imx} = sinh(rho) / (cosh(rho) - cos x)
        f = grid.from_function(
            lambda X, Y: math.sinh(rho) / (math.cosh(rho) - np.cos(X)) * np.exp(-(Y**2))
        )
        assert measured_radius(forward_transform(f)) == pytest.approx(rho, rel=1e-3)

    def test_band_limited_spectrum_is_underresolved(self, grid):
        f = grid.from_function(lambda X, Y: np.cos(X) * np.exp(-Y))
        with pytest.raises(SpectrumUnderresolvedError):
            measured_radius(forward_transform(f))


class TestMuRate:
    def test_vanishes_for_zero_state(self, grid):
        w = WeightProfile.for_grid(grid, 1.0, 0.0)
        spectra = PhasedSpectra(SpectralStacks(grid.zeros(), grid.zeros()), w, 0.5)
        assert mu_rate_terms(spectra, 0.0).total == 0.0

    def test_terms_are_non_negative(self, grid):
        u = grid.from_function(lambda X, Y: 0.1 * np.sin(X) * Y * np.exp(-(Y**2)))
        theta = grid.from_function(lambda X, Y: 0.1 * np.cos(X) * np.exp(-(Y**2)))
        w = WeightProfile.for_grid(grid, 1.0, 0.0)
        terms = mu_rate_terms(PhasedSpectra(SpectralStacks(u, theta), w, 0.5), 0.0)
        assert terms.linear > 0 and terms.quadratic > 0
        assert terms.quartic >= 0 and terms.mixed >= 0
        assert terms.total == pytest.approx(terms.linear + terms.quadratic + terms.quartic + terms.mixed)

    def test_larger_radius_raises_rate(self, grid):
        u = grid.from_function(lambda X, Y: 0.1 * np.sin(3 * X) * Y * np.exp(-(Y**2)))
        stacks = SpectralStacks(u, Field(grid, np.zeros(grid.shape)))
        w = WeightProfile.for_grid(grid, 1.0, 0.0)
        slow = mu_rate_terms(PhasedSpectra(stacks, w, 0.1), 0.0).total
        fast = mu_rate_terms(PhasedSpectra(stacks, w, 0.5), 0.0).total
        assert fast > slow


@pytest.mark.parametrize(
    "epsilon, theta_E, expected",
    [(0.1, 1.0, 0.152587890625), (1.0 / 16.0, 1.0, 1.0), (0.0, 1.0, math.inf)],
)
def test_smallness_horizon(epsilon, theta_E, expected):
    assert smallness_horizon(epsilon, theta_E) == pytest.approx(expected)
