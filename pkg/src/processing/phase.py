"""Analytic multipliers e^{Phi(t, D)} with Phi = (delta - lambda mu(t)) |xi| and the mu ODE."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core import config
from core.exceptions import AnalyticityDeficitError, SpectrumUnderresolvedError
from processing.grid import Field, Grid, SpectralField, forward_transform
from processing.lpaley import BlockNormTable, DyadicPartition, WeightProfile, derivative_stack

NOISE_FLOOR = 1e-13
MIN_RADIUS_MODES = 6
LOG_OVERFLOW = math.log(config.OVERFLOW_THRESHOLD)


@dataclass
class PhaseState:
    delta: float
    lam: float
    mu: float = 0.0
    mu_dot: float = 0.0
    t: float = 0.0
    t_star_reached: bool = False
    history: List[Tuple[float, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.delta <= 0 or self.lam <= 0:
            raise ValueError("delta and lambda must be positive")
        if not self.history:
            self.history.append((self.t, self.mu, self.mu_dot))

    @property
    def radius(self) -> float:
        return self.delta - self.lam * self.mu

    @property
    def mu_limit(self) -> float:
        return self.delta / self.lam

    def shifted_radius(self, fraction: float = 0.5) -> float:
        """fraction * delta - lambda mu, the radius of the shifted phase."""
        return fraction * self.delta - self.lam * self.mu


def _log_amplitude_check(coeffs: np.ndarray, grid: Grid, radius: float):
    with np.errstate(divide="ignore"):
        log_amp = np.log(np.abs(coeffs).max(axis=1)) + radius * grid.abs_xi
    worst = int(np.argmax(log_amp))
    if log_amp[worst] >= LOG_OVERFLOW or not np.isfinite(np.abs(coeffs).max()):
        mode = int(grid.mode_index[worst])
        logger.error(
            f"Amplification e^{{{radius:.4g}|xi|}} overflows at mode m={mode} (xi={grid.xi[worst]:.4g})."
        )
        raise AnalyticityDeficitError(
            f"analyticity deficit at mode m={mode}: amplified coefficient exceeds "
            f"{config.OVERFLOW_THRESHOLD:.0e}",
            mode=mode,
            xi=float(grid.xi[worst]),
        )


def amplification(grid: Grid, radius: float) -> np.ndarray:
    return np.exp(radius * grid.abs_xi)


def apply_phase(F: SpectralField, radius: float) -> SpectralField:
    if radius < 0:
        raise ValueError(f"phase radius must be non-negative (got {radius})")
    _log_amplitude_check(F.coeffs, F.grid, radius)
    return F.with_coeffs(F.coeffs * amplification(F.grid, radius)[:, None])


class SpectralStacks:
    """Spectra of d_y^i u and d_y^i theta, i = 0..3, for one state."""

    def __init__(self, u: Field, theta: Field):
        self.grid = u.grid
        self.t = u.t
        self.u = derivative_stack(forward_transform(u).coeffs, u.grid)
        self.theta = derivative_stack(forward_transform(theta).coeffs, theta.grid)


class PhasedSpectra:
    """Block norm tables of e^{radius |D|} applied to u and theta and their y-derivatives."""

    def __init__(
        self,
        stacks: SpectralStacks,
        w: Optional[WeightProfile],
        radius: float,
        partition: Optional[DyadicPartition] = None,
    ):
        grid = stacks.grid
        self.radius = radius
        self.partition = partition or DyadicPartition(grid)
        for stack in (stacks.u, stacks.theta):
            _log_amplitude_check(stack[0], grid, radius)
        amp = amplification(grid, radius)[:, None]
        weight = None if w is None else w.values
        self.u = BlockNormTable(grid, self.partition, [c * amp for c in stacks.u], weight, "u_phi")
        self.theta = BlockNormTable(
            grid, self.partition, [c * amp for c in stacks.theta], weight, "theta_phi"
        )


@dataclass
class MuRateTerms:
    linear: float
    quadratic: float
    quartic: float
    mixed: float

    @property
    def total(self) -> float:
        return self.linear + self.quadratic + self.quartic + self.mixed


def mu_rate_terms(spectra: PhasedSpectra, t: float) -> MuRateTerms:
    u, th = spectra.u, spectra.theta
    bt = 1.0 + t
    du_half_2 = u.besov(0.5, 2, offset=1)
    dth_half_2 = th.besov(0.5, 2, offset=1)
    u_one_0 = u.besov(1.0, 0)
    th_half_0 = th.besov(0.5, 0)
    du_half_1 = u.besov(0.5, 1, offset=1)
    dth_half_1 = th.besov(0.5, 1, offset=1)
    th_half_1 = th.besov(0.5, 1)
    du3_half_0 = u.besov(0.5, 0, offset=3)
    dth3_half_0 = th.besov(0.5, 0, offset=3)
    du_half_0 = u.besov(0.5, 0, offset=1)

    linear = bt**0.25 * (du_half_2 + dth_half_2)
    quadratic = bt**0.5 * (u_one_0**2 + th_half_0**2 + (du_half_1 + dth_half_1) ** 2)
    quartic = du_half_1**4 + th_half_1**4
    mixed = du3_half_0 * (du_half_1 + th_half_1) + dth3_half_0 * du_half_0
    return MuRateTerms(linear, quadratic, quartic, mixed)


def state_stacks(state) -> SpectralStacks:
    stacks = getattr(state, "stacks", None)
    return stacks if stacks is not None else SpectralStacks(state.u, state.theta)


def mu_rhs(state, w: WeightProfile, phase: PhaseState) -> float:
    """Right-hand side of the mu ODE at the current phase radius."""
    if phase.t_star_reached:
        raise ValueError("mu_rhs evaluated past T*")
    spectra = PhasedSpectra(state_stacks(state), w, max(phase.radius, 0.0))
    return mu_rate_terms(spectra, state.t).total


def advance_mu(phase: PhaseState, rhs: float, dt: float) -> PhaseState:
    if dt <= 0:
        raise ValueError(f"dt must be positive (got {dt})")
    if rhs < 0:
        raise ValueError(f"mu rate must be non-negative (got {rhs})")
    phase.mu += dt * rhs
    phase.mu_dot = rhs
    phase.t += dt
    phase.history.append((phase.t, phase.mu, rhs))
    if not phase.t_star_reached and phase.mu >= phase.mu_limit:
        phase.t_star_reached = True
        logger.warning(f"T* reached at t={phase.t:.6g}: mu={phase.mu:.6g} >= delta/lambda.")
    return phase


def convexity_check(phase: PhaseState, xi: float, eta: float) -> bool:
    radius = phase.radius
    if radius <= 0:
        raise ValueError("convexity check needs a positive radius")
    lhs = radius * abs(xi)
    rhs = radius * abs(xi - eta) + radius * abs(eta)
    return lhs <= rhs + 1e-12 * max(1.0, rhs)


def convexity_exhaustive(phase: PhaseState, wavenumbers: Sequence[float]) -> bool:
    xi = np.asarray(wavenumbers, dtype=float)
    a, b = np.meshgrid(xi, xi, indexing="ij")
    r = phase.radius
    return bool(np.all(r * np.abs(a) <= r * np.abs(a - b) + r * np.abs(b) + 1e-12))


def spectrum_profile(F: SpectralField) -> Tuple[np.ndarray, np.ndarray]:
    """(|xi_m|, sum_j |coeffs[m, j]|) for modes 0 < m < N_x / 2."""
    grid = F.grid
    positive = np.arange(1, grid.N_x // 2)
    amplitude = np.abs(F.coeffs[positive]).sum(axis=1)
    return grid.abs_xi[positive], amplitude


def measured_radius(F: SpectralField) -> float:
    """Least-squares decay rate rho of the row-summed spectrum ~ e^{-rho |xi|}."""
    xi, amplitude = spectrum_profile(F)
    peak = float(amplitude.max()) if amplitude.size else 0.0
    usable = amplitude > NOISE_FLOOR * peak if peak > 0 else np.zeros_like(amplitude, dtype=bool)
    if int(usable.sum()) < MIN_RADIUS_MODES:
        raise SpectrumUnderresolvedError(
            f"only {int(usable.sum())} modes above the noise floor (need {MIN_RADIUS_MODES})"
        )
    slope, _ = np.polyfit(xi[usable], -np.log(amplitude[usable]), 1)
    return float(slope)


def uniqueness_mu_rate(spectra: PhasedSpectra, t: float) -> float:
    """Rate of mu_i for one trajectory of the uniqueness experiment."""
    u, th = spectra.u, spectra.theta
    bt = 1.0 + t
    du_10 = u.besov(1.0, 0, offset=1)
    dth_10 = th.besov(1.0, 0, offset=1)
    linear = bt**0.25 * (
        u.besov(0.5, 1, offset=1) + th.besov(0.5, 1, offset=1) + u.besov(1.0, 0) + th.besov(1.0, 0)
    )
    quadratic = bt**0.5 * (u.besov(1.0, 1) ** 2 + th.besov(1.0, 1) ** 2)
    quartic = du_10**4 + dth_10**4
    mixed = du_10 * u.besov(1.0, 0, offset=2)
    return linear + quadratic + quartic + mixed


def uniqueness_m_density(first: PhasedSpectra, second: PhasedSpectra, t: float) -> float:
    """Integrand of the extra term in M: <t>^{1/2} sum of ||d_y^2 (u_i, theta_i)||^2 in B^{1,0}."""
    total = 0.0
    for spectra in (first, second):
        total += spectra.u.besov(1.0, 0, offset=2) ** 2 + spectra.theta.besov(1.0, 0, offset=2) ** 2
    return (1.0 + t) ** 0.5 * total


def smallness_horizon(epsilon: float, theta_E: float) -> float:
    """Bound on <t> = 1 + t below which eps^{1/2} <t>^{1/8} <= sqrt(theta_E) / 4."""
    if epsilon <= 0:
        return math.inf
    return (theta_E / (16.0 * epsilon)) ** 4
