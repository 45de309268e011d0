from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft
from loguru import logger

from core.exceptions import CompatibilityError
from processing.grid import Field, Grid, d_dy, enforce_neumann_row, forward_transform
from processing.lpaley import BlockNormTable, DyadicPartition, WeightProfile, derivative_stack
from processing.phase import apply_phase

COMPATIBILITY_TOLERANCE = 1e-10


def velocity_profile(y: np.ndarray) -> np.ndarray:
    return y * np.exp(-(y**2))


def temperature_profile(y: np.ndarray) -> np.ndarray:
    return np.exp(-(y**2))


def amplified_norms(f: Field, delta: float, theta_E: float) -> tuple:
    """(||e^{delta|D|} f||_{B^{1,1}_Psi0}, ||e^{delta|D|} d_y^2 f||_{B^{1/2,0}_Psi0})."""
    grid = f.grid
    coeffs = apply_phase(forward_transform(f), delta).coeffs
    w0 = WeightProfile.for_grid(grid, theta_E, 0.0)
    table = BlockNormTable(grid, DyadicPartition(grid), derivative_stack(coeffs, grid, 2), w0.values)
    return table.besov(1.0, 1), table.besov(0.5, 0, offset=2)


@dataclass(frozen=True, eq=False)
class InitialData:
    u0: Field
    theta0: Field
    delta: float
    epsilon: float
    theta_E: float
    seed: Optional[int] = None

    def check(self) -> "InitialData":
        """Verifies compatibility, finite amplified norms and the smallness of theta0."""
        u_wall = float(np.abs(self.u0.values[:, 0]).max())
        theta_wall = float(np.abs(d_dy(self.theta0, 1).values[:, 0]).max())
        if u_wall > COMPATIBILITY_TOLERANCE or theta_wall > COMPATIBILITY_TOLERANCE:
            raise CompatibilityError(
                f"initial data violate the wall conditions (u: {u_wall:.3e}, d_y theta: {theta_wall:.3e})"
            )
        norms = {}
        for name, f in (("u0", self.u0), ("theta0", self.theta0)):
            norms[name] = amplified_norms(f, self.delta, self.theta_E)
            if not all(np.isfinite(norms[name])):
                raise ValueError(f"amplified norms of {name} are not finite")
        theta_norm = norms["theta0"][0]
        if theta_norm > self.epsilon * (1.0 + 1e-10) + 1e-300:
            raise ValueError(
                f"||e^(delta|D|) theta0|| = {theta_norm:.6g} exceeds epsilon = {self.epsilon:.6g}"
            )
        return self

    def data_norm(self) -> float:
        """Sum of the amplified initial-data norms bounding the a priori estimate."""
        total = 0.0
        for f in (self.u0, self.theta0):
            first, second = amplified_norms(f, self.delta, self.theta_E)
            total += first + second
        return total

    def perturbed(self, other: "InitialData", sigma: float) -> "InitialData":
        """self + sigma * other, with other normalized to unit max amplitude."""
        scale = max(other.u0.max_abs(), other.theta0.max_abs())
        if scale == 0.0 or sigma == 0.0:
            return self
        u0 = self.u0 + other.u0 * (sigma / scale)
        theta0 = self.theta0 + other.theta0 * (sigma / scale)
        return InitialData(u0, theta0, self.delta, self.epsilon, self.theta_E, self.seed)


def random_tangential_series(grid: Grid, rng: np.random.Generator, delta: float, n_modes: int) -> np.ndarray:
    """Real periodic series with |a_m| = e^{-2 delta |xi_m|} r_m, r_m in [1/2, 1], 0 < |m| <= n_modes."""
    n_modes = min(n_modes, grid.N_x // 2 - 1)
    coeffs = np.zeros(grid.N_x, dtype=complex)
    for m in range(1, n_modes + 1):
        magnitude = np.exp(-2.0 * delta * grid.abs_xi[m]) * rng.uniform(0.5, 1.0)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        coeffs[m] = magnitude * np.exp(1j * angle)
        coeffs[-m] = np.conj(coeffs[m])
    return scipy.fft.ifft(coeffs * grid.N_x).real


def make_initial_data(
    grid: Grid,
    delta: float,
    epsilon: float,
    theta_E: float,
    seed: int,
    u_scale: float = 0.05,
    n_modes: Optional[int] = None,
    enforce_smallness: bool = True,
) -> InitialData:
    if enforce_smallness and not 0.0 <= epsilon < theta_E:
        logger.error(f"epsilon = {epsilon} is outside [0, theta_E = {theta_E}).")
        raise ValueError(f"epsilon must satisfy 0 <= epsilon < theta_E (got {epsilon}, {theta_E})")
    if delta <= 0:
        raise ValueError(f"delta must be positive (got {delta})")
    n_modes = n_modes or max(1, grid.N_x // 4)
    rng = np.random.default_rng(seed)
    a = random_tangential_series(grid, rng, delta, n_modes)
    b = random_tangential_series(grid, rng, delta, n_modes)

    y = grid.y_nodes
    u_values = np.outer(a, velocity_profile(y))
    u_values[:, 0] = 0.0
    u_values[:, -1] = 0.0
    theta_values = np.outer(b, temperature_profile(y))
    theta_values[:, -1] = 0.0
    theta_values = enforce_neumann_row(theta_values, grid)

    u_peak = float(np.abs(u_values).max())
    if u_peak > 0:
        u_values *= u_scale / u_peak
    u0 = Field(grid, u_values, 0.0)

    theta_unit = Field(grid, theta_values, 0.0)
    if enforce_smallness:
        unit_norm = amplified_norms(theta_unit, delta, theta_E)[0]
        scale = 0.5 * epsilon / unit_norm if unit_norm > 0 else 0.0
    else:
        # Large data: epsilon/2 is the depth of the coldest point of theta0.
        dip = -float(theta_values.min())
        scale = 0.5 * epsilon / dip if dip > 0 else 0.0
    theta0 = theta_unit * scale

    logger.info(
        f"Initial data: seed={seed}, {n_modes} modes, max|u0|={u0.max_abs():.3e}, "
        f"max|theta0|={theta0.max_abs():.3e}, epsilon={epsilon:.3e}."
    )
    data = InitialData(u0, theta0, delta, epsilon, theta_E, seed)
    return data.check() if enforce_smallness else data


def zero_data(grid: Grid, delta: float, theta_E: float) -> InitialData:
    return InitialData(grid.zeros(), grid.zeros(), delta, 0.0, theta_E)
