import asyncio
import math
from itertools import product
from typing import List, Tuple

import numpy as np
from loguru import logger

from core.run_config import RunConfig
from experiments.trajectory import ExperimentOutcome, grid_from_config
from handlers.report_handler import ReportHandler
from processing.grid import (
    Field,
    Grid,
    dealiased_product,
    forward_transform,
    inverse_transform,
    truncate_nyquist,
)
from processing.lpaley import DyadicPartition, WeightProfile, bony_decompose, dyadic_block, hardy_weight_check
from processing.phase import PhaseState, convexity_exhaustive

PARTITION_TOLERANCE = 1e-12
RECONSTRUCTION_TOLERANCE = 1e-12
ORTHOGONALITY_TOLERANCE = 1e-12
BONY_TOLERANCE = 1e-10
WEIGHT_TOLERANCE = 1e-13
HARDY_BOUND = 1.05
HARDY_STABILITY = 0.2

WEIGHT_THETAS = (0.5, 1.0, 4.0)
WEIGHT_TIMES = (0.0, 1.0, 10.0)
HARDY_SHAPES = ((32, 2.0 * math.pi), (32, 4.0 * math.pi), (64, 2.0 * math.pi), (64, 4.0 * math.pi))

Check = Tuple[str, float, float, bool]


def random_field(grid: Grid, rng: np.random.Generator) -> Field:
    return truncate_nyquist(Field(grid, rng.standard_normal(grid.shape)))


def check_partition(grid: Grid) -> float:
    return DyadicPartition(grid).partition_error()


def check_reconstruction(grid: Grid, rng: np.random.Generator, count: int) -> Tuple[float, float]:
    """(max |sum_k Delta_k f - f|, max |Delta_j Delta_k f| over |j - k| >= 2), relative to max |f|."""
    partition = DyadicPartition(grid)
    reconstruction, orthogonality = 0.0, 0.0
    for _ in range(count):
        F = forward_transform(random_field(grid, rng))
        scale = float(np.abs(F.coeffs).max())
        blocks = [dyadic_block(F, k, partition) for k in partition.blocks]
        total = sum(b.coeffs for b in blocks)
        reconstruction = max(reconstruction, float(np.abs(total - F.coeffs).max()) / scale)
        for (i, j) in product(range(len(blocks)), repeat=2):
            if abs(i - j) >= 2:
                twice = dyadic_block(blocks[i], partition.blocks[j], partition)
                orthogonality = max(orthogonality, float(np.abs(twice.coeffs).max()) / scale)
    return reconstruction, orthogonality


def check_bony(grid: Grid, rng: np.random.Generator, count: int) -> float:
    worst = 0.0
    for _ in range(count):
        f, g = random_field(grid, rng), random_field(grid, rng)
        t_fg, t_gf, r = bony_decompose(f, g)
        exact = dealiased_product(f, g).values
        scale = max(float(np.abs(exact).max()), 1e-300)
        worst = max(worst, float(np.abs(t_fg.values + t_gf.values + r.values - exact).max()) / scale)
    return worst


def check_weight_identity(grid: Grid) -> float:
    worst = 0.0
    for theta_E, t in product(WEIGHT_THETAS, WEIGHT_TIMES):
        w = WeightProfile.for_grid(grid, theta_E, t)
        worst = max(worst, float(w.identity_residual().max()))
    return worst


def hardy_profile(grid: Grid, theta_E: float, rng: np.random.Generator) -> Field:
    """a(x) g(y) with g = (1 + c1 y + c2 y^2) e^{-b y^2 / theta_E}, b in [0.3, 1]."""
    x = grid.x_nodes * (2.0 * math.pi / grid.L_x)
    a = 1.0 + 0.5 * rng.uniform(-1, 1) * np.cos(x) + 0.5 * rng.uniform(-1, 1) * np.sin(2 * x)
    c1, c2 = rng.uniform(-1, 1, size=2)
    b = rng.uniform(0.3, 1.0)
    y = grid.y_nodes
    g = (1.0 + c1 * y + c2 * y**2) * np.exp(-b * y**2 / theta_E)
    return Field(grid, np.outer(a, g))


def hardy_constants(cfg: RunConfig, theta_E: float, count: int) -> List[float]:
    """Empirical constants max lhs/rhs, one per (N_x, L_x) shape, on the same profile family."""
    constants = []
    for n_x, l_x in HARDY_SHAPES:
        grid = Grid(L_x=l_x, N_x=n_x, Y_max=10.0 * math.sqrt(theta_E), N_y=cfg.grid.N_y)
        w = WeightProfile.for_grid(grid, theta_E, 0.0)
        rng = np.random.default_rng(cfg.physics.seed)
        ratios = []
        for _ in range(count):
            lhs, rhs = hardy_weight_check(hardy_profile(grid, theta_E, rng), w)
            if rhs > 0:
                ratios.append(lhs / rhs)
        constants.append(max(ratios))
    return constants


def run_checks(cfg: RunConfig) -> List[Check]:
    grid = grid_from_config(cfg)
    params = cfg.experiment_params
    rng = np.random.default_rng(cfg.physics.seed)
    checks: List[Check] = []

    checks.append(("partition", check_partition(grid), PARTITION_TOLERANCE))
    reconstruction, orthogonality = check_reconstruction(grid, rng, params.selftest_fields)
    checks.append(("reconstruction", reconstruction, RECONSTRUCTION_TOLERANCE))
    checks.append(("orthogonality", orthogonality, ORTHOGONALITY_TOLERANCE))
    checks.append(("bony", check_bony(grid, rng, params.selftest_fields), BONY_TOLERANCE))
    checks.append(("weight_identity", check_weight_identity(grid), WEIGHT_TOLERANCE))

    for theta_E in WEIGHT_THETAS:
        constants = hardy_constants(cfg, theta_E, params.hardy_profiles)
        checks.append((f"hardy_constant_{theta_E:g}", max(constants), HARDY_BOUND))
        spread = (max(constants) - min(constants)) / max(constants)
        checks.append((f"hardy_stability_{theta_E:g}", spread, HARDY_STABILITY))

    phase = PhaseState(delta=cfg.physics.delta, lam=cfg.physics.lam)
    convex = convexity_exhaustive(phase, grid.xi)
    checks.append(("convexity", 0.0 if convex else 1.0, 0.5))

    # Inverse transform of a real field's spectrum must pass the symmetry gate.
    f = random_field(grid, rng)
    roundtrip = float(np.abs(inverse_transform(forward_transform(f)).values - f.values).max())
    checks.append(("transform_roundtrip", roundtrip, 1e-12 * max(1.0, f.max_abs())))

    return [(name, value, tol, value <= tol) for name, value, tol in checks]


async def run_lp_selftest(cfg: RunConfig, report: ReportHandler) -> ExperimentOutcome:
    checks = await asyncio.to_thread(run_checks, cfg)
    report.write_rows("selftest.csv", ("check", "value", "tolerance", "passed"), checks)
    summary = {name: value for name, value, _, _ in checks}
    failed = [name for name, _, _, ok in checks if not ok]
    for name, value, tol, ok in checks:
        verdict = "ok" if ok else "FAILED"
        (logger.info if ok else logger.error)(f"{name}: {value:.3e} (tolerance {tol:.1e}) {verdict}")
    summary["failed_checks"] = ",".join(failed) or "none"
    return ExperimentOutcome("FAIL" if failed else "PASS", summary)
