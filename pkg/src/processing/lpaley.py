"""Littlewood-Paley blocks, Bony paraproducts, the Gaussian weight and Besov norms."""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import trapezoid

from core import config
from core.exceptions import InsufficientDecayError
from processing.grid import (
    Field,
    Grid,
    SpectralField,
    d_dy,
    dealiased_product,
    forward_transform,
    inverse_transform,
)

CHI_INNER = 3.0 / 4.0
CHI_OUTER = 4.0 / 3.0


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    a = np.exp(-1.0 / xi)
    b = np.exp(-1.0 / (1.0 - xi))
    out[inside] = a / (a + b)
    return out


def chi(r: np.ndarray) -> np.ndarray:
    r = np.abs(np.asarray(r, dtype=float))
    return 1.0 - smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))


def phi(r: np.ndarray) -> np.ndarray:
    r = np.abs(np.asarray(r, dtype=float))
    return chi(r / 2.0) - chi(r)


class DyadicPartition:
    """Dyadic cutoffs restricted to the wavenumbers of one grid.

    Blocks run from k_min = -1 (the chi block) to k_max, the smallest index whose
    low-pass chi(2^-k_max |xi|) is 1 at every grid wavenumber. The block sum reaches 1
    one index earlier, so the last block may hold no grid wavenumber.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.k_min = -1
        xi_max = grid.xi_max
        self.k_max = max(0, math.ceil(math.log2(xi_max / CHI_INNER))) if xi_max > 0 else 0
        self.blocks = list(range(self.k_min, self.k_max + 1))
        self.symbols = np.stack([self.block_symbol(k) for k in self.blocks])

    @staticmethod
    def chi(r):
        return chi(r)

    @staticmethod
    def phi(r):
        return phi(r)

    def block_symbol(self, k: int) -> np.ndarray:
        r = self.grid.abs_xi
        if k <= -2:
            return np.zeros_like(r)
        if k == -1:
            return chi(r)
        return phi(r / 2.0**k)

    def low_pass_symbol(self, k: int) -> np.ndarray:
        return chi(self.grid.abs_xi / 2.0**k)

    def paraproduct_low_symbol(self, k: int) -> np.ndarray:
        """Symbol of S_{k-1} in the paraproduct, the sum of blocks k' <= k - 2."""
        if k - 2 < self.k_min:
            return np.zeros_like(self.grid.abs_xi)
        return self.symbols[: k - 2 - self.k_min + 1].sum(axis=0)

    def partition_error(self) -> float:
        """max over grid wavenumbers of |chi + sum_k phi(2^-k .) - 1|."""
        return float(np.abs(self.symbols.sum(axis=0) - 1.0).max())

    def index(self, k: int) -> int:
        return k - self.k_min

    def scales(self, s: float) -> np.ndarray:
        return np.array([2.0**(k * s) for k in self.blocks])


def dyadic_block(F: SpectralField, k: int, partition: Optional[DyadicPartition] = None) -> SpectralField:
    partition = partition or DyadicPartition(F.grid)
    if k > partition.k_max:
        return F.with_coeffs(np.zeros_like(F.coeffs))
    return F.with_coeffs(F.coeffs * partition.block_symbol(k)[:, None])


def low_pass(F: SpectralField, k: int, partition: Optional[DyadicPartition] = None) -> SpectralField:
    partition = partition or DyadicPartition(F.grid)
    return F.with_coeffs(F.coeffs * partition.low_pass_symbol(k)[:, None])


def bony_decompose(f: Field, g: Field) -> Tuple[Field, Field, Field]:
    """Splits the dealiased product f g into T_f g, T_g f and R(f, g)."""
    partition = DyadicPartition(f.grid)
    F, G = forward_transform(f), forward_transform(g)

    def filtered(S: SpectralField, symbol: np.ndarray) -> Field:
        return inverse_transform(S.with_coeffs(S.coeffs * symbol[:, None]))

    f_blocks = [filtered(F, sym) for sym in partition.symbols]
    g_blocks = [filtered(G, sym) for sym in partition.symbols]
    zero = f.grid.zeros(f.t)
    t_fg, t_gf, r_fg = zero, zero, zero
    for idx, k in enumerate(partition.blocks):
        low = partition.paraproduct_low_symbol(k)
        if low.any():
            t_fg = t_fg + dealiased_product(filtered(F, low), g_blocks[idx])
            t_gf = t_gf + dealiased_product(filtered(G, low), f_blocks[idx])
        for jdx in (idx - 1, idx, idx + 1):
            if 0 <= jdx < len(partition.blocks):
                r_fg = r_fg + dealiased_product(f_blocks[idx], g_blocks[jdx])
    return t_fg, t_gf, r_fg


@dataclass(frozen=True)
class WeightProfile:
    """Gaussian weight e^Psi with Psi(t, y) = y^2 / (16 theta_E (1 + t))."""

    theta_E: float
    t: float
    y_nodes: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def for_grid(cls, grid: Grid, theta_E: float, t: float) -> "WeightProfile":
        return cls(theta_E=theta_E, t=t, y_nodes=grid.y_nodes)

    @property
    def bracket_t(self) -> float:
        return 1.0 + self.t

    @cached_property
    def psi(self) -> np.ndarray:
        return self.y_nodes**2 / (16.0 * self.theta_E * self.bracket_t)

    @cached_property
    def values(self) -> np.ndarray:
        return np.exp(self.psi)

    @cached_property
    def d_psi_dy(self) -> np.ndarray:
        return self.y_nodes / (8.0 * self.theta_E * self.bracket_t)

    @cached_property
    def d_psi_dt(self) -> np.ndarray:
        return -self.y_nodes**2 / (16.0 * self.theta_E * self.bracket_t**2)

    def identity_residual(self) -> np.ndarray:
        """Nodewise |d_t Psi + 4 theta_E (d_y Psi)^2|, zero in exact arithmetic."""
        return np.abs(self.d_psi_dt + 4.0 * self.theta_E * self.d_psi_dy**2)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    j: int = 0
    weighted: bool = True

    def __post_init__(self):
        if self.j not in (0, 1, 2):
            raise ValueError(f"normal derivative count must be 0, 1 or 2 (got {self.j})")

    def label(self) -> str:
        return f"B{Fraction(self.s).limit_denominator(8)},{self.j}{'w' if self.weighted else 'u'}"


def derivative_stack(coeffs: np.ndarray, grid: Grid, max_order: int = 3) -> List[np.ndarray]:
    """Spectral coefficients of d_y^i f for i = 0..max_order."""
    stack = [coeffs]
    for order in range(1, max_order + 1):
        D = grid.derivative_matrix(order)
        stack.append(np.asarray((D @ coeffs.T).T))
    return stack


def check_decay(coeffs: np.ndarray, weight: np.ndarray, label: str = "field"):
    bound = float((np.abs(coeffs).sum(axis=0) * weight).max())
    if not np.isfinite(bound) or bound >= config.OVERFLOW_THRESHOLD:
        logger.error(f"Weighted values of {label} overflow (bound {bound:.3e}).")
        raise InsufficientDecayError(
            f"e^Psi {label} exceeds {config.OVERFLOW_THRESHOLD:.0e}: insufficient decay in y"
        )


class BlockNormTable:
    """Weighted L^2 norms of every Delta_k d_y^i f, indexed [block, i].

    The x part uses Parseval on the coefficients, the y part trapezoid
    quadrature against e^{2 Psi}.
    """

    def __init__(
        self,
        grid: Grid,
        partition: DyadicPartition,
        stack: Sequence[np.ndarray],
        weight: Optional[np.ndarray] = None,
        label: str = "field",
    ):
        self.grid = grid
        self.partition = partition
        weight = np.ones(grid.N_y) if weight is None else weight
        check_decay(stack[0], weight, label)
        sym2 = partition.symbols**2
        rows = []
        for coeffs in stack:
            energy = sym2 @ (np.abs(coeffs) ** 2) * grid.L_x
            rows.append(np.sqrt(np.maximum(trapezoid(energy * weight**2, x=grid.y_nodes, axis=1), 0.0)))
        self.norms = np.stack(rows, axis=1)

    @classmethod
    def from_field(
        cls,
        f: Field,
        w: Optional[WeightProfile] = None,
        partition: Optional[DyadicPartition] = None,
        max_order: int = 3,
        label: str = "field",
    ) -> "BlockNormTable":
        partition = partition or DyadicPartition(f.grid)
        stack = derivative_stack(forward_transform(f).coeffs, f.grid, max_order)
        return cls(f.grid, partition, stack, None if w is None else w.values, label)

    def blockwise(self, j: int, offset: int = 0) -> np.ndarray:
        """Per-block values for derivative orders offset..offset+j, shape (blocks, j+1)."""
        return self.norms[:, offset : offset + j + 1]

    def besov(self, s: float, j: int = 0, offset: int = 0) -> float:
        return float(self.partition.scales(s) @ self.blockwise(j, offset).sum(axis=1))


def besov_norm(f: Field, spec: BesovSpec, w: Optional[WeightProfile] = None) -> float:
    weight = w if spec.weighted else None
    table = BlockNormTable.from_field(f, weight, max_order=spec.j)
    return table.besov(spec.s, spec.j)


class CheminLernerAccumulator:
    """Running time-space norm: the time L^p is taken per block before summing blocks.

    p = 2 integrates density(t) ||e^Psi Delta_k d_y^i f||^2 with the left
    rectangle rule; p = inf keeps the running max and ignores the density.
    """

    def __init__(
        self,
        spec: BesovSpec,
        p: float,
        n_blocks: int,
        offset: int = 0,
        name: str = "",
        density_tag: str = "",
    ):
        if p not in (2, math.inf):
            raise ValueError(f"time exponent must be 2 or inf (got {p})")
        self.spec = spec
        self.p = p
        self.offset = offset
        self.name = name
        self.density_tag = density_tag
        self.k_min = -1
        self.blocks = np.zeros((n_blocks, spec.j + 1))
        self.samples = 0

    @property
    def label(self) -> str:
        suffix = "Linf" if self.p == math.inf else f"L2{self.density_tag}"
        return f"{self.name}:{self.spec.label()}_{suffix}"

    def update_blocks(self, block_values: np.ndarray, dt: float, density: float = 1.0):
        if self.p == 2:
            if dt <= 0 or density < 0:
                raise ValueError("dt must be positive and density non-negative")
            self.blocks = self.blocks + density * dt * block_values**2
        else:
            self.blocks = np.maximum(self.blocks, block_values)
        self.samples += 1
        return self

    def update(self, table: BlockNormTable, dt: float, density: float = 1.0):
        return self.update_blocks(table.blockwise(self.spec.j, self.offset), dt, density)

    def value(self) -> float:
        per_block = np.sqrt(self.blocks) if self.p == 2 else self.blocks
        scales = np.array([2.0**(k * self.spec.s) for k in range(self.k_min, self.k_min + len(per_block))])
        return float(scales @ per_block.sum(axis=1))


def chemin_lerner_update(
    acc: CheminLernerAccumulator,
    f: Field,
    w: WeightProfile,
    dt: float,
    density: float = 1.0,
) -> CheminLernerAccumulator:
    weight = w if acc.spec.weighted else None
    table = BlockNormTable.from_field(f, weight, max_order=acc.offset + acc.spec.j)
    return acc.update(table, dt, density)


def hardy_weight_check(
    f: Field, w: WeightProfile, decay_tolerance: float = 1e-6
) -> Tuple[float, float]:
    """Both sides of the weighted Hardy-type inequality
    int |d_y Psi f|^2 e^{2 Psi} <= C int |d_y f|^2 e^{2 Psi}.
    """
    weighted = np.abs(f.values) * w.values[None, :]
    peak = float(weighted.max())
    if not np.isfinite(peak) or peak >= config.OVERFLOW_THRESHOLD:
        raise InsufficientDecayError("e^Psi f overflows on the grid")
    if peak > 0 and float(weighted[:, -1].max()) > decay_tolerance * peak:
        logger.error(f"Profile does not decay at Y_max: tail {weighted[:, -1].max():.3e}.")
        raise InsufficientDecayError("weighted profile has not decayed at Y_max")
    grid = f.grid
    e2 = w.values**2
    lhs_density = ((w.d_psi_dy[None, :] * f.values) ** 2).sum(axis=0) * grid.dx
    rhs_density = (d_dy(f, 1).values ** 2).sum(axis=0) * grid.dx
    lhs = float(trapezoid(lhs_density * e2, x=grid.y_nodes))
    rhs = float(trapezoid(rhs_density * e2, x=grid.y_nodes))
    return lhs, rhs

