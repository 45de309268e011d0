"""Discretization of the half-plane: periodic x, truncated y, transforms and derivatives."""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.fft
from loguru import logger
from scipy import sparse
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from core.exceptions import InvalidFieldError, SymmetryViolationError

SYMMETRY_TOLERANCE = 1e-10


def fornberg_weights(z: float, nodes: np.ndarray, max_order: int) -> np.ndarray:
    """Finite-difference weights at z for derivatives 0..max_order on arbitrary nodes.

    Returns an array of shape (len(nodes), max_order + 1).
    """
    n = len(nodes)
    c = np.zeros((n, max_order + 1))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, max_order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def stencil_widths(order: int, accuracy: int) -> Tuple[int, int]:
    """(centered width, one-sided width) reaching the given accuracy for a derivative order."""
    centered = 2 * ((order + 1) // 2) - 1 + accuracy
    return centered, order + accuracy


def derivative_matrix(nodes: np.ndarray, order: int, accuracy: int) -> sparse.csr_matrix:
    n = len(nodes)
    centered, one_sided = stencil_widths(order, accuracy)
    half = centered // 2
    if n < one_sided:
        raise ValueError(f"{n} nodes cannot carry a width-{one_sided} stencil")
    rows, cols, vals = [], [], []
    for i in range(n):
        if i - half >= 0 and i + half <= n - 1:
            window = np.arange(i - half, i + half + 1)
        elif i - half < 0:
            window = np.arange(0, one_sided)
        else:
            window = np.arange(n - one_sided, n)
        w = fornberg_weights(nodes[i], nodes[window], order)[:, order]
        rows.extend([i] * len(window))
        cols.extend(window.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


class Grid:
    """Periodic tangential grid of N_x points times a normal grid on [0, Y_max].

    With y_stretch = beta > 0 the normal nodes cluster at the wall:
    y = Y_max (e^{beta s} - 1) / (e^beta - 1), s uniform on [0, 1].
    """

    def __init__(
        self,
        L_x: float,
        N_x: int,
        Y_max: float,
        N_y: int,
        y_stretch: float = 0.0,
        fd_order: int = 4,
        integration_rule: str = "simpson",
    ):
        if N_x < 8 or N_x & (N_x - 1):
            raise ValueError(f"N_x must be a power of two >= 8 (got {N_x})")
        if N_y < 16:
            raise ValueError(f"N_y must be >= 16 (got {N_y})")
        if L_x <= 0 or Y_max <= 0:
            raise ValueError("L_x and Y_max must be positive")
        if fd_order not in (2, 4):
            raise ValueError(f"fd_order must be 2 or 4 (got {fd_order})")
        if integration_rule not in ("simpson", "trapezoid"):
            raise ValueError(f"unknown integration rule '{integration_rule}'")

        self.L_x = float(L_x)
        self.N_x = int(N_x)
        self.Y_max = float(Y_max)
        self.N_y = int(N_y)
        self.y_stretch = float(y_stretch)
        self.fd_order = int(fd_order)
        self.integration_rule = integration_rule

        s = np.linspace(0.0, 1.0, self.N_y)
        if self.y_stretch > 0:
            y = self.Y_max * np.expm1(self.y_stretch * s) / np.expm1(self.y_stretch)
        else:
            y = self.Y_max * s
        y[0], y[-1] = 0.0, self.Y_max
        self.y_nodes = y
        self.x_nodes = np.arange(self.N_x) * (self.L_x / self.N_x)
        self.xi = 2.0 * np.pi * scipy.fft.fftfreq(self.N_x, d=self.L_x / self.N_x)
        self.abs_xi = np.abs(self.xi)
        self.mode_index = np.rint(self.xi * self.L_x / (2.0 * np.pi)).astype(int)
        self._matrices: Dict[int, sparse.csr_matrix] = {}

    def __repr__(self):
        return (
            f"Grid(L_x={self.L_x:.4g}, N_x={self.N_x}, Y_max={self.Y_max:.4g}, "
            f"N_y={self.N_y}, y_stretch={self.y_stretch}, fd_order={self.fd_order})"
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.N_x, self.N_y

    @property
    def dx(self) -> float:
        return self.L_x / self.N_x

    @cached_property
    def dy(self) -> np.ndarray:
        return np.diff(self.y_nodes)

    @property
    def dy_min(self) -> float:
        return float(self.dy.min())

    @property
    def xi_max(self) -> float:
        return float(self.abs_xi.max())

    def derivative_matrix(self, order: int) -> sparse.csr_matrix:
        if order not in (1, 2, 3):
            raise ValueError(f"derivative order must be 1, 2 or 3 (got {order})")
        if order not in self._matrices:
            self._matrices[order] = derivative_matrix(self.y_nodes, order, self.fd_order)
        return self._matrices[order]

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.shape == other.shape
            and self.L_x == other.L_x
            and np.array_equal(self.y_nodes, other.y_nodes)
        )

    def zeros(self, t: float = 0.0) -> "Field":
        return Field(self, np.zeros(self.shape), t)

    def from_function(self, func, t: float = 0.0) -> "Field":
        X, Y = np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")
        return Field(self, np.broadcast_to(func(X, Y), self.shape).astype(float), t)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on the grid, shape (N_x, N_y), x index first."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidFieldError(
                f"Field shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError(f"Field at t={self.t} contains NaN or Inf entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, t: Optional[float] = None) -> "Field":
        return Field(self.grid, values, self.t if t is None else t)

    def _check(self, other: "Field"):
        if not self.grid.same_as(other.grid):
            raise InvalidFieldError("Fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Row-wise tangential Fourier coefficients, shape (N_x, N_y), modes in FFT order."""

    grid: Grid
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise InvalidFieldError(
                f"SpectralField shape {coeffs.shape} does not match grid {self.grid.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.t)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def symmetry_defect(self) -> float:
        """Relative deviation from coeffs[-m] = conj(coeffs[m])."""
        mirrored = np.conj(np.roll(self.coeffs[::-1], 1, axis=0))
        scale = float(np.abs(self.coeffs).max())
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.coeffs - mirrored).max()) / scale


def forward_transform(f: Field) -> SpectralField:
    coeffs = scipy.fft.fft(f.values, axis=0) / f.grid.N_x
    return SpectralField(f.grid, coeffs, f.t)


def inverse_transform(F: SpectralField) -> Field:
    defect = F.symmetry_defect()
    if defect > SYMMETRY_TOLERANCE:
        logger.error(f"Spectrum at t={F.t} is not conjugate symmetric (defect {defect:.3e}).")
        raise SymmetryViolationError(
            f"conjugate symmetry violated by {defect:.3e} (tolerance {SYMMETRY_TOLERANCE:.0e})"
        )
    values = scipy.fft.ifft(F.coeffs * F.grid.N_x, axis=0).real
    return Field(F.grid, values, F.t)


def d_dy(f: Field, order: int) -> Field:
    D = f.grid.derivative_matrix(order)
    return f.with_values((D @ f.values.T).T)


def d_dx(f: Field, order: int = 1) -> Field:
    grid = f.grid
    symbol = (1j * grid.xi) ** order
    if order % 2:
        symbol[grid.N_x // 2] = 0.0
    coeffs = scipy.fft.fft(f.values, axis=0) * symbol[:, None]
    return f.with_values(scipy.fft.ifft(coeffs, axis=0).real)


def cumulative_integral_y(f: Field, rule: Optional[str] = None) -> Field:
    """Antiderivative in y vanishing at the wall."""
    rule = rule or f.grid.integration_rule
    y = f.grid.y_nodes
    if rule == "trapezoid":
        values = cumulative_trapezoid(f.values, x=y, axis=1, initial=0.0)
    elif rule == "simpson":
        values = cumulative_simpson(f.values, x=y, axis=1, initial=0.0)
    else:
        raise ValueError(f"unknown integration rule '{rule}'")
    return f.with_values(values)


def padded_length(n_x: int, n_factors: int) -> int:
    return (n_factors + 1) * n_x // 2


def _to_padded(coeffs: np.ndarray, size: int) -> np.ndarray:
    n = coeffs.shape[0]
    half = n // 2
    out = np.zeros((size,) + coeffs.shape[1:], dtype=complex)
    out[:half] = coeffs[:half]
    out[size - half + 1 :] = coeffs[half + 1 :]
    return out


def _from_padded(coeffs: np.ndarray, n: int) -> np.ndarray:
    size = coeffs.shape[0]
    half = n // 2
    out = np.zeros((n,) + coeffs.shape[1:], dtype=complex)
    out[:half] = coeffs[:half]
    out[half + 1 :] = coeffs[size - half + 1 :]
    return out


def dealiased_product(*factors: Field) -> Field:
    """Pointwise product computed on a zero-padded grid and truncated back.

    Padding to (p + 1) N_x / 2 points for p factors removes all aliasing; the
    Nyquist mode of every factor and of the result is dropped.
    """
    if not factors:
        raise ValueError("dealiased_product needs at least one factor")
    grid = factors[0].grid
    if len(factors) == 1:
        return factors[0]
    n = grid.N_x
    size = padded_length(n, len(factors))
    product = None
    for f in factors:
        if not grid.same_as(f.grid):
            raise InvalidFieldError("Fields live on different grids")
        coeffs = scipy.fft.fft(f.values, axis=0) / n
        fine = scipy.fft.ifft(_to_padded(coeffs, size) * size, axis=0).real
        product = fine if product is None else product * fine
    coarse = _from_padded(scipy.fft.fft(product, axis=0) / size, n)
    values = scipy.fft.ifft(coarse * n, axis=0).real
    return Field(grid, values, factors[0].t)


def truncate_nyquist(f: Field) -> Field:
    coeffs = scipy.fft.fft(f.values, axis=0)
    coeffs[f.grid.N_x // 2] = 0.0
    return f.with_values(scipy.fft.ifft(coeffs, axis=0).real)


def enforce_neumann_row(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Adjusts the wall row so the discrete first y-derivative vanishes there."""
    row = grid.derivative_matrix(1).getrow(0).toarray().ravel()
    out = np.array(values, dtype=float)
    out[:, 0] = -(out[:, 1:] @ row[1:]) / row[0]
    return out


def tangential_energy(f: Field) -> Tuple[np.ndarray, np.ndarray]:
    """Per-row L^2(0, L_x) energy computed in physical space and from the spectrum."""
    physical = (f.values**2).sum(axis=0) * f.grid.dx
    spectral = f.grid.L_x * (np.abs(forward_transform(f).coeffs) ** 2).sum(axis=0)
    return physical, spectral
