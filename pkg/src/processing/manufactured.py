"""Manufactured solution and its forcing, derived symbolically.

    u*     = a0 e^{-t/2} sin(k x) y e^{-y}
    theta* = b0 e^{-t/2} cos(k x) (1 + y) e^{-y},   k = 2 pi / L_x

Both satisfy the wall conditions u* = 0 and d_y theta* = 0 at y = 0.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Tuple

import numpy as np
import sympy as sp
from loguru import logger

from processing.grid import Field, Grid


@dataclass(frozen=True)
class ManufacturedSolution:
    L_x: float
    theta_E: float = 1.0
    nu: float = 0.0
    a0: float = 0.5
    b0: float = 0.2

    @cached_property
    def _symbols(self):
        x, y, t = sp.symbols("x y t", real=True)
        s = sp.symbols("s", nonnegative=True)
        k, a0, b0, theta_E, nu = sp.symbols("k a0 b0 theta_E nu", positive=True)
        a = a0 * sp.exp(-t / 2)
        b = b0 * sp.exp(-t / 2)
        u = a * sp.sin(k * x) * y * sp.exp(-y)
        theta = b * sp.cos(k * x) * (1 + y) * sp.exp(-y)

        u_y = sp.diff(u, y)
        integrand = (-sp.diff(u, x) + u_y**2).subs(y, s)
        v = sp.integrate(sp.expand(integrand), (s, 0, y)) + sp.diff(theta, y)
        c = theta + theta_E

        force_u = (
            sp.diff(u, t)
            + u * sp.diff(u, x)
            + v * u_y
            - c * sp.diff(u, y, 2)
            - nu * sp.diff(u, x, 2)
        )
        force_theta = (
            sp.diff(theta, t)
            + u * sp.diff(theta, x)
            + v * sp.diff(theta, y)
            - c * sp.diff(theta, y, 2)
            - c * u_y**2
            - nu * sp.diff(theta, x, 2)
        )
        logger.debug("Manufactured forcing derived symbolically.")
        args = (x, y, t, k, a0, b0, theta_E, nu)
        exprs = {"u": u, "theta": theta, "v": v, "force_u": force_u, "force_theta": force_theta}
        return args, exprs

    @cached_property
    def _functions(self) -> dict:
        args, exprs = self._symbols
        return {name: sp.lambdify(args, expr, "numpy") for name, expr in exprs.items()}

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.L_x

    def _field(self, name: str, grid: Grid, t: float) -> Field:
        X, Y = np.meshgrid(grid.x_nodes, grid.y_nodes, indexing="ij")
        params = (self.wavenumber, self.a0, self.b0, self.theta_E, self.nu)
        values = np.broadcast_to(self._functions[name](X, Y, t, *params), grid.shape)
        return Field(grid, np.array(values, dtype=float), t)

    def exact(self, grid: Grid, t: float) -> Tuple[Field, Field]:
        return self._field("u", grid, t), self._field("theta", grid, t)

    def exact_v(self, grid: Grid, t: float) -> Field:
        return self._field("v", grid, t)

    def forcing(self, grid: Grid, t: float) -> Tuple[Field, Field]:
        return self._field("force_u", grid, t), self._field("force_theta", grid, t)

    def forcing_callback(self, grid: Grid) -> Callable[[float], Tuple[Field, Field]]:
        return lambda t: self.forcing(grid, t)
