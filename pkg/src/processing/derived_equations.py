"""Residuals of the evolution equations satisfied by d_y u, d_y theta, d_y^2 u and d_y^2 theta.

Each residual is (left side - right side) assembled from two consecutive
solver states: the time derivative by a backward difference, every other
term at the earlier state. Interior rows are reported; the wall row is
covered by the boundary identity of the d_y^2 theta equation.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.fft

from processing.grid import Field, cumulative_integral_y, d_dx, d_dy, dealiased_product
from processing.solver import SolveState


class DerivedQuantity(str, Enum):
    DY_U = "dy_u"
    DY_THETA = "dy_theta"
    DYY_U = "dyy_u"
    DYY_THETA = "dyy_theta"


@dataclass
class DerivedResidual:
    which: DerivedQuantity
    interior: float
    boundary: Optional[float] = None


def _prod(*factors: Field) -> np.ndarray:
    return dealiased_product(*factors).values


def _interior_max(values: np.ndarray) -> float:
    return float(np.abs(values[:, 1:-1]).max()) if values.shape[1] > 2 else 0.0


class _Terms:
    """Every field the four residuals need, evaluated at one state."""

    def __init__(self, state: SolveState):
        d = state.derivatives
        self.u = state.u
        self.theta = state.theta
        self.c = state.theta.with_values(state.theta.values + state.theta_E)
        self.u_y, self.u_yy, self.u_yyy = d["u_y"], d["u_yy"], d["u_yyy"]
        self.th_y, self.th_yy, self.th_yyy = d["theta_y"], d["theta_yy"], d["theta_yyy"]
        self.u_yyyy = d_dy(self.u_yyy, 1)
        self.u_x = d_dx(self.u)
        self.u_xy = d_dx(self.u_y)
        self.th_x = d_dx(self.theta)
        self.th_xy = d_dx(self.th_y)
        self.int_ux = cumulative_integral_y(self.u_x)
        self.int_uy2 = cumulative_integral_y(dealiased_product(self.u_y, self.u_y))


def _forcing_derivative(
    forcing: Optional[Tuple[Field, Field]], index: int, order: int, like: Field
) -> np.ndarray:
    if forcing is None:
        return np.zeros_like(like.values)
    return d_dy(forcing[index], order).values


def derived_equation_residual(
    prev: SolveState,
    curr: SolveState,
    which,
    forcing: Optional[Tuple[Field, Field]] = None,
) -> DerivedResidual:
    """Grid max-norm of the residual of one derived equation between two states.

    forcing, when given, is the (F_u, F_theta) pair used for the step prev -> curr.
    """
    which = DerivedQuantity(which)
    dt = curr.t - prev.t
    if dt <= 0:
        raise ValueError("states must be consecutive in time")
    a = _Terms(prev)
    nu = prev.nu

    if which is DerivedQuantity.DY_U:
        q_prev, q_curr = a.u_y, curr.derivatives["u_y"]
        r = (
            _prod(a.u, d_dx(a.u_y))
            + _prod(a.u_y, a.th_yy)
            + _prod(a.u_y, a.u_y, a.u_y)
            - _prod(a.int_ux, a.u_yy)
            + _prod(a.int_uy2, a.u_yy)
            - _prod(a.c, a.u_yyy)
            - _forcing_derivative(forcing, 0, 1, a.u)
        )
    elif which is DerivedQuantity.DY_THETA:
        q_prev, q_curr = a.th_y, curr.derivatives["theta_y"]
        r = (
            _prod(a.u_y, a.th_x)
            + _prod(a.u, a.th_xy)
            - _prod(a.th_y, a.u_x)
            + _prod(a.th_y, a.th_yy)
            - _prod(a.int_ux, a.th_yy)
            + _prod(a.int_uy2, a.th_yy)
            - _prod(a.c, a.th_yyy)
            - 2.0 * _prod(a.c, a.u_y, a.u_yy)
            - _forcing_derivative(forcing, 1, 1, a.u)
        )
    elif which is DerivedQuantity.DYY_U:
        q_prev, q_curr = a.u_yy, curr.derivatives["u_yy"]
        w_coefficient = a.th_yy.values - a.u_x.values + 4.0 * _prod(a.u_y, a.u_y)
        r = (
            _prod(a.u, d_dx(a.u_yy))
            + _prod(a.u_xy, a.u_y)
            + _prod(a.th_yyy, a.u_y)
            + _prod(a.u_yy.with_values(w_coefficient), a.u_yy)
            + _prod(a.int_uy2 - a.int_ux - a.th_y, a.u_yyy)
            - _prod(a.c, a.u_yyyy)
            - _forcing_derivative(forcing, 0, 2, a.u)
        )
    else:
        q_prev, q_curr = a.th_yy, curr.derivatives["theta_yy"]
        s_coefficient = a.th_yy.values - 2.0 * a.u_x.values + _prod(a.u_y, a.u_y)
        flux = _prod(a.c, a.th_yyy) - _prod(a.u_y, a.th_x) + _forcing_derivative(forcing, 1, 1, a.u)
        r = (
            _prod(a.u_y, a.th_xy)
            - _prod(a.th_y, a.u_xy)
            + _prod(a.u, d_dx(a.th_yy))
            + _prod(a.th_yy.with_values(s_coefficient), a.th_yy)
            + _prod(a.int_uy2 - a.int_ux + a.th_y, a.th_yyy)
            - 2.0 * _prod(a.th_y, a.u_y, a.u_yy)
            - 2.0 * _prod(a.c, a.u_yy, a.u_yy)
            - 2.0 * _prod(a.c, a.u_y, a.u_yyy)
            - d_dy(a.u.with_values(flux), 1).values
        )

    if nu > 0:
        r = r - nu * d_dx(q_prev, 2).values
    residual = (q_curr.values - q_prev.values) / dt + r
    result = DerivedResidual(which, _interior_max(residual))
    if which is DerivedQuantity.DYY_THETA:
        result.boundary = wall_identity_residual(prev, forcing)
    return result


def wall_identity_residual(state: SolveState, forcing: Optional[Tuple[Field, Field]] = None) -> float:
    """max_x |d_y u d_x theta - c d_y^3 theta - 2 c d_y u d_y^2 u - d_y F_theta| at y = 0.

    Without forcing d_y^2 u vanishes at the wall and this is the identity
    [d_y u d_x theta - (theta + theta_E) d_y^3 theta]_{y=0} = 0.
    """
    d = state.derivatives
    c = state.theta.values[:, 0] + state.theta_E
    u_y = d["u_y"].values[:, 0]
    th_x = d_dx(state.theta).values[:, 0]
    wall = u_y * th_x - c * d["theta_yyy"].values[:, 0] - 2.0 * c * u_y * d["u_yy"].values[:, 0]
    if forcing is not None:
        wall = wall - d_dy(forcing[1], 1).values[:, 0]
    return float(np.abs(wall).max())


def u_phi_residual(
    prev: SolveState,
    curr: SolveState,
    radius_prev: float,
    radius_curr: float,
    mu_dot: float,
    lam: float,
    forcing: Optional[Tuple[Field, Field]] = None,
) -> float:
    """Residual of the evolution of u_Phi = e^{Phi(t, D)} u between two states:
    d_t u_Phi + lambda mu' |D| u_Phi + [u d_x u + v d_y u - c d_y^2 u - nu d_x^2 u - F_u]_Phi.
    """
    grid = prev.grid
    dt = curr.t - prev.t
    if dt <= 0:
        raise ValueError("states must be consecutive in time")
    amp_prev = np.exp(radius_prev * grid.abs_xi)[:, None]
    amp_curr = np.exp(radius_curr * grid.abs_xi)[:, None]
    c = prev.theta.with_values(prev.theta.values + prev.theta_E)
    rhs = (
        _prod(prev.u, d_dx(prev.u))
        + _prod(prev.v, prev.derivatives["u_y"])
        - _prod(c, prev.derivatives["u_yy"])
        - prev.nu * d_dx(prev.u, 2).values
    )
    if forcing is not None:
        rhs = rhs - forcing[0].values
    u_prev = scipy.fft.fft(prev.u.values, axis=0)
    u_curr = scipy.fft.fft(curr.u.values, axis=0)
    spectral = (
        (amp_curr * u_curr - amp_prev * u_prev) / dt
        + lam * mu_dot * grid.abs_xi[:, None] * amp_prev * u_prev
        + amp_prev * scipy.fft.fft(rhs, axis=0)
    )
    return _interior_max(scipy.fft.ifft(spectral, axis=0).real)
