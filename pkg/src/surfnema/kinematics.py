"""Deformation gradients and observer-invariant time derivatives.

Everything is expressed through embedded proxies.  Time derivatives are
assembled from partial-time-derivative data supplied by the caller (a solver
history or an analytic test), never estimated here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .fields import (
    componentwise_derivative,
    outer,
    skew,
    surface_identity,
    sym,
    tangential_derivative,
    to_embedded,
)
from .geometry import ChartGeometry

__all__ = [
    "VelocityState",
    "DeformationGradients",
    "gradients_from_velocity_gradient",
    "deformation_gradients",
    "material_rate_Q",
    "jaumann_rate_Q",
    "jaumann_from_material",
    "material_from_jaumann",
    "material_rate_q",
    "jaumann_rate_q",
    "scalar_rate",
    "material_acceleration",
]


@dataclass(frozen=True)
class VelocityState:
    """Material velocity ``V = v + v_perp nu`` and the observer's tangential velocity."""

    v: np.ndarray
    v_perp: np.ndarray
    observer_v: np.ndarray | None = None

    @classmethod
    def zeros(cls, chart: ChartGeometry):
        n = tuple(chart.grid_shape)
        return cls(np.zeros(n + (2,)), np.zeros(n))

    def tangential(self, chart):
        return to_embedded(chart, self.v)

    def embedded(self, chart):
        return self.tangential(chart) + np.asarray(self.v_perp)[..., None] * chart.normal

    def relative(self, chart):
        """``u = v - v_o`` as an embedded tangential vector."""
        u = np.asarray(self.v, dtype=float)
        if self.observer_v is not None:
            u = u - np.asarray(self.observer_v, dtype=float)
        return to_embedded(chart, u)


@dataclass(frozen=True)
class DeformationGradients:
    """Embedded proxies of the surface deformation gradients of a velocity.

    ``Gcal = grad_C V - b x nu``; ``G = Id_S grad_C V``; ``S = sym G``;
    ``Acal = skew Gcal``; ``A = skew G``; ``b = nu grad_C V``.
    """

    Gcal: np.ndarray
    G: np.ndarray
    S: np.ndarray
    Acal: np.ndarray
    A: np.ndarray
    b: np.ndarray


def gradients_from_velocity_gradient(gradV, nu) -> DeformationGradients:
    """Pointwise gradients from a right-tangential ``grad_C V``."""
    gradV = np.asarray(gradV, dtype=float)
    nu = np.asarray(nu, dtype=float)
    b = np.einsum("...A,...AB->...B", nu, gradV)
    Gcal = gradV - outer(b, nu)
    G = surface_identity(nu) @ gradV
    return DeformationGradients(Gcal=Gcal, G=G, S=sym(G), Acal=skew(Gcal), A=skew(G), b=b)


def _velocity_embedded(chart, W):
    if isinstance(W, VelocityState):
        return W.embedded(chart)
    W = np.asarray(W, dtype=float)
    chart.check(W, (3,))
    return W


def deformation_gradients(chart: ChartGeometry, W) -> DeformationGradients:
    """Deformation gradients of a ``VelocityState`` or embedded vector field."""
    V = _velocity_embedded(chart, W)
    return gradients_from_velocity_gradient(componentwise_derivative(chart, V), chart.normal)


# ------------------------------------------------------------------- rates


def jaumann_from_material(DmQ, Acal, Q):
    return DmQ - Acal @ Q + Q @ Acal


def material_from_jaumann(DJQ, Acal, Q):
    return DJQ + Acal @ Q - Q @ Acal


def _advect(chart, T, u):
    """``(grad_C T) u`` contracted on the derivative slot."""
    return np.einsum("...Z,...Z->...", componentwise_derivative(chart, T), _expand(u, T.ndim - 2))


def _expand(u, extra):
    return u.reshape(u.shape[:2] + (1,) * extra + u.shape[2:])


def material_rate_Q(chart: ChartGeometry, Qdot_obs, state: VelocityState, Q):
    """``D_m Q = d_t Q + (grad_C Q) u`` for Cartesian proxy data."""
    Q = np.asarray(Q, dtype=float)
    Qdot_obs = np.asarray(Qdot_obs, dtype=float)
    if Q.shape != Qdot_obs.shape:
        raise ShapeMismatch("rate data and field differ in shape")
    chart.check(Q, (3, 3))
    return Qdot_obs + _advect(chart, Q, state.relative(chart))


def jaumann_rate_Q(chart: ChartGeometry, Qdot_obs, state: VelocityState, Q, defgrad=None):
    """``D_J Q = D_m Q - Acal Q + Q Acal``."""
    dg = defgrad or deformation_gradients(chart, state)
    return jaumann_from_material(material_rate_Q(chart, Qdot_obs, state, Q), dg.Acal, Q)


def material_rate_q(chart: ChartGeometry, qdot_obs, state: VelocityState, q):
    """Material rate of a tangential Q-tensor (embedded proxy).

    ``qdot_obs`` is the embedded image of the observer-basis component
    rates ``d_t q^{ij} d_i X x d_j X``.
    """
    q = np.asarray(q, dtype=float)
    out = np.asarray(qdot_obs, dtype=float) + np.einsum(
        "...Z,...Z->...", tangential_derivative(chart, q), _expand(state.relative(chart), 2)
    )
    B = chart.shape_embedded
    vp = np.asarray(state.v_perp, dtype=float)[..., None, None]
    M = -vp * B
    if state.observer_v is not None:
        wo = to_embedded(chart, state.observer_v)
        M = M + tangential_derivative(chart, wo)
    return out + M @ q + q @ np.swapaxes(M, -1, -2)


def jaumann_rate_q(chart: ChartGeometry, qdot_obs, state: VelocityState, q, defgrad=None):
    dg = defgrad or deformation_gradients(chart, state)
    return material_rate_q(chart, qdot_obs, state, q) - dg.A @ q + q @ dg.A


def scalar_rate(chart: ChartGeometry, fdot_obs, state: VelocityState, f):
    """``f' = d_t f + grad_u f``."""
    return np.asarray(fdot_obs, dtype=float) + _advect(chart, np.asarray(f, dtype=float), state.relative(chart))


def material_acceleration(chart: ChartGeometry, vdot_obs, vperp_dot_obs, state: VelocityState):
    """Material acceleration for a fixed Eulerian chart (observer at rest).

    ``vdot_obs`` holds ``d_t v^i`` (chart components).  Returns the embedded
    vector ``v' - v_perp (grad v_perp + B v) + (v_perp' + grad_v v_perp + B(v, v)) nu``
    with ``v' = d_t v^i d_i X + grad_v v - v_perp B v``.
    """
    v = state.tangential(chart)
    vp = np.asarray(state.v_perp, dtype=float)
    B = chart.shape_embedded
    Bv = np.einsum("...AB,...B->...A", B, v)
    grad_v_v = np.einsum("...AZ,...Z->...A", tangential_derivative(chart, v), v)
    vdot = to_embedded(chart, vdot_obs) + grad_v_v - vp[..., None] * Bv
    dvp = componentwise_derivative(chart, vp)
    vp_dot = np.asarray(vperp_dot_obs, dtype=float) + np.einsum("...A,...A->...", dvp, v)
    normal = vp_dot + np.einsum("...A,...A->...", dvp, v) + np.einsum("...A,...A->...", Bv, v)
    return vdot - vp[..., None] * (dvp + Bv) + normal[..., None] * chart.normal
