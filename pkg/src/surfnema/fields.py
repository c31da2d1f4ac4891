"""Field containers and surface calculus on a chart.

Embedded (Cartesian proxy) fields are plain arrays with the grid axes
leading, e.g. a 3x3 tensor field has shape ``(N1, N2, 3, 3)``.  Tangential
fields in chart components use the trailing shapes ``(2,)`` and ``(2, 2)``.

The componentwise derivative appends its (tangential) derivative slot as the
last axis.  Two componentwise divergences are provided:

* ``div_c`` (weak / adjoint form): ``mu^-1 d_j(mu R . d^j X)``.  Its discrete
  version is the exact negative adjoint of ``grad_c_field``.
* ``Div_c`` (trace form): contraction of the last two slots of ``grad_c``.

They differ by ``H (R . nu)``; ``div_c(..., form="pointwise")`` returns
``Div_c R + H R nu``, which is the same operator at the continuous level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotAQTensor, ShapeMismatch, UnknownSubspace
from .geometry import ChartGeometry

__all__ = [
    "ScalarField",
    "TangentVectorField",
    "TangentTensor2Field",
    "EmbeddedTensor2Field",
    "sym",
    "skew",
    "tr",
    "ddot",
    "outer",
    "normal_projector",
    "surface_identity",
    "project",
    "SUBSPACES",
    "to_embedded",
    "to_components",
    "tensor_to_embedded",
    "tensor_to_components",
    "covariant_derivative",
    "covariant_divergence",
    "componentwise_derivative",
    "tangential_derivative",
    "div_c",
    "Div_c",
    "divergences",
    "grad_c",
    "laplace_beltrami",
    "laplace_c",
    "bochner_laplacian",
    "laplacians",
    "l2_inner",
]


# ----------------------------------------------------------------- containers


def _finite(a):
    if not np.all(np.isfinite(a)):
        raise ValueError("field contains NaN or Inf")
    return a


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray

    def __post_init__(self):
        v = _finite(np.asarray(self.values, dtype=float))
        if v.ndim != 2:
            raise ShapeMismatch("scalar field must have shape (N1, N2)")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class TangentVectorField:
    """Contravariant components ``(w^1, w^2)`` per node."""

    values: np.ndarray

    def __post_init__(self):
        v = _finite(np.asarray(self.values, dtype=float))
        if v.ndim != 3 or v.shape[-1] != 2:
            raise ShapeMismatch("tangent vector field must have shape (N1, N2, 2)")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


_SYM_TOL = 1e-12


@dataclass(frozen=True)
class TangentTensor2Field:
    """Contravariant 2x2 components with an optional symmetry class.

    ``cls`` is one of ``general``, ``symmetric``, ``skew`` or
    ``tangential-Q``.  The tangential-Q check needs the metric, so pass
    ``g`` when declaring that class.
    """

    values: np.ndarray
    cls: str = "general"
    g: np.ndarray | None = None

    def __post_init__(self):
        v = _finite(np.asarray(self.values, dtype=float))
        if v.ndim != 4 or v.shape[-2:] != (2, 2):
            raise ShapeMismatch("tangent tensor field must have shape (N1, N2, 2, 2)")
        scale = max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
        asym = np.max(np.abs(v - np.swapaxes(v, -1, -2))) if v.size else 0.0
        if self.cls in ("symmetric", "tangential-Q") and asym > _SYM_TOL * scale:
            raise NotAQTensor("tensor is not symmetric")
        if self.cls == "skew" and np.max(np.abs(v + np.swapaxes(v, -1, -2))) > _SYM_TOL * scale:
            raise ValueError("tensor is not skew")
        if self.cls == "tangential-Q":
            if self.g is None:
                raise ValueError("tangential-Q class needs the metric g")
            if np.max(np.abs(np.einsum("...ij,...ij->...", self.g, v))) > 1e-10 * scale:
                raise NotAQTensor("surface trace does not vanish")
        elif self.cls not in ("general", "symmetric", "skew"):
            raise UnknownSubspace(self.cls)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class EmbeddedTensor2Field:
    """Cartesian 3x3 proxy per node with an optional symmetry class.

    ``cls`` is one of ``general``, ``symmetric``, ``skew``, ``Q-tensor`` or
    ``right-tangential`` (the latter needs ``normal``).
    """

    values: np.ndarray
    cls: str = "general"
    normal: np.ndarray | None = None

    def __post_init__(self):
        v = _finite(np.asarray(self.values, dtype=float))
        if v.ndim < 2 or v.shape[-2:] != (3, 3):
            raise ShapeMismatch("embedded tensor field must end in (3, 3)")
        scale = max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
        vt = np.swapaxes(v, -1, -2)
        if self.cls == "symmetric" and np.max(np.abs(v - vt)) > _SYM_TOL * scale:
            raise ValueError("tensor is not symmetric")
        elif self.cls == "skew" and np.max(np.abs(v + vt)) > _SYM_TOL * scale:
            raise ValueError("tensor is not skew")
        elif self.cls == "Q-tensor":
            if np.max(np.abs(v - vt)) > _SYM_TOL * scale or np.max(np.abs(tr(v))) > _SYM_TOL * scale:
                raise NotAQTensor("field is not symmetric and traceless")
        elif self.cls == "right-tangential":
            if self.normal is None:
                raise ValueError("right-tangential class needs the normal field")
            if np.max(np.abs(np.einsum("...AB,...B->...A", v, self.normal))) > _SYM_TOL * scale:
                raise ValueError("R . nu does not vanish")
        elif self.cls not in ("general", "symmetric", "skew", "Q-tensor", "right-tangential"):
            raise UnknownSubspace(self.cls)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _v(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


# ------------------------------------------------------------ pointwise algebra


def sym(R):
    return 0.5 * (R + np.swapaxes(R, -1, -2))


def skew(R):
    return 0.5 * (R - np.swapaxes(R, -1, -2))


def tr(R):
    return np.trace(R, axis1=-2, axis2=-1)


def ddot(A, B):
    """Frobenius product over the last two axes."""
    return np.einsum("...ij,...ij->...", A, B)


def outer(a, b):
    return a[..., :, None] * b[..., None, :]


def normal_projector(nu):
    return outer(nu, nu)


def surface_identity(nu):
    return np.eye(nu.shape[-1]) - outer(nu, nu)


def _proj_q(R):
    S = sym(R)
    return S - (tr(S) / 3)[..., None, None] * np.eye(3)


def _proj_tan(R, nu):
    P = surface_identity(nu)
    return P @ R @ P


def _proj_tan_q(R, nu):
    P = surface_identity(nu)
    T = P @ sym(R) @ P
    return T - 0.5 * tr(T)[..., None, None] * P


def _proj_conforming(R, nu):
    Q = _proj_q(R)
    P = surface_identity(nu)
    beta = np.einsum("...A,...AB,...B->...", nu, Q, nu)
    q = P @ Q @ P - 0.5 * tr(P @ Q @ P)[..., None, None] * P
    return q + beta[..., None, None] * (outer(nu, nu) - 0.5 * P)


SUBSPACES = ("sym", "skew", "Q", "tangential", "tangential-Q", "conforming-Q", "iso")


def project(R, target: str, nu=None):
    """Orthogonal projection of 3x3 tensors onto a subspace.

    Works pointwise on arrays ending in ``(3, 3)``; ``nu`` must broadcast
    against ``R[..., 0]`` for the surface-dependent targets.
    """
    R = _v(R)
    if target == "sym":
        return sym(R)
    if target == "skew":
        return skew(R)
    if target == "Q":
        return _proj_q(R)
    if target == "iso":
        return (tr(R) / 3)[..., None, None] * np.eye(3)
    if target in ("tangential", "tangential-Q", "conforming-Q"):
        if nu is None:
            raise ValueError(f"projection {target!r} needs the normal field")
        nu = _v(nu)
        if target == "tangential":
            return _proj_tan(R, nu)
        if target == "tangential-Q":
            return _proj_tan_q(R, nu)
        return _proj_conforming(R, nu)
    raise UnknownSubspace(target)


# ------------------------------------------------- chart <-> embedded conversion


def to_embedded(chart: ChartGeometry, w):
    """``w^i d_i X`` for contravariant components ``w``."""
    return np.einsum("...i,...iA->...A", _v(w), chart.tangent_basis)


def to_components(chart: ChartGeometry, W):
    """Contravariant components of the tangential part of an embedded vector."""
    return np.einsum("...A,...iA->...i", _v(W), chart.dual_basis)


def tensor_to_embedded(chart: ChartGeometry, t):
    b = chart.tangent_basis
    return np.einsum("...ij,...iA,...jB->...AB", _v(t), b, b)


def tensor_to_components(chart: ChartGeometry, T):
    d = chart.dual_basis
    return np.einsum("...AB,...iA,...jB->...ij", _v(T), d, d)


# ------------------------------------------------------- covariant calculus


def covariant_derivative(chart: ChartGeometry, field, variance: str = "contra"):
    """Covariant derivative of a tangential field, derivative slot last.

    Scalars give ``f_|k``; vectors ``w^i_|k``; 2-tensors ``t^{ij}_|k`` (or
    ``t_{ij|k}`` with ``variance="co"``).
    """
    f = _v(field)
    chart.check(f)
    Gam = chart.christoffel
    d = chart.grad_components(f)
    rank = f.ndim - 2
    if rank == 0:
        return d
    if rank == 1:
        return d + np.einsum("...ikj,...j->...ik", Gam, f)
    if rank == 2:
        if variance == "contra":
            return (d + np.einsum("...ikm,...mj->...ijk", Gam, f)
                    + np.einsum("...jkm,...im->...ijk", Gam, f))
        if variance == "co":
            return (d - np.einsum("...mki,...mj->...ijk", Gam, f)
                    - np.einsum("...mkj,...im->...ijk", Gam, f))
        raise ValueError("variance must be 'contra' or 'co'")
    raise ShapeMismatch("covariant derivative supports ranks 0 to 2")


def covariant_divergence(chart: ChartGeometry, field):
    """``w^i_|i`` for vectors, ``t^{ij}_|j`` for contravariant 2-tensors.

    Evaluated in the conservative form ``mu^-1 d_j(mu t^{.j})`` plus the
    Christoffel term of the free index.
    """
    f = _v(field)
    chart.check(f)
    mu = chart.area_form
    rank = f.ndim - 2
    if rank == 1:
        return (chart.diff(mu * f[..., 0], 0) + chart.diff(mu * f[..., 1], 1)) / mu
    if rank == 2:
        m = mu[..., None]
        out = (chart.diff(m * f[..., 0], 0) + chart.diff(m * f[..., 1], 1)) / m
        return out + np.einsum("...ikm,...mk->...i", chart.christoffel, f)
    raise ShapeMismatch("covariant divergence needs a vector or 2-tensor")


# ---------------------------------------------------- componentwise calculus


def componentwise_derivative(chart: ChartGeometry, R):
    """``grad_C R = sum_j d_j R (x) d^j X``; appends a tangential slot."""
    R = _v(R)
    chart.check(R)
    dR = chart.grad_components(R)  # [..., j]
    n1, n2 = R.shape[:2]
    flat = dR.reshape(n1, n2, -1, 2) @ chart.dual_basis
    return flat.reshape(R.shape + (3,))


def tangential_derivative(chart: ChartGeometry, T):
    """Covariant derivative of an embedded tangential tensor.

    Projects every free slot of ``grad_C T`` onto the tangent plane.
    """
    T = _v(T)
    G = componentwise_derivative(chart, T)
    P = chart.surface_identity
    for ax in range(T.ndim - 2):
        G = np.moveaxis(G, 2 + ax, -1)
        G = np.einsum("...AB,...B->...A", _bcast(P, G.ndim - 3), G)
        G = np.moveaxis(G, -1, 2 + ax)
    return G


def div_c(chart: ChartGeometry, R, form: str = "weak"):
    """Adjoint componentwise divergence, contracting the last slot.

    ``form="weak"`` uses the conservative discretization which is the exact
    discrete negative adjoint of ``componentwise_derivative``;
    ``form="pointwise"`` evaluates ``Div_c R + H (R . nu)``.
    """
    R = _v(R)
    chart.check(R)
    extra = R.ndim - 3
    if form == "pointwise":
        Rn = np.einsum("...Z,...Z->...", R, _bcast(chart.normal, extra))
        return Div_c(chart, R) + _bcast(chart.mean_curv, extra) * Rn
    if form != "weak":
        raise ValueError("form must be 'weak' or 'pointwise'")
    mu = _bcast(chart.area_form, extra)
    d = chart.dual_basis
    out = 0.0
    for j in range(2):
        flux = np.einsum("...Z,...Z->...", R, _bcast(d[..., j, :], extra))
        out = out + chart.diff(mu * flux, j)
    return out / mu


def _bcast(a, tail):
    """Insert ``tail`` singleton axes right after the grid axes."""
    return a.reshape(a.shape[:2] + (1,) * max(tail, 0) + a.shape[2:])


def Div_c(chart: ChartGeometry, R):
    """Trace divergence ``Tr(grad_C R)`` over the last two slots."""
    R = _v(R)
    chart.check(R)
    dR = chart.grad_components(R)  # [..., Z, j]
    d = chart.dual_basis
    return np.einsum("...Zj,...jZ->...", dR, _bcast(d, R.ndim - 3))


def divergences(chart: ChartGeometry, R):
    """All three divergence variants of an embedded field.

    ``div`` (covariant) is only defined for tangential inputs and is computed
    from chart components; it is ``None`` otherwise.
    """
    R = _v(R)
    out = {"div_C": div_c(chart, R), "Div_C": Div_c(chart, R), "div": None}
    nu = chart.normal
    if R.ndim == 3:
        if np.max(np.abs(np.einsum("...A,...A->...", R, nu))) < 1e-12 * max(1.0, np.max(np.abs(R))):
            out["div"] = covariant_divergence(chart, to_components(chart, R))
    elif R.ndim == 4:
        T = tensor_to_embedded(chart, tensor_to_components(chart, R))
        if np.max(np.abs(T - R)) < 1e-12 * max(1.0, np.max(np.abs(R))):
            out["div"] = to_embedded(chart, covariant_divergence(chart, tensor_to_components(chart, R)))
    return out


def grad_c(chart: ChartGeometry, f):
    """``Grad_C f = grad f + H f nu``."""
    f = _v(f)
    chart.check(f, ())
    return componentwise_derivative(chart, f) + (chart.mean_curv * f)[..., None] * chart.normal


def laplace_beltrami(chart: ChartGeometry, f):
    """Conservative Laplace-Beltrami operator applied componentwise.

    Accepts any array with the grid axes leading; equals
    ``div_c(componentwise_derivative(f))`` in the weak form.
    """
    f = _v(f)
    chart.check(f)
    extra = f.ndim - 2
    df = chart.grad_components(f)
    flux = np.einsum("...ij,...j->...i", _bcast(chart.g_inv, extra), df)
    flux = flux * _bcast(chart.area_form, extra + 1)
    m = _bcast(chart.area_form, extra)
    return (chart.diff(flux[..., 0], 0) + chart.diff(flux[..., 1], 1)) / m


def laplace_c(chart: ChartGeometry, R):
    """Componentwise Laplacian ``div_C grad_C R`` of an embedded field."""
    return laplace_beltrami(chart, R)


def bochner_laplacian(chart: ChartGeometry, T):
    """Rough (Bochner) Laplacian of an embedded tangential field.

    Scalars fall back to the Laplace-Beltrami operator.
    """
    T = _v(T)
    if T.ndim == 2:
        return laplace_beltrami(chart, T)
    G1 = tangential_derivative(chart, T)
    G2 = tangential_derivative(chart, G1)
    return np.trace(G2, axis1=-2, axis2=-1)


def laplacians(chart: ChartGeometry, R, tangential: bool = False):
    """Bochner Laplacian for tangential inputs, componentwise one otherwise."""
    return bochner_laplacian(chart, R) if tangential else laplace_c(chart, R)


def l2_inner(chart: ChartGeometry, A, B) -> float:
    """``<A, B>_{L2}`` with full contraction over the trailing axes."""
    A, B = _v(A), _v(B)
    if A.shape != B.shape:
        raise ShapeMismatch(f"{A.shape} vs {B.shape}")
    dens = (A * B).reshape(A.shape[:2] + (-1,)).sum(axis=-1)
    return float(np.sum(dens * chart.area_form) * chart.cell_area)
