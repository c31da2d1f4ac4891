"""Periodic chart surfaces and their fundamental forms.

Two closed-form surfaces are supported: a flat square torus and a torus of
revolution embedded in R^3.  A chart is sampled on a uniform periodic grid
and every geometric field is stored per node with the grid axes leading,
i.e. a vector field has shape ``(N1, N2, 3)``.

Orientation: ``normal = d1X x d2X / |d1X x d2X|``.  With ``(theta, phi)``
ordered as below this normal points towards the core of the embedded torus,
which makes the shape operator ``B = -grad_C normal`` positive definite on
the outer equator (``H = 1/r + 1/(R + r)``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.fft as sfft

from .errors import DegenerateMetric, NonPeriodicDomain, ShapeMismatch

__all__ = [
    "FlatTorus",
    "EmbeddedTorus",
    "SurfaceKind",
    "ChartGeometry",
    "build_chart",
    "chart_from_embedding",
    "area_integral",
    "spectral_derivative",
    "fd4_derivative",
    "riemann_gauss_curvature",
    "gauss_relation_residual",
    "fft_workers",
]

SCHEMES = ("spectral", "fd4")


def fft_workers() -> int:
    """Worker count for FFTs, taken from ``SURFNEMA_THREADS`` (0 = all cores)."""
    raw = os.environ.get("SURFNEMA_THREADS", "1").strip() or "1"
    n = int(raw)
    return -1 if n <= 0 else n


@dataclass(frozen=True)
class FlatTorus:
    P1: float = 2 * np.pi
    P2: float = 2 * np.pi

    def __post_init__(self):
        if not (self.P1 > 0 and self.P2 > 0):
            raise ValueError("side lengths must be positive")


@dataclass(frozen=True)
class EmbeddedTorus:
    R_maj: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if not (self.R_maj > 0 and self.r > 0):
            raise ValueError("radii must be positive")


SurfaceKind = Union[FlatTorus, EmbeddedTorus]


# ---------------------------------------------------------------- derivatives


def spectral_derivative(f: np.ndarray, axis: int, period: float) -> np.ndarray:
    """Fourier derivative along ``axis`` with the Nyquist mode removed.

    Dropping the Nyquist mode keeps the discrete operator real and skew,
    so summation by parts holds exactly.
    """
    n = f.shape[axis]
    k = 2 * np.pi * sfft.rfftfreq(n, d=period / n)
    if n % 2 == 0:
        k[-1] = 0.0
    shape = [1] * f.ndim
    shape[axis] = k.size
    fh = sfft.rfft(f, axis=axis, workers=fft_workers())
    fh *= 1j * k.reshape(shape)
    return sfft.irfft(fh, n=n, axis=axis, workers=fft_workers())


def fd4_derivative(f: np.ndarray, axis: int, period: float) -> np.ndarray:
    """Fourth-order centred difference on a periodic grid."""
    h = period / f.shape[axis]
    r = lambda s: np.roll(f, s, axis=axis)  # noqa: E731
    return (-r(-2) + 8 * r(-1) - 8 * r(1) + r(2)) / (12 * h)


_DERIV = {"spectral": spectral_derivative, "fd4": fd4_derivative}


# ---------------------------------------------------------------- the chart


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChartGeometry:
    """Sampled parameterization with all first and second order geometry.

    Index conventions: ``tangent_basis[..., i, :] = d_i X``,
    ``christoffel[..., k, i, j] = Gamma^k_ij``, ``shape_op`` holds the
    covariant components ``II_ij``.
    """

    kind: object
    grid_shape: tuple
    scheme: str
    periods: tuple
    X: np.ndarray
    tangent_basis: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray
    normal: np.ndarray
    shape_op: np.ndarray
    mean_curv: np.ndarray
    gauss_curv: np.ndarray
    levi_civita: np.ndarray
    area_form: np.ndarray
    coords: tuple = field(repr=False)

    # -- grid helpers
    @property
    def spacing(self) -> tuple:
        return tuple(p / n for p, n in zip(self.periods, self.grid_shape))

    @property
    def cell_area(self) -> float:
        h1, h2 = self.spacing
        return h1 * h2

    @property
    def is_flat(self) -> bool:
        return isinstance(self.kind, FlatTorus)

    def diff(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Chart derivative along grid axis 0 or 1 using the chart's scheme."""
        self.check(f)
        return _DERIV[self.scheme](np.asarray(f, dtype=float), axis, self.periods[axis])

    def grad_components(self, f: np.ndarray) -> np.ndarray:
        """Stack of both chart partials, new axis placed last."""
        return np.stack([self.diff(f, 0), self.diff(f, 1)], axis=-1)

    def check(self, f, trailing=None):
        f = np.asarray(f)
        if f.shape[:2] != tuple(self.grid_shape):
            raise ShapeMismatch(f"field grid {f.shape[:2]} != chart grid {self.grid_shape}")
        if trailing is not None and f.shape[2:] != tuple(trailing):
            raise ShapeMismatch(f"expected trailing shape {trailing}, got {f.shape[2:]}")
        return f

    # -- embedded proxies
    @cached_property
    def dual_basis(self) -> np.ndarray:
        """``d^i X = g^{ij} d_j X`` with shape (N1, N2, 2, 3)."""
        return _readonly(np.einsum("...ij,...jA->...iA", self.g_inv, self.tangent_basis))

    @cached_property
    def surface_identity(self) -> np.ndarray:
        """Tangential projector ``Id_S = Id - nu x nu``."""
        nu = self.normal
        return _readonly(np.eye(3) - nu[..., :, None] * nu[..., None, :])

    @cached_property
    def shape_embedded(self) -> np.ndarray:
        """Shape operator as a symmetric tangential 3x3 field."""
        d = self.dual_basis
        return _readonly(np.einsum("...ij,...iA,...jB->...AB", self.shape_op, d, d))

    @cached_property
    def mean_curv_gradient(self) -> np.ndarray:
        """Embedded tangential gradient of H."""
        dH = self.grad_components(self.mean_curv)
        return _readonly(np.einsum("...i,...iA->...A", dH, self.dual_basis))

    @cached_property
    def mean_curv_laplacian(self) -> np.ndarray:
        f = self.mean_curv
        flux = self.area_form[..., None] * np.einsum("...ij,...j->...i", self.g_inv, self.grad_components(f))
        return _readonly((self.diff(flux[..., 0], 0) + self.diff(flux[..., 1], 1)) / self.area_form)

    def area(self) -> float:
        return area_integral(self, np.ones(self.grid_shape))


def _torus_closed_form(kind: EmbeddedTorus, th, ph):
    R, r = float(kind.R_maj), float(kind.r)
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    rho = R + r * ct
    z = np.zeros_like(th)
    X = np.stack([rho * cp, rho * sp, r * st], axis=-1)
    d1 = np.stack([-r * st * cp, -r * st * sp, r * ct], axis=-1)
    d2 = np.stack([-rho * sp, rho * cp, z], axis=-1)
    nu = -np.stack([ct * cp, ct * sp, st], axis=-1)
    g = np.zeros(th.shape + (2, 2))
    g[..., 0, 0] = r * r
    g[..., 1, 1] = rho * rho
    det = g[..., 0, 0] * g[..., 1, 1]
    if np.any(det <= 0):
        raise DegenerateMetric("torus metric degenerates (R_maj <= r)")
    gi = np.zeros_like(g)
    gi[..., 0, 0] = 1 / (r * r)
    gi[..., 1, 1] = 1 / (rho * rho)
    Gam = np.zeros(th.shape + (2, 2, 2))
    Gam[..., 0, 1, 1] = rho * st / r
    Gam[..., 1, 0, 1] = -r * st / rho
    Gam[..., 1, 1, 0] = -r * st / rho
    II = np.zeros_like(g)
    II[..., 0, 0] = r
    II[..., 1, 1] = rho * ct
    H = 1 / r + ct / rho
    K = ct / (r * rho)
    mu = r * rho
    return X, np.stack([d1, d2], axis=-2), g, gi, Gam, nu, II, H, K, mu


def _flat_closed_form(kind: FlatTorus, t1, t2):
    shp = t1.shape
    X = np.stack([t1, t2, np.zeros(shp)], axis=-1)
    basis = np.zeros(shp + (2, 3))
    basis[..., 0, 0] = 1.0
    basis[..., 1, 1] = 1.0
    g = np.broadcast_to(np.eye(2), shp + (2, 2)).copy()
    nu = np.zeros(shp + (3,))
    nu[..., 2] = 1.0
    z = np.zeros(shp)
    return X, basis, g, g.copy(), np.zeros(shp + (2, 2, 2)), nu, np.zeros(shp + (2, 2)), z, z.copy(), np.ones(shp)


def _levi_civita(mu):
    E = np.zeros(mu.shape + (2, 2))
    E[..., 0, 1] = mu
    E[..., 1, 0] = -mu
    return E


def _check_grid(grid_shape, scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown derivative scheme {scheme!r}; expected one of {SCHEMES}")
    gs = tuple(int(n) for n in grid_shape)
    if len(gs) != 2 or any(n < 8 or n % 2 for n in gs):
        raise ShapeMismatch(f"grid_shape must be two even integers >= 8, got {grid_shape}")
    return gs


def build_chart(kind: SurfaceKind, grid_shape=(64, 64), derivative_scheme: str = "spectral") -> ChartGeometry:
    """Sample a closed-form periodic chart."""
    gs = _check_grid(grid_shape, derivative_scheme)
    if isinstance(kind, FlatTorus):
        periods = (float(kind.P1), float(kind.P2))
        builder = _flat_closed_form
    elif isinstance(kind, EmbeddedTorus):
        periods = (2 * np.pi, 2 * np.pi)
        builder = _torus_closed_form
    else:
        raise NonPeriodicDomain(f"{type(kind).__name__} has no single periodic chart")
    coords = tuple(np.arange(n) * p / n for n, p in zip(gs, periods))
    t1, t2 = np.meshgrid(*coords, indexing="ij")
    X, basis, g, gi, Gam, nu, II, H, K, mu = builder(kind, t1, t2)
    return ChartGeometry(
        kind=kind,
        grid_shape=gs,
        scheme=derivative_scheme,
        periods=periods,
        X=_readonly(X),
        tangent_basis=_readonly(basis),
        g=_readonly(g),
        g_inv=_readonly(gi),
        christoffel=_readonly(Gam),
        normal=_readonly(nu),
        shape_op=_readonly(II),
        mean_curv=_readonly(H),
        gauss_curv=_readonly(K),
        levi_civita=_readonly(_levi_civita(mu)),
        area_form=_readonly(mu),
        coords=coords,
    )


def chart_from_embedding(X: np.ndarray, periods=(2 * np.pi, 2 * np.pi), derivative_scheme: str = "spectral",
                         kind=None) -> ChartGeometry:
    """Build a chart from sampled positions using discrete derivatives only.

    ``X`` must be periodic on the grid (shape ``(N1, N2, 3)``).  Used for
    perturbed surfaces that have no closed form.
    """
    X = np.asarray(X, dtype=float)
    gs = _check_grid(X.shape[:2], derivative_scheme)
    d = lambda f, ax: _DERIV[derivative_scheme](f, ax, periods[ax])  # noqa: E731
    d1, d2 = d(X, 0), d(X, 1)
    basis = np.stack([d1, d2], axis=-2)
    g = np.einsum("...iA,...jA->...ij", basis, basis)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if np.any(det <= 0):
        raise DegenerateMetric("det g <= 0 at some node")
    mu = np.sqrt(det)
    gi = np.empty_like(g)
    gi[..., 0, 0] = g[..., 1, 1] / det
    gi[..., 1, 1] = g[..., 0, 0] / det
    gi[..., 0, 1] = gi[..., 1, 0] = -g[..., 0, 1] / det
    n = np.cross(d1, d2)
    nu = n / np.linalg.norm(n, axis=-1, keepdims=True)
    dd = [[d(d1, 0), d(d1, 1)], [d(d2, 0), d(d2, 1)]]
    II = np.empty_like(g)
    for i in range(2):
        for j in range(2):
            II[..., i, j] = np.einsum("...A,...A->...", 0.5 * (dd[i][j] + dd[j][i]), nu)
    dg = np.stack([d(g, 0), d(g, 1)], axis=-3)  # dg[..., k, i, j] = d_k g_ij
    first = 0.5 * (np.einsum("...ijm->...ijm", dg) + np.einsum("...jim->...ijm", dg)
                   - np.einsum("...mij->...ijm", dg))
    Gam = np.einsum("...km,...ijm->...kij", gi, first)
    IIm = np.einsum("...ik,...kj->...ij", gi, II)
    H = IIm[..., 0, 0] + IIm[..., 1, 1]
    K = IIm[..., 0, 0] * IIm[..., 1, 1] - IIm[..., 0, 1] * IIm[..., 1, 0]
    coords = tuple(np.arange(n_) * p / n_ for n_, p in zip(gs, periods))
    return ChartGeometry(
        kind=kind, grid_shape=gs, scheme=derivative_scheme, periods=tuple(map(float, periods)),
        X=_readonly(X), tangent_basis=_readonly(basis), g=_readonly(g), g_inv=_readonly(gi),
        christoffel=_readonly(Gam), normal=_readonly(nu), shape_op=_readonly(II),
        mean_curv=_readonly(H), gauss_curv=_readonly(K), levi_civita=_readonly(_levi_civita(mu)),
        area_form=_readonly(mu), coords=coords,
    )


def area_integral(chart: ChartGeometry, f) -> float:
    """Integral of a scalar field over the surface (periodic trapezoidal rule)."""
    f = np.asarray(getattr(f, "values", f), dtype=float)
    if f.shape != tuple(chart.grid_shape):
        raise ShapeMismatch(f"scalar field grid {f.shape} != chart grid {chart.grid_shape}")
    return float(np.sum(f * chart.area_form) * chart.cell_area)


def riemann_gauss_curvature(chart: ChartGeometry) -> np.ndarray:
    """Gaussian curvature recovered from the Christoffel symbols.

    Builds ``R^l_ijk = d_j Gamma^l_ik - d_k Gamma^l_ij + Gamma^l_jm Gamma^m_ik
    - Gamma^l_km Gamma^m_ij`` and returns ``E:R:E / 4`` with the
    contravariant Levi-Civita tensor.
    """
    G = chart.christoffel
    dG = np.stack([chart.diff(G, 0), chart.diff(G, 1)], axis=-1)  # [..., l, i, k, j] = d_j Gamma^l_ik
    R = (np.einsum("...likj->...lijk", dG) - np.einsum("...lijk->...lijk", dG)
         + np.einsum("...ljm,...mik->...lijk", G, G) - np.einsum("...lkm,...mij->...lijk", G, G))
    Rlow = np.einsum("...nl,...lijk->...nijk", chart.g, R)
    Eup = chart.levi_civita / chart.area_form[..., None, None] ** 2
    return 0.25 * np.einsum("...ni,...nijk,...jk->...", Eup, Rlow, Eup)


def gauss_relation_residual(chart: ChartGeometry, II=None) -> float:
    """Max-norm of ``II g^-1 II - (H II - K g)``."""
    II = chart.shape_op if II is None else II
    lhs = np.einsum("...ij,...jk,...kl->...il", II, chart.g_inv, II)
    rhs = chart.mean_curv[..., None, None] * II - chart.gauss_curv[..., None, None] * chart.g
    return float(np.max(np.abs(lhs - rhs)))
