"""Model terms: energies, stresses, forces and molecular fields.

Two families of functions live here.

Pointwise formulas (``*_stress``, ``conforming_*`` ...) act on arrays ending
in ``(3, 3)`` / ``(3,)`` and broadcast freely; they are direct transcriptions
of the general (embedded) and surface-conforming (tangential) term catalogs.

Field evaluators (``elastic``, ``thermotropic`` ...) take a chart and return
a :class:`TermBundle`.  Their ``conforming`` entry is obtained by the
orthogonal splits ``Sigma = sigma + nu x varsigma`` and
``H = Q(h, zeta, omega)`` of the general outputs, so comparing it with the
``conforming_*`` formulas checks one catalog against the other.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RateFlavorMismatch, ShapeMismatch, UnknownConstraint
from .fields import (
    Div_c,
    componentwise_derivative,
    ddot,
    grad_c,
    laplace_c,
    outer,
    project,
    skew,
    surface_identity,
    sym,
    tangential_derivative,
    bochner_laplacian,
    tr,
)
from .geometry import ChartGeometry, area_integral
from .kinematics import DeformationGradients
from .qtensor import biaxiality_polynomial, conforming_compose, decompose

__all__ = [
    "Phi",
    "ModelParams",
    "Rate",
    "TermBundle",
    "ConstraintTerm",
    "NematicViscousTerms",
    "conforming_parts",
    "thermotropic_density",
    "thermotropic_field",
    "elastic_stress",
    "immobility_stress",
    "nv_sigma1_jaumann",
    "nv_sigma1_material",
    "nv_sigma2_jaumann",
    "nv_sigma2_material",
    "nv_h1",
    "nv_h2_jaumann",
    "nv_h2_material",
    "nv_flux_density",
    "uniaxial_constraint_field",
    "bending_normal_force",
    "conforming_elastic",
    "conforming_thermotropic",
    "conforming_immobility",
    "conforming_nematic_viscous",
    "conforming_uniaxial_constraint",
    "conforming_uniaxial_constraint_raw",
    "sc_eliminated_stress",
    "elastic",
    "thermotropic",
    "bending",
    "immobility",
    "nematic_viscous",
    "anisotropic_metric",
    "constraint_terms",
    "inextensibility",
    "jaumann_gauge_force_correction",
]

_I3 = np.eye(3)


class Phi(str, enum.Enum):
    """Rate flavor used by the immobility potential."""

    MATERIAL = "material"
    JAUMANN = "jaumann"


@dataclass(frozen=True)
class ModelParams:
    L: float = 1.0
    a: float = -0.5
    b: float = -1.0
    c: float = 1.0
    kappa: float = 0.0
    H0: float = 0.0
    M: float = 1.0
    upsilon: float = 1.0
    xi: float = 0.0
    rho: float = 1.0
    phi: Phi = Phi.JAUMANN

    def __post_init__(self):
        object.__setattr__(self, "phi", Phi(self.phi))
        for key in ("L", "kappa", "M", "upsilon"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be non-negative")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not -1.5 < self.xi < 1.5:
            warnings.warn(f"xi={self.xi} outside (-3/2, 3/2): anisotropic metric is indefinite",
                          RuntimeWarning, stacklevel=3)

    @property
    def M_tilde(self) -> float:
        return self.M + 0.5 * self.upsilon * self.xi**2


@dataclass(frozen=True)
class Rate:
    """A Q-tensor rate tagged with its flavor."""

    values: np.ndarray
    flavor: Phi

    def __post_init__(self):
        object.__setattr__(self, "flavor", Phi(self.flavor))


def _rate(rate, params):
    if not isinstance(rate, Rate):
        return np.asarray(rate, dtype=float), params.phi
    if rate.flavor != params.phi:
        raise RateFlavorMismatch(f"rate is {rate.flavor.value}, model uses {params.phi.value}")
    return np.asarray(rate.values, dtype=float), rate.flavor


@dataclass
class TermBundle:
    name: str
    Sigma: np.ndarray | None = None
    F: np.ndarray | None = None
    H: np.ndarray | None = None
    conforming: dict | None = None
    energy: float | None = None
    extras: dict = field(default_factory=dict)


@dataclass
class ConstraintTerm:
    gamma: str
    lam: object
    F_gamma: np.ndarray | None
    H_gamma: np.ndarray | None
    C_gamma: object
    Sigma_gamma: np.ndarray | None = None
    conforming: dict | None = None


# ---------------------------------------------------------------- helpers


def _nn(nu):
    return outer(nu, nu)


def _proj_qs(r, nu):
    """Tangential-Q projection."""
    return project(r, "tangential-Q", nu)


def conforming_parts(nu, Sigma=None, H=None, F=None):
    """Split general outputs into their tangential/normal parts."""
    out = {}
    P = surface_identity(nu)
    if Sigma is not None:
        out["sigma"] = P @ Sigma
        out["varsigma"] = np.einsum("...A,...AB->...B", nu, Sigma)
    if F is not None:
        out["f"] = np.einsum("...AB,...B->...A", P, F)
        out["f_perp"] = np.einsum("...A,...A->...", nu, F)
    if H is not None:
        d = decompose(nu, H)
        out["h"], out["zeta"], out["omega"] = d.q, d.eta, d.beta
    return out


# ------------------------------------------------------ general pointwise


def thermotropic_density(Q, a, b, c):
    """``a TrQ^2 + 2b/3 TrQ^3 + c TrQ^4`` (also the thermotropic pressure)."""
    Q2 = Q @ Q
    return a * tr(Q2) + (2.0 * b / 3.0) * tr(Q2 @ Q) + c * tr(Q2 @ Q2)


def thermotropic_field(Q, a, b, c):
    Q2 = Q @ Q
    t2 = tr(Q2)[..., None, None]
    return -2.0 * (a * Q + b * (Q2 - t2 / 3.0 * _I3) + c * t2 * Q)


def elastic_stress(gradQ, nu, L):
    """``-L((grad_C Q)^T : grad_C Q - |grad_C Q|^2 / 2 Id_S)``."""
    g = gradQ.reshape(gradQ.shape[:-3] + (-1, gradQ.shape[-1]))
    X = np.swapaxes(g, -1, -2) @ g
    return -L * (X - 0.5 * tr(X)[..., None, None] * surface_identity(nu))


def immobility_stress(Q, DQ, nu, M, flavor):
    if Phi(flavor) is Phi.MATERIAL:
        return np.zeros_like(Q)
    return M * ((_I3 + _nn(nu)) @ (Q @ DQ - DQ @ Q) @ surface_identity(nu))


def nv_sigma1_jaumann(Q, DJQ, S, nu, upsilon):
    P = surface_identity(nu)
    return -upsilon * (P @ DJQ @ P + (3 * P + 2 * _nn(nu)) @ Q @ S + S @ Q @ P)


def nv_sigma1_material(Q, DmQ, gradV, S, nu, upsilon):
    P = surface_identity(nu)
    return -upsilon * (P @ DmQ @ P + P @ Q @ gradV + 2 * Q @ S + np.swapaxes(gradV, -1, -2) @ Q @ P)


def nv_sigma2_jaumann(Q, DJQ, S, nu, upsilon):
    P = surface_identity(nu)
    w = np.einsum("...AB,...BC,...CD,...D->...A", P, Q, DJQ, nu)
    return upsilon * (Q @ DJQ @ P - outer(nu, w) + P @ Q @ S @ Q @ P + Q @ Q @ S)


def nv_sigma2_material(Q, DmQ, gradV, Gcal, Acal, nu, upsilon):
    P = surface_identity(nu)
    mv = lambda A, x: np.einsum("...AB,...B->...A", A, x)  # noqa: E731
    Qn = mv(Q, nu)
    inner = mv(DmQ, nu) - 2 * mv(Acal, Qn) - mv(Q, mv(np.swapaxes(gradV, -1, -2), nu))
    w = mv(P @ Q, inner)
    return upsilon * (Q @ DmQ @ P - outer(nu, w) + P @ Q @ np.swapaxes(Gcal, -1, -2) @ Q @ P + Q @ Q @ gradV)


def nv_h1(S, upsilon):
    return upsilon * project(S, "Q")


def nv_h2_jaumann(Q, S, upsilon):
    return -0.5 * upsilon * project(Q @ S + S @ Q, "Q")


def nv_h2_material(Q, Gcal, upsilon):
    return -0.5 * upsilon * project(Q @ Gcal + np.swapaxes(Gcal, -1, -2) @ Q, "Q")


def nv_flux_density(Q, DJQ, S, upsilon, xi):
    """``upsilon/4 |S I + I S - xi D_J Q|^2`` with ``I = Id - xi Q``."""
    I = _I3 - xi * Q
    R = S @ I + I @ S - xi * DJQ
    return 0.25 * upsilon * ddot(R, R)


def uniaxial_constraint_field(Q, Lam):
    """Molecular field of the uniaxiality constraint for multiplier ``Lam``."""
    Q2 = Q @ Q
    t2 = tr(Q2)[..., None, None]
    return (6 * project(Lam @ Q2 @ Q + Q @ Lam @ Q2, "Q") - 5 * t2 * project(Lam @ Q, "Q")
            - 5 * ddot(Lam, Q2)[..., None, None] * Q)


def bending_normal_force(H, K, lapH, kappa, H0=0.0):
    return -kappa * (lapH + (H - H0) * (0.5 * H * (H + H0) - 2 * K))


# ---------------------------------------------------- conforming pointwise


def _s(x):
    return np.asarray(x)[..., None, None]


def conforming_elastic(L, q, beta, grad_q, grad_beta, lap_q, lap_beta, B, H, K, grad_H, nu):
    """Tangential elastic stress, molecular fields and normal coupling."""
    P = surface_identity(nu)
    X = np.einsum("...ABk,...ABl->...kl", grad_q, grad_q)
    nq2 = tr(X)
    nb2 = np.einsum("...k,...k->...", grad_beta, grad_beta)
    t2 = ddot(q, q)
    qB = ddot(q, B)
    Bh = B - 0.5 * _s(H) * P
    sigma = -L * (X + 1.5 * outer(grad_beta, grad_beta) - 0.25 * _s(2 * nq2 + 3 * nb2) * P
                  - 6 * _s(K * beta) * q + 0.5 * _s(2 * H * t2 - 12 * beta * qB + 9 * H * beta**2) * Bh)
    mv = lambda A, x: np.einsum("...AB,...B->...A", A, x)  # noqa: E731
    gqB = np.einsum("...ABk,...Bk->...A", grad_q, B)
    zeta = L * (2 * gqB + mv(q, grad_H) - 3 * mv(B, grad_beta) - 1.5 * np.asarray(beta)[..., None] * grad_H)
    h = L * (lap_q - _s(H**2 - 2 * K) * q + 3 * _s(beta * H) * Bh)
    omega = L * (lap_beta + 2 * H * qB - 3 * beta * (H**2 - 2 * K))
    return {"sigma": sigma, "zeta": zeta, "h": h, "omega": omega}


def conforming_thermotropic(a, b, c, q, beta):
    t2 = ddot(q, q)
    p = 0.5 * (2 * a - 2 * b * beta + c * (t2 + 3 * beta**2)) * t2 + (12 * a + 4 * b * beta + 9 * c * beta**2) * beta**2 / 8
    h = -_s(2 * a - 2 * b * beta + 3 * c * beta**2 + 2 * c * t2) * q
    omega = -(2 * a + b * beta + 3 * c * beta**2 + 2 * c * t2) * beta + (2.0 / 3.0) * b * t2
    return {"p": p, "h": h, "omega": omega}


def conforming_immobility(M, flavor, q, beta, Dq, beta_dot, b=None):
    """``Dq`` is the Jaumann rate for ``jaumann`` and the material rate otherwise."""
    flavor = Phi(flavor)
    out = {"h": -M * Dq, "omega": -M * np.asarray(beta_dot)}
    if flavor is Phi.JAUMANN:
        out["sigma"] = M * (q @ Dq - Dq @ q)
        out["zeta"] = np.zeros(np.shape(q)[:-1])
    else:
        out["sigma"] = np.zeros_like(q)
        qb = np.einsum("...AB,...B->...A", q, b)
        out["zeta"] = -M * (qb - 1.5 * np.asarray(beta)[..., None] * b)
    return out


def conforming_nematic_viscous(upsilon, flavor, q, beta, Dq, beta_dot, G, nu):
    """Orders 0-2 of the tangential nematic-viscous terms.

    ``h1`` and ``omega2`` are written for general ``Tr S`` (they reduce to
    ``upsilon S`` and ``upsilon/3 q:G`` for inextensible flow); the rate part
    ``-upsilon/2 beta_dot`` of the order-two normal field lives in ``M_tilde``.
    """
    flavor = Phi(flavor)
    P = surface_identity(nu)
    S = sym(G)
    Gt = np.swapaxes(G, -1, -2)
    bt = np.asarray(beta)
    bd = np.asarray(beta_dot)
    trS = tr(S)
    PS = S - 0.5 * _s(trS) * P
    qG = ddot(q, G)
    t2 = ddot(q, q)
    out = {"sigma0": 2 * upsilon * S, "h1": upsilon * PS, "omega1": -upsilon * trS / 3.0}
    if flavor is Phi.JAUMANN:
        out["sigma1"] = -upsilon * (Dq - 0.5 * _s(bd) * P + 3 * q @ S + S @ q - 2 * _s(bt) * S)
        out["sigma2"] = upsilon * (q @ Dq - 0.5 * (_s(bt) * Dq + _s(bd) * q) + 0.25 * _s(bt * bd) * P
                                   + q @ S @ q - 0.5 * _s(bt) * (3 * q @ S + S @ q) + 0.5 * _s(t2 + bt**2) * S)
        out["h2"] = -0.5 * upsilon * (q @ S + S @ q - _s(qG) * P - _s(bt) * PS)
    else:
        out["sigma1"] = -upsilon * (Dq - 0.5 * _s(bd) * P + q @ (2 * G + Gt) + Gt @ q - 2 * _s(bt) * S)
        out["sigma2"] = upsilon * (q @ Dq - 0.5 * (_s(bt) * Dq + _s(bd) * q) + 0.25 * _s(bt * bd) * P
                                   + q @ Gt @ q - 0.5 * _s(bt) * (q @ (2 * G + Gt) + Gt @ q)
                                   + 0.5 * _s(t2) * G + 0.5 * _s(bt**2) * S)
        out["h2"] = -0.5 * upsilon * (q @ G + Gt @ q - _s(qG) * P - _s(bt) * PS)
    out["omega2"] = (upsilon / 3.0) * (qG - 0.5 * bt * trS)
    return out


def conforming_uniaxial_constraint(q, beta, lam, lam_perp, nu):
    """Uniaxiality constraint terms after using ``2 Tr q^2 = 9 beta^2``."""
    t2 = ddot(q, q)
    bt = np.asarray(beta)
    lp = np.asarray(lam_perp)
    lq = ddot(lam, q)
    h = (-6 * _s(bt) * q @ lam @ q + (4.0 / 3.0) * _s(t2) * _proj_qs(lam @ q, nu)
         + _s(5 * bt * lq + lp * t2) * q - 0.25 * _s(bt * (14 * t2 - 9 * bt**2)) * lam)
    omega = t2 * (2 * lq - 9 * lp * bt) / 3.0
    C = ((2 * t2 - 9 * bt**2)[..., None, None] * _s(bt) * q, (2 * t2 - 9 * bt**2) * t2)
    return {"h": h, "omega": omega, "C": C}


def conforming_uniaxial_constraint_raw(q, beta, lam, lam_perp, nu):
    """Same terms before the uniaxial substitution (valid on any conforming state).

    The ``lam_perp`` coefficient of ``omega`` is re-derived (``-3 beta Tr q^2``).
    """
    t2 = ddot(q, q)
    bt = np.asarray(beta)
    lp = np.asarray(lam_perp)
    lq = ddot(lam, q)
    h = (-6 * _s(bt) * q @ lam @ q + 0.5 * _s(2 * t2 + 3 * bt**2) * _proj_qs(lam @ q, nu)
         + 0.5 * _s(10 * bt * lq + lp * (4 * t2 - 9 * bt**2)) * q
         - 0.25 * _s(bt * (14 * t2 - 9 * bt**2)) * lam)
    omega = -(2 * t2 - 27 * bt**2) * lq / 6.0 - 3 * lp * bt * t2
    return {"h": h, "omega": omega}


def sc_eliminated_stress(q, beta, zeta_sum, nu):
    """Normal stress part with the conforming multiplier eliminated.

    Returns ``(varsigma, Sigma)`` with ``varsigma = -2 (q - 3/2 beta Id_S) zeta``
    and ``Sigma = nu x varsigma``.
    """
    P = surface_identity(nu)
    vs = -2 * np.einsum("...AB,...B->...A", q - 1.5 * _s(beta) * P, zeta_sum)
    return vs, outer(nu, vs)


# ------------------------------------------------------- field evaluators


def _Q_from(chart, Q=None, q=None, beta=None):
    if Q is not None:
        Q = np.asarray(Q, dtype=float)
        chart.check(Q, (3, 3))
        return Q
    if q is None or beta is None:
        raise ValueError("pass Q or both q and beta")
    return conforming_compose(q, beta, chart.normal)


def _is_conforming(chart, Q, tol=1e-10):
    eta = decompose(chart.normal, Q).eta
    return np.max(np.abs(eta), initial=0.0) <= tol * max(1.0, np.max(np.abs(Q), initial=0.0))


def elastic(chart: ChartGeometry, params: ModelParams, Q=None, q=None, beta=None) -> TermBundle:
    """One-constant elastic term with ``H = L Lap_C Q``."""
    Q = _Q_from(chart, Q, q, beta)
    L = params.L
    gQ = componentwise_derivative(chart, Q)
    Sigma = elastic_stress(gQ, chart.normal, L)
    F = Div_c(chart, Sigma)
    H = L * laplace_c(chart, Q)
    dens = np.einsum("...ABk,...ABk->...", gQ, gQ)
    E = 0.5 * L * area_integral(chart, dens)
    conf = conforming_parts(chart.normal, Sigma=Sigma, H=H, F=F) if _is_conforming(chart, Q) else None
    return TermBundle("EL", Sigma=Sigma, F=F, H=H, conforming=conf, energy=E)


def elastic_conforming_fields(chart: ChartGeometry, params: ModelParams, q, beta):
    """Evaluate the tangential elastic formulas with the chart's calculus."""
    gq = tangential_derivative(chart, q)
    gb = componentwise_derivative(chart, beta)
    lq = bochner_laplacian(chart, q)
    lb = laplace_c(chart, beta)
    return conforming_elastic(params.L, q, beta, gq, gb, lq, lb, chart.shape_embedded, chart.mean_curv,
                              chart.gauss_curv, chart.mean_curv_gradient, chart.normal)


__all__.append("elastic_conforming_fields")


def thermotropic(chart: ChartGeometry, params: ModelParams, Q=None, q=None, beta=None) -> TermBundle:
    Q = _Q_from(chart, Q, q, beta)
    p = thermotropic_density(Q, params.a, params.b, params.c)
    H = thermotropic_field(Q, params.a, params.b, params.c)
    Sigma = p[..., None, None] * chart.surface_identity
    F = grad_c(chart, p)
    conf = conforming_parts(chart.normal, Sigma=Sigma, H=H, F=F) if _is_conforming(chart, Q) else None
    if conf is not None:
        conf["p"] = p
    return TermBundle("TH", Sigma=Sigma, F=F, H=H, conforming=conf, energy=area_integral(chart, p),
                      extras={"p": p})


def bending(chart: ChartGeometry, params: ModelParams) -> TermBundle:
    H, K = chart.mean_curv, chart.gauss_curv
    fp = bending_normal_force(H, K, chart.mean_curv_laplacian, params.kappa, params.H0)
    E = 0.5 * params.kappa * area_integral(chart, (H - params.H0) ** 2)
    return TermBundle("BE", F=fp[..., None] * chart.normal, energy=E,
                      conforming={"f": np.zeros(H.shape + (3,)), "f_perp": fp})


def immobility(chart: ChartGeometry, params: ModelParams, Q, rateQ) -> TermBundle:
    D, flavor = _rate(rateQ, params)
    chart.check(D, (3, 3))
    Sigma = immobility_stress(Q, D, chart.normal, params.M, flavor)
    H = -params.M * D
    F = Div_c(chart, Sigma)
    R = 0.5 * params.M * area_integral(chart, ddot(D, D))
    conf = conforming_parts(chart.normal, Sigma=Sigma, H=H, F=F)
    return TermBundle("IM", Sigma=Sigma, F=F, H=H, conforming=conf, extras={"R": R})


@dataclass
class NematicViscousTerms:
    order0: TermBundle
    order1: TermBundle
    order2: TermBundle
    R: float

    def combined(self, xi):
        """Stress and molecular field summed with their ``xi`` weights.

        The molecular field excludes the rate part absorbed into ``M_tilde``.
        """
        S = self.order0.Sigma + xi * self.order1.Sigma + xi**2 * self.order2.Sigma
        H = xi * self.order1.H + xi**2 * self.order2.H
        return S, H


def nematic_viscous(chart: ChartGeometry, params: ModelParams, Q, rateQ,
                    defgrad: DeformationGradients, gradV=None) -> NematicViscousTerms:
    """Nematic viscous stresses of orders 0, 1, 2 in ``xi``.

    ``gradV`` (the componentwise velocity gradient) is only needed for the
    material flavor; it is rebuilt from ``defgrad`` when omitted.
    """
    D, flavor = _rate(rateQ, params)
    nu = chart.normal
    u = params.upsilon
    S = defgrad.S
    if gradV is None:
        gradV = defgrad.Gcal + outer(defgrad.b, nu)
    if flavor is Phi.JAUMANN:
        S1 = nv_sigma1_jaumann(Q, D, S, nu, u)
        S2 = nv_sigma2_jaumann(Q, D, S, nu, u)
        H2 = nv_h2_jaumann(Q, S, u)
        DJ = D
    else:
        S1 = nv_sigma1_material(Q, D, gradV, S, nu, u)
        S2 = nv_sigma2_material(Q, D, gradV, defgrad.Gcal, defgrad.Acal, nu, u)
        H2 = nv_h2_material(Q, defgrad.Gcal, u)
        DJ = D - defgrad.Acal @ Q + Q @ defgrad.Acal
    S0 = 2 * u * S
    H1 = nv_h1(S, u)
    R = area_integral(chart, nv_flux_density(Q, DJ, S, u, params.xi))
    mk = lambda name, Sig, H: TermBundle(  # noqa: E731
        name, Sigma=Sig, F=Div_c(chart, Sig), H=H,
        conforming=conforming_parts(nu, Sigma=Sig, H=H) if H is not None else conforming_parts(nu, Sigma=Sig))
    return NematicViscousTerms(mk("NV0", S0, None), mk("NV1", S1, H1), mk("NV2", S2, H2), R)


def anisotropic_metric(Q, xi):
    """``I = Id - xi Q`` and its smallest eigenvalue per node."""
    I = _I3 - xi * np.asarray(Q, dtype=float)
    return I, np.linalg.eigvalsh(sym(I))[..., 0]


def inextensibility(chart: ChartGeometry, p) -> TermBundle:
    p = np.asarray(p, dtype=float)
    Sigma = -p[..., None, None] * chart.surface_identity
    F = -grad_c(chart, p)
    return TermBundle("IC", Sigma=Sigma, F=F, conforming=conforming_parts(chart.normal, Sigma=Sigma, F=F))


def jaumann_gauge_force_correction(chart: ChartGeometry, Q, H_alpha):
    nu = chart.normal
    T = (_I3 + _nn(nu)) @ (Q @ H_alpha - H_alpha @ Q) @ chart.surface_identity
    return Div_c(chart, T)


CONSTRAINTS = ("SC", "CB", "UN", "IS", "NN", "NF")


def _need(lam, shape, gamma):
    lam = np.asarray(lam, dtype=float)
    if lam.shape != shape:
        raise ShapeMismatch(f"{gamma} multiplier must have shape {shape}, got {lam.shape}")
    return lam


def constraint_terms(gamma, chart: ChartGeometry, Q=None, q=None, beta=None, V=None, lam=None,
                     beta0=0.0) -> ConstraintTerm:
    """Constraint force, molecular field and constraint value.

    Multiplier shapes: SC tangential vector (embedded, ``(N1, N2, 3)``, normal
    part discarded); CB
    and NN scalars; UN and IS Q-tensors; NF embedded vectors.
    """
    if gamma not in CONSTRAINTS:
        raise UnknownConstraint(gamma)
    nu = chart.normal
    n = tuple(chart.grid_shape)
    needs_Q = gamma in ("SC", "CB", "UN", "IS")
    Qf = _Q_from(chart, Q, q, beta) if needs_Q else None
    F = H = Sig = None
    if gamma == "SC":
        lam = np.einsum("...AB,...B->...A", chart.surface_identity, _need(lam, n + (3,), gamma))
        beta_n = np.einsum("...A,...AB,...B->...", nu, Qf, nu)
        PQl = np.einsum("...AB,...BC,...C->...A", chart.surface_identity, Qf, lam)
        Sig = outer(nu, beta_n[..., None] * lam - PQl)
        F = Div_c(chart, Sig)
        H = -0.5 * (outer(lam, nu) + outer(nu, lam))
        C = np.einsum("...AB,...BC,...C->...A", chart.surface_identity, Qf, nu)
    elif gamma == "CB":
        lam = _need(lam, n, gamma)
        H = -lam[..., None, None] * (_nn(nu) - _I3 / 3)
        C = np.einsum("...A,...AB,...B->...", nu, Qf, nu) - beta0
    elif gamma == "UN":
        lam = _need(lam, n + (3, 3), gamma)
        H = uniaxial_constraint_field(Qf, lam)
        C = biaxiality_polynomial(Qf)
    elif gamma == "IS":
        lam = _need(lam, n + (3, 3), gamma)
        H = lam.copy()
        C = Qf.copy()
    elif gamma == "NN":
        lam = _need(lam, n, gamma)
        F = lam[..., None] * nu
        C = np.einsum("...A,...A->...", np.asarray(V, dtype=float), nu)
    else:  # NF
        lam = _need(lam, n + (3,), gamma)
        F = lam.copy()
        C = np.asarray(V, dtype=float).copy()
    conf = conforming_parts(nu, Sigma=Sig, H=H, F=F)
    return ConstraintTerm(gamma, lam, F, H, C, Sigma_gamma=Sig, conforming=conf)
