"""Energies, flux potentials, the dissipation audit and identity checks."""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .errors import ShapeMismatch, TooFewSamples
from .fields import (
    Div_c,
    componentwise_derivative,
    ddot,
    div_c,
    outer,
    project,
    skew,
    surface_identity,
    tr,
)
from .geometry import EmbeddedTorus, FlatTorus, area_integral, build_chart, chart_from_embedding
from .kinematics import gradients_from_velocity_gradient
from .qtensor import (
    conforming_compose,
    decompose,
    random_qtensor,
    recompose,
    trace_power_identities,
)
from .terms import Phi, Rate, bending, nv_flux_density, thermotropic_density

__all__ = [
    "EnergyReport",
    "Rates",
    "energies",
    "energy_terms",
    "AuditSummary",
    "dissipation_audit",
    "LeslieCoefficients",
    "leslie_coefficients",
    "LemmaReport",
    "verify_lemmas",
]


@dataclass
class EnergyReport:
    t: float = 0.0
    E_K: float = 0.0
    E_EL: float = 0.0
    E_TH: float = 0.0
    E_BE: float = 0.0
    E_tot: float = 0.0
    R_IM: float = 0.0
    R_NV: float = 0.0
    audit_residual: float = float("nan")
    inext_residual: float = 0.0

    COLUMNS = ("t", "E_K", "E_EL", "E_TH", "E_BE", "E_tot", "R_IM", "R_NV", "audit_residual", "inext_residual")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS]


@dataclass
class Rates:
    """Rate data for the flux potentials.

    ``DQ`` is a tagged Q-tensor rate; ``gradV`` the componentwise gradient of
    the material velocity (``None`` means a fluid at rest).
    """

    DQ: Rate | None = None
    gradV: np.ndarray | None = None


def _state_fields(chart, state):
    Q = conforming_compose(state.q, np.broadcast_to(np.asarray(state.beta, dtype=float), tuple(chart.grid_shape)),
                           chart.normal)
    V = np.asarray(state.v, dtype=float)
    return Q, V


def energy_terms(chart, params, Q, V=None):
    """``(E_K, E_EL, E_TH, E_BE)`` for an embedded Q-tensor and velocity."""
    gQ = componentwise_derivative(chart, Q)
    E_EL = 0.5 * params.L * area_integral(chart, np.einsum("...ABk,...ABk->...", gQ, gQ))
    E_TH = area_integral(chart, thermotropic_density(Q, params.a, params.b, params.c))
    E_K = 0.0 if V is None else 0.5 * params.rho * area_integral(chart, np.einsum("...A,...A->...", V, V))
    E_BE = 0.0 if params.kappa == 0 else bending(chart, params).energy
    return E_K, E_EL, E_TH, E_BE


def energies(chart, params, state, rates: Rates | None = None, t=None) -> EnergyReport:
    """Energy report of a solver state (``q``, ``beta``, ``v`` embedded)."""
    Q, V = _state_fields(chart, state)
    if V.shape != tuple(chart.grid_shape) + (3,):
        raise ShapeMismatch(f"velocity must have shape {tuple(chart.grid_shape) + (3,)}")
    E_K, E_EL, E_TH, E_BE = energy_terms(chart, params, Q, V)
    rates = rates or Rates()
    gradV = rates.gradV if rates.gradV is not None else np.zeros(Q.shape)
    dg = gradients_from_velocity_gradient(gradV, chart.normal)
    R_IM = R_NV = 0.0
    DJ = np.zeros_like(Q)
    if rates.DQ is not None:
        D = np.asarray(rates.DQ.values, dtype=float)
        if D.shape != Q.shape:
            raise ShapeMismatch("rate and Q-tensor shapes differ")
        if rates.DQ.flavor != params.phi:
            from .errors import RateFlavorMismatch

            raise RateFlavorMismatch(f"rate is {rates.DQ.flavor.value}, model uses {params.phi.value}")
        R_IM = 0.5 * params.M * area_integral(chart, ddot(D, D))
        DJ = D if rates.DQ.flavor is Phi.JAUMANN else D - dg.Acal @ Q + Q @ dg.Acal
    R_NV = area_integral(chart, nv_flux_density(Q, DJ, dg.S, params.upsilon, params.xi))
    inext = float(np.sqrt(area_integral(chart, tr(gradV) ** 2)))
    return EnergyReport(t=float(state.t if t is None else t), E_K=E_K, E_EL=E_EL, E_TH=E_TH, E_BE=E_BE,
                        E_tot=E_K + E_EL + E_TH + E_BE, R_IM=R_IM, R_NV=R_NV, inext_residual=inext)


# ------------------------------------------------------------------ audit


@dataclass
class AuditSummary:
    times: np.ndarray
    residuals: np.ndarray
    max_residual: float
    max_relative_increase: float


def dissipation_audit(trajectory) -> AuditSummary:
    """Centered-difference check of ``dE_tot/dt = -2(R_IM + R_NV)``.

    Accepts a ``TrajectoryRecord`` or any sequence of ``EnergyReport``.
    """
    reports = list(getattr(trajectory, "reports", trajectory))
    if len(reports) < 3:
        raise TooFewSamples(f"need at least 3 samples, got {len(reports)}")
    t = np.array([r.t for r in reports])
    E = np.array([r.E_tot for r in reports])
    R = np.array([r.R_IM + r.R_NV for r in reports])
    dEdt = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    res = dEdt + 2 * R[1:-1]
    incr = np.diff(E) / np.maximum(np.abs(E[:-1]), 1e-300)
    return AuditSummary(t[1:-1], res, float(np.max(np.abs(res))), float(max(incr.max(), 0.0)))


# ----------------------------------------------------------- Parodi-Leslie


@dataclass(frozen=True)
class LeslieCoefficients:
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float
    parodi_residual: float
    determinant: float
    determinant_residual: float
    leslie_values: tuple
    leslie_inequality_flags: tuple

    @property
    def alphas(self):
        return (self.alpha1, self.alpha2, self.alpha3, self.alpha4, self.alpha5, self.alpha6)


def leslie_coefficients(upsilon, s, xi, M=0.0, jaumann=False) -> LeslieCoefficients:
    """Leslie viscosities of the uniaxial conforming stress.

    With ``jaumann=True`` the immobility stress adds ``-M s^2`` to
    ``alpha2`` and ``+M s^2`` to ``alpha3``; the determinant is then
    ``2 M upsilon s^2 (2 - s xi / 3)^2`` instead of zero.
    """
    u, sx = upsilon, s * xi
    a1 = u * sx**2
    a2 = -u * sx * (1 + sx / 3)
    a3 = -u * sx * (1 - 2 * sx / 3)
    a4 = 2 * u * (1 + sx / 3) ** 2
    a5 = -u * sx * (1 + sx / 3)
    a6 = -3 * u * sx
    if jaumann:
        a2 -= M * s**2
        a3 += M * s**2
    parodi = (a2 + a3) - (a6 - a5)
    det = (a3 - a2) * (2 * a4 + a5 + a6) - (a6 - a5) ** 2
    expected = 2 * M * u * s**2 * (2 - sx / 3) ** 2 if jaumann else 0.0
    values = (a3 - a2, 2 * a4 + a5 + a6, a4, a1 + a4 + a5 + a6, det)
    scale = max(1.0, max(abs(x) for x in (a1, a2, a3, a4, a5, a6)))
    flags = tuple(v >= -1e-12 * scale**2 for v in values)
    return LeslieCoefficients(a1, a2, a3, a4, a5, a6, parodi, det, det - expected, values, flags)


# ------------------------------------------------------------ lemma suite


@dataclass
class LemmaReport:
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def passed(self, name):
        return bool(self.residuals[name] <= self.tolerances[name])

    @property
    def all_passed(self):
        return all(self.passed(k) for k in self.residuals)

    def lines(self):
        out = []
        for k in self.residuals:
            tag = "PASS" if self.passed(k) else "FAIL"
            extra = f" order={self.orders[k]:.2f}" if k in self.orders else ""
            out.append(f"{tag} {k}: residual={self.residuals[k]:.3e} tol={self.tolerances[k]:.1e}{extra}")
        for k, v in self.notes.items():
            out.append(f"NOTE {k}: {v}")
        return out


def _smooth(rng, chart, tail, modes=3, terms=4):
    t1, t2 = np.meshgrid(*chart.coords, indexing="ij")
    t1 = t1 * 2 * np.pi / chart.periods[0]
    t2 = t2 * 2 * np.pi / chart.periods[1]
    out = np.zeros(tuple(chart.grid_shape) + tuple(tail))
    for _ in range(terms):
        amp = rng.normal(size=tail)
        m, n = rng.integers(-modes, modes + 1, 2)
        out += np.multiply.outer(np.sin(m * t1 + n * t2 + rng.uniform(0, 2 * np.pi)), amp)
    return out


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def verify_lemmas(seed=0, n_samples=1000, grid=(32, 32)) -> LemmaReport:
    """Check the auxiliary identities on random data.

    Pointwise identities use ``n_samples`` random tensors; calculus
    identities use smooth random fields on the embedded torus.
    """
    rng = np.random.default_rng(seed)
    rep = LemmaReport()

    # Q-tensor part of tangential tensors is conforming
    nu = rng.normal(size=(n_samples, 3))
    nu /= np.linalg.norm(nu, axis=-1, keepdims=True)
    P = surface_identity(nu)
    r = P @ rng.normal(size=(n_samples, 3, 3)) @ P
    lhs = project(r, "Q")
    rhs = conforming_compose(project(r, "tangential-Q", nu), -tr(r) / 3, nu)
    rep.residuals["qtensor_part_conforming"] = _rel(lhs, rhs)
    rep.tolerances["qtensor_part_conforming"] = 1e-13

    Q = random_qtensor(rng, n_samples)
    rep.residuals["trace_powers"] = max(trace_power_identities(Q).values())
    rep.tolerances["trace_powers"] = 1e-12

    d = decompose(nu, Q)
    rep.residuals["decomposition_roundtrip"] = _rel(recompose(nu, d), Q)
    rep.tolerances["decomposition_roundtrip"] = 1e-13

    # pairings with the deformation gradients (pointwise, then quadrature)
    chart = build_chart(EmbeddedTorus(), grid)
    nu_c = chart.normal
    Pc = chart.surface_identity
    R = _smooth(rng, chart, (3, 3))
    W = _smooth(rng, chart, (3,))
    gW = componentwise_derivative(chart, W)
    dg = gradients_from_velocity_gradient(gW, nu_c)
    Rn = np.einsum("...AB,...B->...A", R, nu_c)
    lhs6 = area_integral(chart, ddot(R, dg.Gcal))
    rhs6 = area_integral(chart, ddot(R @ Pc - outer(nu_c, np.einsum("...AB,...B->...A", Pc, Rn)), gW))
    rep.residuals["weak_deformation"] = abs(lhs6 - rhs6) / max(1.0, abs(lhs6))
    rep.tolerances["weak_deformation"] = 1e-12
    I3 = np.eye(3)
    lhs5 = area_integral(chart, ddot(R, dg.Acal))
    rhs5 = area_integral(chart, ddot((I3 + outer(nu_c, nu_c)) @ skew(R) @ Pc, gW))
    rep.residuals["weak_skew_deformation"] = abs(lhs5 - rhs5) / max(1.0, abs(lhs5))
    rep.tolerances["weak_skew_deformation"] = 1e-12

    # adjoint vs trace divergence (spectral: round-off)
    Rt = R @ Pc
    res7 = div_c(chart, Rt) - Div_c(chart, Rt) - chart.mean_curv[..., None] * np.einsum("...AB,...B->...A", Rt, nu_c)
    rep.residuals["adjoint_vs_trace_divergence"] = float(np.max(np.abs(res7)) / max(1.0, np.max(np.abs(Rt))))
    rep.tolerances["adjoint_vs_trace_divergence"] = 1e-9

    # same relation with fourth-order differences on a refinement pair
    errs = []
    for n in (grid[0], 2 * grid[0]):
        ch = build_chart(EmbeddedTorus(), (n, n), "fd4")
        rr = np.random.default_rng(seed + 1)
        Rf = _smooth(rr, ch, (3, 3)) @ ch.surface_identity
        e = div_c(ch, Rf) - Div_c(ch, Rf) - ch.mean_curv[..., None] * np.einsum("...AB,...B->...A", Rf, ch.normal)
        errs.append(float(np.max(np.abs(e))))
    order = float(np.log2(errs[0] / errs[1]))
    rep.residuals["adjoint_vs_trace_divergence_fd4"] = max(0.0, 3.5 - order)
    rep.tolerances["adjoint_vs_trace_divergence_fd4"] = 0.0
    rep.orders["adjoint_vs_trace_divergence_fd4"] = order

    # commutator of deformation and componentwise derivative (central FD in the embedding)
    eps = 1e-5
    Rfix = R
    dplus = componentwise_derivative(chart_from_embedding(chart.X + eps * W, chart.periods), Rfix)
    dminus = componentwise_derivative(chart_from_embedding(chart.X - eps * W, chart.periods), Rfix)
    fd = (dplus - dminus) / (2 * eps)
    exact = -np.einsum("...ABD,...DC->...ABC", componentwise_derivative(chart, Rfix), dg.Gcal)
    rep.residuals["deformation_commutator"] = _rel(fd, exact)
    rep.tolerances["deformation_commutator"] = 1e-6

    rep.notes["thin_film_gradient"] = "modeling assumption, no finite-dimensional check"
    rep.notes["variational_independence"] = "documentation only"
    return rep
