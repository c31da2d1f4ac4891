"""Time integrators for the three closed special cases.

* ``run_flat_be2d``: flat torus, degenerate ``beta = 0``, Eulerian observer.
* ``run_gradient_flow``: no flow, relaxation of ``(q, beta)`` on any chart.
* ``run_stationary_nemato``: fixed curved chart, tangential flow, constant
  ``beta``, isotropic viscosity.

All schemes are first order in time.  Stiff linear diffusion is implicit in
Fourier space; on curved charts it is replaced by a constant-coefficient
stabilizer (the residual variable-coefficient part stays explicit).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, cg

from .diagnostics import EnergyReport, Rates, energies
from .errors import BlowUp, CFLWarning, ProjectionNonConvergence
from .fields import (
    Div_c,
    componentwise_derivative,
    ddot,
    laplace_c,
    outer,
    project,
    tangential_derivative,
    to_embedded,
)
from .geometry import ChartGeometry, area_integral, fft_workers
from .kinematics import gradients_from_velocity_gradient
from .qtensor import conforming_compose, decompose
from .terms import (
    ModelParams,
    Phi,
    Rate,
    conforming_immobility,
    conforming_nematic_viscous,
    conforming_thermotropic,
    elastic_stress,
    immobility,
    thermotropic_density,
    thermotropic_field,
)

__all__ = [
    "SimState",
    "TrajectoryRecord",
    "run_flat_be2d",
    "run_gradient_flow",
    "run_stationary_nemato",
    "stream_velocity",
    "taylor_green",
    "random_q",
    "uniform_uniaxial",
    "zero_state",
    "BLOWUP_FACTOR",
]

BLOWUP_FACTOR = 1e6


@dataclass
class SimState:
    """Solver state with embedded proxies (``v`` is ``(N1, N2, 3)``)."""

    t: float
    v: np.ndarray
    p: np.ndarray
    q: np.ndarray
    beta: np.ndarray

    def Q(self, chart):
        return conforming_compose(self.q, np.broadcast_to(self.beta, self.p.shape), chart.normal)

    def copy(self):
        return SimState(self.t, self.v.copy(), self.p.copy(), self.q.copy(), np.array(self.beta, copy=True))


@dataclass
class TrajectoryRecord:
    reports: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: SimState | None = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self):
        return np.array([r.t for r in self.reports])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.reports])

    def _push(self, rep):
        if self.reports and rep.t <= self.reports[-1].t:
            raise ValueError("sample times must increase")
        self.reports.append(rep)


# ------------------------------------------------------------ initial data


def zero_state(chart: ChartGeometry, beta=0.0) -> SimState:
    n = tuple(chart.grid_shape)
    return SimState(0.0, np.zeros(n + (3,)), np.zeros(n), np.zeros(n + (3, 3)), np.full(n, float(beta)))


def stream_velocity(chart: ChartGeometry, psi):
    """Divergence-free tangential field ``v^i = eps^{ij} d_j psi / mu``."""
    d1, d2 = chart.diff(psi, 0), chart.diff(psi, 1)
    mu = chart.area_form
    comps = np.stack([d2 / mu, -d1 / mu], axis=-1)
    return to_embedded(chart, comps)


def _angles(chart):
    t1, t2 = np.meshgrid(*chart.coords, indexing="ij")
    return t1 * 2 * np.pi / chart.periods[0], t2 * 2 * np.pi / chart.periods[1]


def taylor_green(chart: ChartGeometry, amplitude=1.0):
    """``(sin x cos y, -cos x sin y)`` on the flat torus; its stream-function analog elsewhere."""
    x, y = _angles(chart)
    scale = chart.periods[0] / (2 * np.pi)
    return stream_velocity(chart, amplitude * scale * np.sin(x) * np.sin(y))


def random_q(chart: ChartGeometry, seed=0, amplitude=0.1, modes=3, terms=6):
    """Band-limited random tangential Q-tensor field."""
    rng = np.random.default_rng(seed)
    x, y = _angles(chart)
    out = np.zeros(tuple(chart.grid_shape) + (3, 3))
    for _ in range(terms):
        m, n = rng.integers(-modes, modes + 1, 2)
        out += np.multiply.outer(np.cos(m * x + n * y + rng.uniform(0, 2 * np.pi)), rng.normal(size=(3, 3)))
    q = project(out, "tangential-Q", chart.normal)
    return amplitude * q / max(np.max(np.abs(q)), 1e-300)


def uniform_uniaxial(chart: ChartGeometry, s, angle=0.0):
    """Tangentially uniaxial ``q = s(d x d - Id_S / 2)``, ``beta = -s / 3``.

    ``d`` makes the given angle with the first chart direction.
    """
    e = chart.tangent_basis
    e1 = e[..., 0, :] / np.linalg.norm(e[..., 0, :], axis=-1, keepdims=True)
    e2 = np.cross(chart.normal, e1)
    d = np.cos(angle) * e1 + np.sin(angle) * e2
    q = s * (outer(d, d) - 0.5 * chart.surface_identity)
    return q, np.full(tuple(chart.grid_shape), -s / 3.0)


# -------------------------------------------------------------- utilities


class _Fourier:
    """Constant-coefficient operators in chart coordinates."""

    def __init__(self, chart: ChartGeometry):
        ks = []
        for n, p in zip(chart.grid_shape, chart.periods):
            k = 2 * np.pi * sfft.fftfreq(n, d=p / n)
            k[n // 2] = 0.0
            ks.append(k)
        self.k1 = ks[0][:, None]
        self.k2 = ks[1][None, :]
        self.ksq = self.k1**2 + self.k2**2
        n1, n2 = chart.grid_shape
        nyq = np.zeros((n1, n2), bool)
        nyq[n1 // 2, :] = True
        nyq[:, n2 // 2] = True
        self.nyq = nyq

    @staticmethod
    def _b(a, F):
        return a.reshape(a.shape + (1,) * (F.ndim - 2))

    def fft(self, f):
        return sfft.fft2(f, axes=(0, 1), workers=fft_workers())

    def ifft(self, F):
        return sfft.ifft2(F, axes=(0, 1), workers=fft_workers()).real

    def solve(self, rhs, alpha, beta, symbol=None):
        """Solve ``(alpha + beta * symbol) u = rhs`` with ``symbol = |k|^2`` by default."""
        s = self.ksq if symbol is None else symbol
        F = self.fft(rhs)
        F = F / self._b(alpha + beta * s, F)
        F[self.nyq] = 0.0
        return self.ifft(F)

    def filter(self, f):
        F = self.fft(f)
        F[self.nyq] = 0.0
        return self.ifft(F)


def _check_dt(dt, n_steps):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if int(n_steps) < 0:
        raise ValueError("n_steps must be non-negative")


def _maxnorm(*arrs):
    return max(float(np.max(np.abs(a), initial=0.0)) for a in arrs)


class _Guard:
    def __init__(self, state, chart, dt):
        self.bound = BLOWUP_FACTOR * max(_maxnorm(state.v, state.q), 1.0)
        self.h = min(chart.spacing) * min(1.0, float(np.sqrt(np.min(chart.g[..., 0, 0]))),
                                          float(np.sqrt(np.min(chart.g[..., 1, 1]))))
        self.dt = dt
        self.warned = False

    def __call__(self, step, state):
        nrm = _maxnorm(state.v, state.q, state.beta)
        if not np.isfinite(nrm) or nrm > self.bound:
            raise BlowUp(step, state.t, nrm, self.bound)
        vmax = _maxnorm(state.v)
        if not self.warned and self.dt * vmax / self.h > 1.0:
            warnings.warn(f"CFL number {self.dt * vmax / self.h:.2f} exceeds 1", CFLWarning, stacklevel=3)
            self.warned = True


def _drive(chart, params, state, dt, n_steps, step, sample_every, snapshot_every, tol=None, residual=None):
    """Common time loop: energies, audit residual, sampling and guards.

    ``step(state) -> (new_state, rates)`` where ``rates`` describe the
    state passed in.
    """
    _check_dt(dt, n_steps)
    sample_every = max(int(sample_every), 1)
    rec = TrajectoryRecord()
    guard = _Guard(state, chart, dt)
    prev = None
    max_incr = 0.0
    steps_taken = 0
    for n in range(int(n_steps) + 1):
        last = n == int(n_steps)
        if last:
            _, rates = step(state, dry=True)
        else:
            new, rates = step(state)
        rep = energies(chart, params, state, rates)
        if prev is not None:
            prev.audit_residual = (rep.E_tot - prev.E_tot) / dt + 2 * (prev.R_IM + prev.R_NV)
            max_incr = max(max_incr, (rep.E_tot - prev.E_tot) / max(abs(prev.E_tot), 1e-300))
        stop = False
        if residual is not None and tol is not None and not last:
            r = residual(state)
            rec.meta.setdefault("residuals", []).append(r)
            stop = r < tol
        if n % sample_every == 0 or last or stop:
            rec._push(rep)
        if snapshot_every and (n % int(snapshot_every) == 0 or last or stop):
            rec.snapshots.append(state.copy())
        prev = rep
        if last or stop:
            break
        state = new
        steps_taken += 1
        guard(n + 1, state)
    rec.final = state
    rec.meta.update(max_rel_increase=max_incr, steps=steps_taken)
    return rec


# ------------------------------------------------------------ flat solver

FLAT_MODES = ("full", "linear_jaumann", "isotropic")


def run_flat_be2d(chart: ChartGeometry, params: ModelParams, init: SimState, dt, n_steps, phi=None,
                  mode="full", rows=None, sample_every=1, snapshot_every=0) -> TrajectoryRecord:
    """Flat nematodynamics with ``beta = 0``.

    ``rows`` selects which of the two equivalent stress rows is assembled
    (``"jaumann"`` or ``"material"``); by default it matches ``phi``.
    """
    if not chart.is_flat:
        raise ValueError("run_flat_be2d requires a flat chart")
    if mode not in FLAT_MODES:
        raise ValueError(f"mode must be one of {FLAT_MODES}")
    phi = Phi(phi or params.phi)
    if mode != "full":
        phi = Phi.JAUMANN
    params = replace(params, phi=phi)
    rows = Phi(rows or phi)
    xi = 0.0 if mode == "isotropic" else params.xi
    nu = chart.normal
    F = _Fourier(chart)
    L, M, u, rho = params.L, params.M, params.upsilon, params.rho
    Mt = M + 0.5 * u * xi**2 if mode == "full" else M
    zero = np.zeros(tuple(chart.grid_shape))

    def step(st, dry=False):
        q, v = st.q, st.v
        gv = componentwise_derivative(chart, v)
        dg = gradients_from_velocity_gradient(gv, nu)
        S, A, G = dg.S, dg.A, dg.G
        gq = componentwise_derivative(chart, q)
        adv = np.einsum("...ABk,...k->...AB", gq, v)
        rot = q @ A - A @ q
        hTH = conforming_thermotropic(params.a, params.b, params.c, q, zero)["h"]
        nv0 = conforming_nematic_viscous(u, phi, q, zero, np.zeros_like(q), zero, G, nu)
        if mode == "full":
            rhs = hTH + xi * nv0["h1"] + xi**2 * nv0["h2"]
            transport = adv + rot if phi is Phi.JAUMANN else adv
        else:
            rhs = hTH + u * xi * S
            transport = adv + rot
        q_new = F.solve(Mt / dt * q - Mt * transport + rhs, Mt / dt, L)
        hEL = L * F.ifft(-F._b(F.ksq, q_new) * F.fft(q_new))
        D = (hEL + rhs) / Mt
        Jq = D if phi is Phi.JAUMANN else D + rot
        rates = Rates(DQ=Rate(D, phi), gradV=gv)
        if dry:
            return None, rates
        p_th = thermotropic_density(q, params.a, params.b, params.c)
        sigma = elastic_stress(gq, nu, L)
        if mode == "full":
            sigma = sigma + conforming_immobility(M, phi, q, zero, D, zero, np.zeros_like(v))["sigma"]
            Drow = Jq if rows is Phi.JAUMANN else Jq - rot
            nv = conforming_nematic_viscous(u, rows, q, zero, Drow, zero, G, nu)
            sigma = sigma + xi * nv["sigma1"] + xi**2 * nv["sigma2"]
        else:
            hU = hEL + hTH
            sigma = sigma + (q @ hU - hU @ q) - (u * xi / M) * hU - 2 * u * xi * (q @ S + S @ q)
        f = Div_c(chart, sigma) + componentwise_derivative(chart, p_th) - rho * np.einsum("...Ak,...k->...A", gv, v)
        fh = F.fft(f)
        k = (F.k1, F.k2)
        kdotf = k[0] * fh[..., 0] + k[1] * fh[..., 1]
        ksq = np.where(F.ksq > 0, F.ksq, 1.0)
        ph = np.where(F.ksq > 0, -1j * kdotf / ksq, 0.0)
        fh[..., 0] = fh[..., 0] - 1j * k[0] * ph
        fh[..., 1] = fh[..., 1] - 1j * k[1] * ph
        fh[..., 2] = 0.0
        vh = (rho / dt * F.fft(v) + fh) / F._b(rho / dt + u * F.ksq, fh)
        vh[F.nyq] = 0.0
        v_new = F.ifft(vh)
        p_new = F.ifft(ph)
        return SimState(st.t + dt, v_new, p_new, F.filter(q_new), st.beta), rates

    st = init.copy()
    st.beta = np.zeros(tuple(chart.grid_shape))
    return _drive(chart, params, st, dt, n_steps, step, sample_every, snapshot_every)


# ------------------------------------------------------- gradient flow

GF_MODES = ("free_beta", "fixed_beta")


def _stabilizers(chart, params, Q):
    """Upper bounds for the elastic and thermotropic Hessians."""
    c_el = float(np.max(np.maximum(chart.g_inv[..., 0, 0], chart.g_inv[..., 1, 1])))
    m = float(np.max(np.sqrt(ddot(Q, Q))))
    s_th = 2 * abs(params.a) + 4 * abs(params.b) * m + 12 * params.c * m**2
    return c_el, s_th


def run_gradient_flow(chart: ChartGeometry, params: ModelParams, init, dt, n_steps, mode="fixed_beta",
                      beta0=None, tol=None, sample_every=1, snapshot_every=0,
                      stabilization=None) -> TrajectoryRecord:
    """Relax ``M_tilde q' = h_EL + h_TH`` (and ``M_tilde beta' = omega_EL + omega_TH``).

    ``init`` is ``(q, beta)``.  With ``tol`` the run stops once the L2 norm
    of the driving fields drops below it.  ``stabilization`` overrides the
    ``(elastic, thermotropic)`` stabilizer constants.
    """
    if mode not in GF_MODES:
        raise ValueError(f"mode must be one of {GF_MODES}")
    q0, b0 = init
    n = tuple(chart.grid_shape)
    if mode == "fixed_beta":
        if beta0 is None:
            b = np.broadcast_to(np.asarray(b0, dtype=float), n)
            if np.ptp(b) > 0:
                raise ValueError("fixed_beta mode needs a constant beta (pass beta0)")
            beta0 = float(b.flat[0])
        b0 = np.full(n, float(beta0))
    params = replace(params, phi=Phi.MATERIAL)
    state = SimState(0.0, np.zeros(n + (3,)), np.zeros(n), project(np.asarray(q0, float), "tangential-Q", chart.normal),
                     np.broadcast_to(np.asarray(b0, dtype=float), n).copy())
    Mt = params.M_tilde
    F = _Fourier(chart)
    c_el, s_th = stabilization or _stabilizers(chart, params, state.Q(chart))
    nu = chart.normal

    def fields(st):
        Q = st.Q(chart)
        d = decompose(nu, params.L * laplace_c(chart, Q) + thermotropic_field(Q, params.a, params.b, params.c))
        return Q, d.q, (d.beta if mode == "free_beta" else np.zeros(n))

    def residual(st):
        _, h, w = fields(st)
        return float(np.sqrt(area_integral(chart, ddot(h, h) + 1.5 * w**2)))

    def step(st, dry=False):
        Q, h, w = fields(st)
        if dry:
            D = conforming_compose(h, w, nu) / Mt
            return None, Rates(DQ=Rate(D, Phi.MATERIAL))
        dq = F.solve(h, Mt / dt + s_th, params.L * c_el)
        dq = project(dq, "tangential-Q", nu)
        beta = st.beta
        if mode == "free_beta":
            beta = beta + F.solve(w, Mt / dt + s_th, params.L * c_el)
        new = SimState(st.t + dt, st.v, st.p, st.q + dq, beta)
        D = (new.Q(chart) - Q) / dt
        return new, Rates(DQ=Rate(D, Phi.MATERIAL))

    rec = _drive(chart, params, state, dt, n_steps, step, sample_every, snapshot_every, tol=tol, residual=residual)
    rec.meta["final_residual"] = residual(rec.final)
    rec.meta["stabilization"] = (c_el, s_th)
    return rec


# --------------------------------------------------- stationary surfaces


class _Projector:
    """Divergence-free projection of tangential fields on a curved chart."""

    def __init__(self, chart, F, tol=1e-10, maxiter=500):
        self.chart, self.F, self.tol, self.maxiter = chart, F, tol, maxiter
        mu = chart.area_form
        self.w = [mu * chart.g_inv[..., i, i] for i in range(2)]
        self.mg = mu[..., None, None] * chart.g_inv
        self.pre = (self.F.k1**2 * float(np.mean(self.w[0])) + self.F.k2**2 * float(np.mean(self.w[1])))
        self.n = int(np.prod(chart.grid_shape))
        self.shape = tuple(chart.grid_shape)
        self.last_iterations = 0

    def _A(self, x):
        ch = self.chart
        f = x.reshape(self.shape)
        df = ch.grad_components(f)
        flux = np.einsum("...ij,...j->...i", self.mg, df)
        return -(ch.diff(flux[..., 0], 0) + ch.diff(flux[..., 1], 1)).ravel()

    def _M(self, x):
        Fh = self.F.fft(x.reshape(self.shape))
        s = np.where(self.pre > 0, self.pre, 1.0)
        Fh = np.where(self.pre > 0, Fh / s, 0.0)
        return self.F.ifft(Fh).ravel()

    def __call__(self, v):
        ch = self.chart
        mu = ch.area_form
        comps = np.einsum("...A,...iA->...i", v, ch.dual_basis)
        b = -(ch.diff(mu * comps[..., 0], 0) + ch.diff(mu * comps[..., 1], 1))
        nb = float(np.linalg.norm(b))
        if nb < 1e-300:
            return v, np.zeros(self.shape)
        A = LinearOperator((self.n, self.n), matvec=self._A, dtype=float)
        Mop = LinearOperator((self.n, self.n), matvec=self._M, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        phi, info = cg(A, b.ravel(), rtol=self.tol, atol=1e-14, maxiter=self.maxiter, M=Mop, callback=cb)
        self.last_iterations = count[0]
        if info != 0:
            raise ProjectionNonConvergence(f"pressure solve did not reach {self.tol:g} in {self.maxiter} iterations")
        phi = phi.reshape(self.shape)
        return v - componentwise_derivative(ch, phi), phi


def run_stationary_nemato(chart: ChartGeometry, params: ModelParams, init: SimState, dt, n_steps, phi=None,
                          sample_every=1, snapshot_every=0, proj_tol=1e-10, proj_maxiter=500) -> TrajectoryRecord:
    """Tangential flow with constant ``beta`` on a fixed curved chart (``xi = 0``)."""
    if params.xi != 0:
        raise ValueError("the stationary-surface solver requires xi = 0")
    phi = Phi(phi or params.phi)
    params = replace(params, phi=phi)
    beta0 = float(np.mean(init.beta))
    if np.ptp(np.asarray(init.beta)) > 0:
        raise ValueError("beta must be constant")
    nu = chart.normal
    P = chart.surface_identity
    B = chart.shape_embedded
    F = _Fourier(chart)
    proj = _Projector(chart, F, proj_tol, proj_maxiter)
    L, M, u, rho = params.L, params.M, params.upsilon, params.rho
    c_el = float(np.max(np.maximum(chart.g_inv[..., 0, 0], chart.g_inv[..., 1, 1])))
    iters = []

    def step(st, dry=False):
        q, v = st.q, st.v
        Q = st.Q(chart)
        gv = componentwise_derivative(chart, v)
        dg = gradients_from_velocity_gradient(gv, nu)
        A = dg.A
        gq = tangential_derivative(chart, q)
        adv = np.einsum("...ABk,...k->...AB", gq, v)
        rot = q @ A - A @ q
        gQ = componentwise_derivative(chart, Q)
        H = L * laplace_c(chart, Q)
        dEL = decompose(nu, H)
        hTH = decompose(nu, thermotropic_field(Q, params.a, params.b, params.c)).q
        transport = adv + rot if phi is Phi.JAUMANN else adv
        dq = F.solve(dEL.q + hTH - M * transport, M / dt, L * c_el)
        q_new = project(q + dq, "tangential-Q", nu)
        Dq = project((q_new - q) / dt + transport, "tangential-Q", nu)
        if phi is Phi.JAUMANN:
            DQ = Dq
        else:
            b = dg.b
            eta = np.einsum("...AB,...B->...A", q, b) - 1.5 * beta0 * b
            DQ = Dq + outer(eta, nu) + outer(nu, eta)
        im = immobility(chart, params, Q, Rate(DQ, phi))
        rates = Rates(DQ=Rate(DQ, phi), gradV=gv)
        if dry:
            return None, rates
        sigma = elastic_stress(gQ, nu, L) + im.conforming["sigma"] + 2 * u * dg.S
        zeta = dEL.eta + im.conforming["zeta"]
        p_th = thermotropic_density(Q, params.a, params.b, params.c)
        coupling = np.einsum("...AB,...B->...A", 2 * B @ q - 3 * beta0 * B, zeta)
        f = (np.einsum("...AB,...B->...A", P, Div_c(chart, sigma)) + componentwise_derivative(chart, p_th)
             + coupling - rho * np.einsum("...AB,...B->...A", P, np.einsum("...Ak,...k->...A", gv, v)))
        dv = F.solve(f, rho / dt, u * c_el)
        v_star = np.einsum("...AB,...B->...A", P, v + dv)
        v_new, phi_p = proj(v_star)
        iters.append(proj.last_iterations)
        return SimState(st.t + dt, v_new, rho * phi_p / dt, q_new, st.beta), rates

    st = init.copy()
    st.v = np.einsum("...AB,...B->...A", P, st.v)
    st.q = project(st.q, "tangential-Q", nu)
    rec = _drive(chart, params, st, dt, n_steps, step, sample_every, snapshot_every)
    rec.meta["projection_iterations"] = iters
    return rec
