import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import smooth_field
from surfnema.diagnostics import (
    EnergyReport,
    Rates,
    dissipation_audit,
    energies,
    leslie_coefficients,
    verify_lemmas,
)
from surfnema.errors import RateFlavorMismatch, ShapeMismatch, TooFewSamples
from surfnema.fields import componentwise_derivative, ddot, project
from surfnema.geometry import area_integral
from surfnema.kinematics import deformation_gradients
from surfnema.solvers import SimState, zero_state
from surfnema.terms import ModelParams, Rate


def test_zero_state_energies(flat32, torus32):
    params = ModelParams(kappa=1.5, H0=0.25)
    rep = energies(torus32, params, zero_state(torus32))
    expect = 0.75 * area_integral(torus32, (torus32.mean_curv - 0.25) ** 2)
    assert rep.E_BE == pytest.approx(expect, rel=1e-14)
    assert rep.E_K == rep.E_EL == rep.E_TH == 0.0
    assert rep.E_tot == rep.E_BE
    flat = energies(flat32, params, zero_state(flat32))
    assert flat.E_tot == pytest.approx(0.75 * 0.25**2 * 4 * np.pi**2, rel=1e-14)
    assert energies(flat32, ModelParams(kappa=1.5), zero_state(flat32)).E_tot == 0.0
    assert flat.R_NV == 0.0


def test_kinetic_energy_and_isotropic_dissipation(torus32):
    params = ModelParams(upsilon=0.8, rho=2.0)
    V = smooth_field(torus32, (3,), 1)
    st0 = zero_state(torus32)
    st0 = SimState(0.5, V, st0.p, st0.q, st0.beta)
    gradV = componentwise_derivative(torus32, V)
    rep = energies(torus32, params, st0, Rates(gradV=gradV))
    assert rep.t == 0.5
    assert rep.E_K == pytest.approx(area_integral(torus32, np.sum(V * V, axis=-1)), rel=1e-14)
    dg = deformation_gradients(torus32, V)
    G = dg.G
    assert rep.R_NV == pytest.approx(0.2 * area_integral(torus32, ddot(G + np.swapaxes(G, -1, -2),
                                                                        G + np.swapaxes(G, -1, -2))), rel=1e-12)
    assert rep.inext_residual > 0


def test_energy_input_checks(flat32):
    st0 = zero_state(flat32)
    bad = SimState(0.0, np.zeros((32, 32, 2)), st0.p, st0.q, st0.beta)
    with pytest.raises(ShapeMismatch):
        energies(flat32, ModelParams(), bad)
    D = Rate(np.zeros((32, 32, 3, 3)), "material")
    with pytest.raises(RateFlavorMismatch):
        energies(flat32, ModelParams(phi="jaumann"), st0, Rates(DQ=D))


def test_immobility_dissipation(flat32):
    D = project(smooth_field(flat32, (3, 3), 2), "Q")
    rep = energies(flat32, ModelParams(M=3.0, upsilon=0.0), zero_state(flat32), Rates(DQ=Rate(D, "jaumann")))
    assert rep.R_IM == pytest.approx(1.5 * area_integral(flat32, ddot(D, D)), rel=1e-14)


def test_audit_needs_three_samples():
    with pytest.raises(TooFewSamples):
        dissipation_audit([EnergyReport(t=0.0), EnergyReport(t=1.0)])


def test_audit_of_exact_exponential_decay():
    t = np.linspace(0, 1, 201)
    reps = [EnergyReport(t=s, E_tot=np.exp(-2 * s), R_IM=0.5 * np.exp(-2 * s), R_NV=0.5 * np.exp(-2 * s))
            for s in t]
    audit = dissipation_audit(reps)
    # centered difference error is h^2/6 |E'''| = 8 h^2 / 6
    assert audit.max_residual < 8 * (t[1] - t[0]) ** 2 / 6 * 1.01
    assert audit.max_relative_increase == 0.0
    assert len(audit.residuals) == len(t) - 2


def test_audit_flags_energy_increase():
    reps = [EnergyReport(t=float(i), E_tot=e) for i, e in enumerate([1.0, 0.5, 0.75, 0.7])]
    assert dissipation_audit(reps).max_relative_increase == pytest.approx(0.5)


def test_leslie_isotropic_limit():
    c = leslie_coefficients(upsilon=1.7, s=0.5, xi=0.0)
    assert c.alphas == pytest.approx((0, 0, 0, 3.4, 0, 0))
    assert c.parodi_residual == 0.0 and all(c.leslie_inequality_flags)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(0.01, 5), s=st.floats(-1, 1), xi=st.floats(-1.4, 1.4), M=st.floats(0, 5))
def test_leslie_parodi_and_determinant(u, s, xi, M):
    for jau in (False, True):
        c = leslie_coefficients(u, s, xi, M=M, jaumann=jau)
        scale = 1 + u + M
        assert abs(c.parodi_residual) < 1e-12 * scale
        assert abs(c.determinant_residual) < 1e-10 * scale**2
        assert c.alpha2 + c.alpha3 == pytest.approx(c.alpha6 - c.alpha5, abs=1e-12 * scale)


def test_lemmas_pass():
    rep = verify_lemmas(seed=2, n_samples=100)
    assert rep.all_passed, "\n".join(rep.lines())
    assert any(line.startswith("NOTE") for line in rep.lines())
    assert rep.orders["adjoint_vs_trace_divergence_fd4"] > 3.5
