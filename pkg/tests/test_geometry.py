import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfnema.errors import DegenerateMetric, NonPeriodicDomain, ShapeMismatch
from surfnema.geometry import (
    EmbeddedTorus,
    FlatTorus,
    area_integral,
    build_chart,
    chart_from_embedding,
    fd4_derivative,
    fft_workers,
    gauss_relation_residual,
    riemann_gauss_curvature,
    spectral_derivative,
)


def test_torus_outer_equator_curvatures(torus32):
    # theta = 0 is the outer equator: H = 1/r + 1/(R + r) = 4/3, K = 1/3
    assert torus32.mean_curv[0, 0] == pytest.approx(4 / 3, rel=1e-15)
    assert torus32.gauss_curv[0, 0] == pytest.approx(1 / 3, rel=1e-15)


def test_torus_normal_points_to_core(torus32):
    X, nu = torus32.X, torus32.normal
    core = X.copy()
    core[..., 2] = 0.0
    core *= (2.0 / np.linalg.norm(core, axis=-1))[..., None]
    assert np.all(np.einsum("...A,...A->...", nu, core - X) > 0)


def test_torus_area_exact(torus32):
    assert torus32.area() == pytest.approx(4 * np.pi**2 * 2.0, rel=1e-14)


def test_flat_chart_is_trivial(flat32):
    assert flat32.is_flat
    assert np.all(flat32.mean_curv == 0) and np.all(flat32.gauss_curv == 0)
    assert np.allclose(flat32.normal, [0, 0, 1])
    assert flat32.area() == pytest.approx(4 * np.pi**2)


def test_shape_operator_embedded_has_trace_H(torus32):
    B = torus32.shape_embedded
    assert np.allclose(np.trace(B, axis1=-2, axis2=-1), torus32.mean_curv, atol=1e-14)
    assert np.allclose(np.einsum("...AB,...B->...A", B, torus32.normal), 0, atol=1e-14)


def test_string_kind_rejected():
    with pytest.raises(NonPeriodicDomain):
        build_chart("sphere", (16, 16))


def test_bad_grid_and_scheme():
    with pytest.raises(ShapeMismatch):
        build_chart(FlatTorus(), (15, 16))
    with pytest.raises(ValueError):
        build_chart(FlatTorus(), (16, 16), "fd2")


def test_invalid_radii():
    with pytest.raises(ValueError):
        EmbeddedTorus(0.0, 1.0)


def test_degenerate_embedding():
    X = np.zeros((16, 16, 3))
    with pytest.raises(DegenerateMetric):
        chart_from_embedding(X)


def test_spectral_derivative_exact_on_trig():
    x = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    f = np.sin(3 * x)
    assert np.allclose(spectral_derivative(f, 0, 2 * np.pi), 3 * np.cos(3 * x), atol=1e-12)


def test_fd4_order():
    errs = []
    for n in (32, 64):
        x = np.linspace(0, 2 * np.pi, n, endpoint=False)
        errs.append(np.max(np.abs(fd4_derivative(np.sin(x), 0, 2 * np.pi) - np.cos(x))))
    assert np.log2(errs[0] / errs[1]) > 3.9


def test_chart_from_embedding_reproduces_closed_form(torus32):
    c = chart_from_embedding(torus32.X, torus32.periods)
    for name in ("g", "normal", "shape_op", "mean_curv", "gauss_curv", "christoffel", "area_form"):
        assert np.allclose(getattr(c, name), getattr(torus32, name), atol=1e-11), name


def test_gauss_curvature_from_connection(torus64):
    assert np.max(np.abs(riemann_gauss_curvature(torus64) - torus64.gauss_curv)) < 1e-12
    fd = build_chart(EmbeddedTorus(), (64, 64), "fd4")
    assert np.max(np.abs(riemann_gauss_curvature(fd) - fd.gauss_curv)) < 1e-3


def test_gauss_relation_round_off(torus32):
    assert gauss_relation_residual(torus32) < 1e-13


def test_area_integral_shape_check(flat32):
    with pytest.raises(ShapeMismatch):
        area_integral(flat32, np.ones((8, 8)))


def test_fft_workers_env(monkeypatch):
    monkeypatch.setenv("SURFNEMA_THREADS", "0")
    assert fft_workers() == -1
    monkeypatch.setenv("SURFNEMA_THREADS", "3")
    assert fft_workers() == 3


@settings(max_examples=20, deadline=None)
@given(R=st.floats(1.2, 4.0), r=st.floats(0.2, 1.0))
def test_torus_gauss_bonnet(R, r):
    chart = build_chart(EmbeddedTorus(R, r), (32, 32))
    assert abs(area_integral(chart, chart.gauss_curv)) < 1e-10
    assert chart.area() == pytest.approx(4 * np.pi**2 * R * r, rel=1e-12)
