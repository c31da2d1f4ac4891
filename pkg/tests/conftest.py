import numpy as np
import pytest

from surfnema.geometry import EmbeddedTorus, FlatTorus, build_chart

ACCEPTANCE = {}


def smooth_field(chart, tail, seed, modes=3, terms=4):
    """Band-limited random field with the given trailing shape."""
    rng = np.random.default_rng(seed)
    t1, t2 = np.meshgrid(*chart.coords, indexing="ij")
    t1 = t1 * 2 * np.pi / chart.periods[0]
    t2 = t2 * 2 * np.pi / chart.periods[1]
    out = np.zeros(tuple(chart.grid_shape) + tuple(tail))
    for _ in range(terms):
        amp = rng.normal(size=tail)
        m, n = rng.integers(-modes, modes + 1, 2)
        out += np.multiply.outer(np.sin(m * t1 + n * t2 + rng.uniform(0, 2 * np.pi)), amp)
    return out


@pytest.fixture(scope="session")
def flat32():
    return build_chart(FlatTorus(), (32, 32))


@pytest.fixture(scope="session")
def flat64():
    return build_chart(FlatTorus(), (64, 64))


@pytest.fixture(scope="session")
def torus32():
    return build_chart(EmbeddedTorus(2.0, 1.0), (32, 32))


@pytest.fixture(scope="session")
def torus64():
    return build_chart(EmbeddedTorus(2.0, 1.0), (64, 64))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
