"""Pointwise Q-tensor algebra.

All functions broadcast over leading axes: a Q-tensor is any array ending in
``(3, 3)`` and a normal any array ending in ``(3,)``.  Tangential parts are
returned as embedded proxies (3x3 matrices annihilating the normal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnitDirector, NotAQTensor
from .fields import outer, surface_identity, sym, tr

__all__ = [
    "QDecomposition",
    "ThermotropicRoots",
    "decompose",
    "recompose",
    "conforming_compose",
    "uniaxial",
    "biaxiality_polynomial",
    "biaxiality_measure",
    "conforming_biaxiality",
    "trace_power_identities",
    "is_uniaxial",
    "thermotropic_roots",
    "check_qtensor",
    "random_qtensor",
]

_I3 = np.eye(3)


@dataclass(frozen=True)
class QDecomposition:
    """``Q = q + eta x nu + nu x eta + beta (nu x nu - Id_S / 2)``."""

    q: np.ndarray
    eta: np.ndarray
    beta: np.ndarray

    def parts(self, nu):
        """The three mutually orthogonal summands."""
        P = surface_identity(nu)
        b = np.asarray(self.beta)[..., None, None]
        return self.q, outer(self.eta, nu) + outer(nu, self.eta), b * (outer(nu, nu) - 0.5 * P)


def _normal(nu):
    return np.asarray(getattr(nu, "normal", nu), dtype=float)


def check_qtensor(Q, tol=1e-10):
    Q = np.asarray(Q, dtype=float)
    scale = max(1.0, float(np.max(np.abs(Q))) if Q.size else 1.0)
    if np.max(np.abs(Q - np.swapaxes(Q, -1, -2)), initial=0.0) > tol * scale:
        raise NotAQTensor("not symmetric")
    if np.max(np.abs(tr(Q)), initial=0.0) > tol * scale:
        raise NotAQTensor("not traceless")
    return Q


def decompose(nu, Q) -> QDecomposition:
    """Split a Q-tensor relative to the normal; ``nu`` may be a chart."""
    nu = _normal(nu)
    Q = check_qtensor(Q)
    P = surface_identity(nu)
    beta = np.einsum("...A,...AB,...B->...", nu, Q, nu)
    eta = np.einsum("...AB,...BC,...C->...A", P, Q, nu)
    T = P @ Q @ P
    q = T - 0.5 * tr(T)[..., None, None] * P
    return QDecomposition(q=q, eta=eta, beta=beta)


def recompose(nu, d: QDecomposition):
    nu = _normal(nu)
    q, e, b = d.parts(nu)
    return q + e + b


def conforming_compose(q, beta, nu):
    """``Q_Cs(q, beta) = q + beta (nu x nu - Id_S / 2)``."""
    nu = _normal(nu)
    P = surface_identity(nu)
    return np.asarray(q) + np.asarray(beta)[..., None, None] * (outer(nu, nu) - 0.5 * P)


def uniaxial(s, d):
    """``s (d x d - Id / 3)``; raises for non-unit directors."""
    d = np.asarray(d, dtype=float)
    if np.max(np.abs(np.linalg.norm(d, axis=-1) - 1.0), initial=0.0) > 1e-10:
        raise NonUnitDirector("director must have unit length")
    return np.asarray(s, dtype=float)[..., None, None] * (outer(d, d) - _I3 / 3)


def _tr2(Q):
    return np.einsum("...ij,...ji->...", Q, Q)


def biaxiality_polynomial(Q):
    """``Q^4 - 5/6 TrQ^2 Q^2 + 1/9 (TrQ^2)^2 Id``; zero iff ``Q`` is uniaxial."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    t2 = tr(Q2)[..., None, None]
    return Q2 @ Q2 - (5.0 / 6.0) * t2 * Q2 + (t2 * t2 / 9.0) * _I3


def biaxiality_measure(Q):
    """``(TrQ^2)^3 - 6 (TrQ^3)^2``."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    return tr(Q2) ** 3 - 6.0 * tr(Q2 @ Q) ** 2


def conforming_biaxiality(q, beta, nu):
    """Factorized polynomial for conforming states."""
    t2 = _tr2(q)
    beta = np.asarray(beta)
    pref = (2 * t2 - 9 * beta**2) / 36.0
    return pref[..., None, None] * conforming_compose(-3 * beta[..., None, None] * q, 2 * t2, nu)


def trace_power_identities(Q) -> dict:
    """Max relative residuals of the even trace-power identities."""
    Q = check_qtensor(Q)
    Q2 = Q @ Q
    Q3 = Q2 @ Q
    Q4 = Q2 @ Q2
    t2, t3 = tr(Q2), tr(Q3)
    t4, t6, t8 = tr(Q4), tr(Q4 @ Q2), tr(Q4 @ Q4)
    scale = np.maximum(t2, 1e-300)
    res = {
        "tr4": np.abs(t4 - 0.5 * t2**2) / scale**2,
        "tr6": np.abs(t6 - 0.25 * t2**3 - t3**2 / 3.0) / scale**3,
        "tr8": np.abs(t8 - t2**4 / 8.0 - (4.0 / 9.0) * t2 * t3**2) / scale**4,
    }
    return {k: float(np.max(v, initial=0.0)) for k, v in res.items()}


def is_uniaxial(Q, tol=1e-8, eps=1e-30):
    """Classification ``|B(Q)| / max(TrQ^2, eps)^2 < tol``."""
    Q = np.asarray(Q, dtype=float)
    B = biaxiality_polynomial(Q)
    nB = np.sqrt(np.einsum("...ij,...ij->...", B, B))
    return nB / np.maximum(_tr2(Q), eps) ** 2 < tol


@dataclass(frozen=True)
class ThermotropicRoots:
    S_star: float
    beta0_stable: float


def thermotropic_roots(a, b, c) -> ThermotropicRoots:
    """Order of the stable nematic state of the Landau-de Gennes potential."""
    disc = b * b - 24 * a * c
    if c <= 0 or disc < 0:
        raise ValueError("nematic root requires c > 0 and b^2 - 24 a c >= 0")
    root = np.sqrt(disc)
    return ThermotropicRoots(S_star=(root - b) / (4 * c), beta0_stable=(b - root) / (12 * c))


def random_qtensor(rng, size=(), scale=1.0):
    """Random symmetric traceless 3x3 tensors."""
    A = rng.normal(size=tuple(np.atleast_1d(size)) + (3, 3)) if size != () else rng.normal(size=(3, 3))
    S = sym(A) * scale
    return S - (tr(S) / 3)[..., None, None] * _I3
