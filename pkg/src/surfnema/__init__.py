"""Surface Beris-Edwards nematodynamics on periodic charts."""

from . import diagnostics, fields, geometry, io, kinematics, qtensor, solvers, terms
from .diagnostics import EnergyReport, dissipation_audit, energies, leslie_coefficients, verify_lemmas
from .geometry import ChartGeometry, EmbeddedTorus, FlatTorus, area_integral, build_chart
from .qtensor import decompose, recompose, thermotropic_roots, uniaxial
from .solvers import SimState, TrajectoryRecord, run_flat_be2d, run_gradient_flow, run_stationary_nemato
from .terms import ModelParams, Phi, Rate, TermBundle

__version__ = "0.1.0"

__all__ = [
    "ChartGeometry",
    "EmbeddedTorus",
    "EnergyReport",
    "FlatTorus",
    "ModelParams",
    "Phi",
    "Rate",
    "SimState",
    "TermBundle",
    "TrajectoryRecord",
    "area_integral",
    "build_chart",
    "decompose",
    "diagnostics",
    "dissipation_audit",
    "energies",
    "fields",
    "geometry",
    "io",
    "kinematics",
    "leslie_coefficients",
    "qtensor",
    "recompose",
    "run_flat_be2d",
    "run_gradient_flow",
    "run_stationary_nemato",
    "solvers",
    "terms",
    "thermotropic_roots",
    "uniaxial",
    "verify_lemmas",
]
