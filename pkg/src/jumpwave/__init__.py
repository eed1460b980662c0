"""jumpwave: hyperbolic systems with coefficient jumps across interfaces.

Subpackages map onto the solver stack: `spectral` (eigen-structure),
`tracer` (backward characteristics), `exact` (piecewise-constant point
solvers), `picard` (variable-coefficient fixed point), `fv_oracle`
(independent upwind cross-check), `energy` (symmetric-system scheme and
energy monitor), and `cli` (config-driven runs).
"""

__version__ = "0.1.0"

from . import errors
from .exact import (
    PiecewiseConstantSystem,
    piecewise_constant_system,
    sample_on_grid,
    solve_generic,
    solve_single_interface,
    solve_two_interface,
    verify_interface,
)
from .fields import CoefficientField, SpeedField
from .initial import InitialData
from .solution import SolutionField
from .spectral import HyperbolicityReport, SpectralDecomposition, classify, decompose, decompose_field
from .tracer import CharacteristicPath, crossing_time_sensitivity, foot_and_crossings, trace

__all__ = [
    "errors",
    "CoefficientField",
    "SpeedField",
    "InitialData",
    "SolutionField",
    "SpectralDecomposition",
    "HyperbolicityReport",
    "classify",
    "decompose",
    "decompose_field",
    "CharacteristicPath",
    "trace",
    "foot_and_crossings",
    "crossing_time_sensitivity",
    "PiecewiseConstantSystem",
    "piecewise_constant_system",
    "solve_single_interface",
    "solve_two_interface",
    "solve_generic",
    "sample_on_grid",
    "verify_interface",
    "__version__",
]
