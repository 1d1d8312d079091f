"""Numerical tools for RIP thresholds of spurious second-order points in low-rank sensing."""
from importlib.metadata import PackageNotFoundError, version

from .bounds import compute_alpha_beta, delta_lower_bound, gamma_closed_form, tradeoff_bound
from .counterexamples import build_example_operator, example_points, full_space_rip_certificate
from .eckart_young import EyInstance, solve_regularized_ey
from .exceptions import (
    DegenerateBeta,
    DimensionMismatch,
    RiplabError,
    SolverStall,
    ValidationError,
    ZeroErrorVector,
)
from .linalg import FactorPair
from .lmi import assemble_lmi, delta_exact, solve_delta_exact

try:
    __version__ = version("riplab")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "DegenerateBeta",
    "DimensionMismatch",
    "EyInstance",
    "FactorPair",
    "RiplabError",
    "SolverStall",
    "ValidationError",
    "ZeroErrorVector",
    "assemble_lmi",
    "build_example_operator",
    "compute_alpha_beta",
    "delta_exact",
    "delta_lower_bound",
    "example_points",
    "full_space_rip_certificate",
    "gamma_closed_form",
    "solve_delta_exact",
    "solve_regularized_ey",
    "tradeoff_bound",
]
