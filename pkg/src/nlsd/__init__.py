"""Solitons, stability and collapse in a nonlinear Schroedinger model with
intensity-dependent (nonlinear) diffraction."""

__version__ = "0.1.0"

from .errors import (BracketError, ConvergenceError, DegenerateSolutionError, DomainError,  # noqa: E402
                     InstabilityError, MetricError, NLSDError, NoSolutionError, NonFiniteError,
                     SeparationError)
from .model import (ComplexField, Grid, ModelParams, RealProfile, SalernoParams, hamiltonian,  # noqa: E402
                    momentum, rhs_evolution, salerno_cutoff, salerno_invariants, total_power)
from .stationary import (Branch, SolitonSolution, continue_branch, find_cutoff, fwhm,  # noqa: E402
                         nls_soliton, solve_newton, soliton_on_grid, verify_universal_constants)
from .variational import VAPrediction, va_curve, va_predict, va_width  # noqa: E402
from .stability import (assemble_linearization, classify_stability, compare_forms,  # noqa: E402
                        spectrum, vk_slope)
from .dynamics import (SimulationConfig, SimulationResult, SpongeSpec, classify_interaction,  # noqa: E402
                       classify_propagation, evolve, perturbed_soliton, soliton_pair)

__all__ = [
    "__version__",
    "BracketError", "ConvergenceError", "DegenerateSolutionError", "DomainError", "InstabilityError",
    "MetricError", "NLSDError", "NoSolutionError", "NonFiniteError", "SeparationError",
    "ComplexField", "Grid", "ModelParams", "RealProfile", "SalernoParams", "hamiltonian", "momentum",
    "rhs_evolution", "salerno_cutoff", "salerno_invariants", "total_power",
    "Branch", "SolitonSolution", "continue_branch", "find_cutoff", "fwhm", "nls_soliton", "solve_newton",
    "soliton_on_grid", "verify_universal_constants",
    "VAPrediction", "va_curve", "va_predict", "va_width",
    "assemble_linearization", "classify_stability", "compare_forms", "spectrum", "vk_slope",
    "SimulationConfig", "SimulationResult", "SpongeSpec", "classify_interaction", "classify_propagation",
    "evolve", "perturbed_soliton", "soliton_pair",
]
