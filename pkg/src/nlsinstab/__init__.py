"""Orbital instability of NLS standing waves: profiles, spectra, flows and escape experiments."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ConvergenceError,
    DegenerateEigenfunctionError,
    DomainError,
    NLSError,
    NoSolutionError,
    PreconditionError,
    ShapeError,
    StabilityError,
    SubcriticalityError,
    TruncationError,
)
from .field import Field, Grid, NonlinearitySpec, discrete_norms, eval_Df, eval_f, eval_remainder_h  # noqa: E402
from .instability import (  # noqa: E402
    InstabilityRunResult,
    WeightedNormSpec,
    orbital_distance,
    project_perp_chi,
    run_instability,
    sweep_delta,
    verify_growth_bound,
    weighted_norm,
)
from .propagate import EvolutionTrace, evolve_linear, evolve_nls, step_nls  # noqa: E402
from .spectrum import LinearizedOperator, SpectrumReport, assemble, compute_spectrum, verify_spectral_mapping  # noqa: E402
from .stationary import StandingWave, embed, solve_radial, solve_vortex, stationary_residual  # noqa: E402

__all__ = [
    "BlowUpError",
    "ConvergenceError",
    "DegenerateEigenfunctionError",
    "DomainError",
    "EvolutionTrace",
    "Field",
    "Grid",
    "InstabilityRunResult",
    "LinearizedOperator",
    "NLSError",
    "NoSolutionError",
    "NonlinearitySpec",
    "PreconditionError",
    "ShapeError",
    "SpectrumReport",
    "StabilityError",
    "StandingWave",
    "SubcriticalityError",
    "TruncationError",
    "WeightedNormSpec",
    "assemble",
    "compute_spectrum",
    "discrete_norms",
    "embed",
    "eval_Df",
    "eval_f",
    "eval_remainder_h",
    "evolve_linear",
    "evolve_nls",
    "orbital_distance",
    "project_perp_chi",
    "run_instability",
    "solve_radial",
    "solve_vortex",
    "stationary_residual",
    "step_nls",
    "sweep_delta",
    "verify_growth_bound",
    "verify_spectral_mapping",
    "weighted_norm",
]
