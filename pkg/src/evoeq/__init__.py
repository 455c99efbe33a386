"""Evolutionary equations on finite-dimensional Hilbert spaces.

Schur-complement block algebra, holomorphic material laws, the
Fourier-Laplace functional calculus with a Picard solver, and
weak-operator convergence diagnostics for sequences of material laws.
"""

from .convergence import (
    ProbeSet,
    limit_coercivity_audit,
    nlh_gap,
    parameterised_nlh_gap,
    solution_convergence_experiment,
    wot_gap,
)
from .linop import (
    AlphaBounds,
    Decomposition,
    SchurQuadruple,
    alpha_fit,
    block_split,
    hermitian_lower_bound,
    invert_accretive,
    perturbed_block_inverse,
    schur_components,
    schur_positivity_inherit,
    schur_reconstruct,
)
from .matlaw import HalfPlaneGrid, MaterialLaw, picard_coercivity
from .spectral import (
    PicardSolver,
    TimeGrid,
    WeightedSignal,
    evo_solve,
    fourier_laplace,
    inverse_fourier_laplace,
    matlaw_apply,
    td_apply,
    td_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaBounds", "Decomposition", "HalfPlaneGrid", "MaterialLaw", "PicardSolver", "ProbeSet",
    "SchurQuadruple", "TimeGrid", "WeightedSignal", "alpha_fit", "block_split", "evo_solve",
    "fourier_laplace", "hermitian_lower_bound", "inverse_fourier_laplace", "invert_accretive",
    "limit_coercivity_audit", "matlaw_apply", "nlh_gap", "parameterised_nlh_gap",
    "perturbed_block_inverse", "picard_coercivity", "schur_components",
    "schur_positivity_inherit", "schur_reconstruct", "solution_convergence_experiment",
    "td_apply", "td_inverse", "wot_gap",
]
