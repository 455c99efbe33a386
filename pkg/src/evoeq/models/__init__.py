"""Concrete systems: staggered diffusion, nonlocal cell migration, piezo surrogate."""

from .cellmig import (
    SrOperator,
    approx_unity_defect,
    cellmig_experiment,
    nonlocal_coefficient,
    sr_apply,
    standing_assumption,
)
from .diffusion import (
    DiffusionAssembly,
    assemble_diffusion,
    harmonic_mean,
    homogenization_experiment,
    oscillating_coefficient,
    smooth_probes,
    smooth_vectors,
)
from .grid import CoefficientField, DomainGrid
from .piezo import (
    PiezoBlocks,
    PiezoConstants,
    assemble_piezo,
    perturbation_sequence,
    piezo_certificates,
    piezo_convergence,
    shipped_set,
)

__all__ = [
    "CoefficientField", "DiffusionAssembly", "DomainGrid", "PiezoBlocks", "PiezoConstants",
    "SrOperator", "approx_unity_defect", "assemble_diffusion", "assemble_piezo",
    "cellmig_experiment", "harmonic_mean", "homogenization_experiment", "nonlocal_coefficient",
    "oscillating_coefficient", "perturbation_sequence", "piezo_certificates",
    "piezo_convergence", "shipped_set", "smooth_probes", "smooth_vectors", "sr_apply",
    "standing_assumption",
]
