"""Pseudo-spectral solver and diagnostics for viscous quantum MHD with
density-dependent transport coefficients on the periodic torus."""

__version__ = "0.1.0"

from .basis import BasisMode, GalerkinBasis, MassOperator, VelocityCoeffs
from .constitutive import PhysParams, ResistivityParams
from .errors import (
    DensityFloorViolation,
    MaximumPrincipleViolation,
    NonpositiveDensity,
    NonuniformSampling,
    ParseError,
    PicardDivergence,
    QMHDError,
    SingularMass,
    SpectralTailWarning,
    ValidationError,
)
from .fields import ScalarField, VectorField
from .grid import TorusGrid
from .solver import RegParams, State, Trajectory, advance_step, initial_state, run_simulation

__all__ = [
    "BasisMode",
    "DensityFloorViolation",
    "GalerkinBasis",
    "MassOperator",
    "MaximumPrincipleViolation",
    "NonpositiveDensity",
    "NonuniformSampling",
    "ParseError",
    "PhysParams",
    "PicardDivergence",
    "QMHDError",
    "RegParams",
    "ResistivityParams",
    "ScalarField",
    "SingularMass",
    "SpectralTailWarning",
    "State",
    "TorusGrid",
    "Trajectory",
    "ValidationError",
    "VectorField",
    "VelocityCoeffs",
    "advance_step",
    "initial_state",
    "run_simulation",
    "__version__",
]
