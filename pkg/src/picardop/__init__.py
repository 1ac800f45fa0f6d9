"""Picard-type operator learning for semilinear heat equations on the torus."""

from .data import InitialLaw, SensorSet, observe, reconstruct, sample_initial
from .errors import (
    AdmissibilityError,
    CertificationError,
    ConfigurationError,
    DomainError,
    HorizonExceededError,
    LawMisconfigurationError,
    NumericInputError,
    PicardOpError,
    SolverStallError,
    UnsupportedConfigurationError,
)
from .nonlinearity import CATALOG_NAMES, Nonlinearity, PiecewiseLinear, build_rho, catalog
from .picard import PicardModel, PicardParams, implementation_error, iterate, solve_fixed_point
from .risk import bound_rhs, embed_fno, erm, make_dataset, plan_budget, rademacher_mc
from .rollout import RolloutTrace, rollout, stability_envelope
from .semigroup import SemigroupKind, apply_semigroup, duhamel
from .spectral import GridSpec, TorusField, TrajectoryField

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "CATALOG_NAMES", "CertificationError", "ConfigurationError",
    "DomainError", "GridSpec", "HorizonExceededError", "InitialLaw",
    "LawMisconfigurationError", "Nonlinearity", "NumericInputError", "PicardModel",
    "PicardOpError", "PicardParams", "PiecewiseLinear", "RolloutTrace", "SemigroupKind",
    "SensorSet", "SolverStallError", "TorusField", "TrajectoryField",
    "UnsupportedConfigurationError", "apply_semigroup", "bound_rhs", "build_rho", "catalog",
    "duhamel", "embed_fno", "erm", "implementation_error", "iterate", "make_dataset",
    "observe", "plan_budget", "rademacher_mc", "reconstruct", "rollout", "sample_initial",
    "solve_fixed_point", "stability_envelope",
]
