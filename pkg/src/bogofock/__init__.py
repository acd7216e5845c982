"""Bosonic Bogoliubov transformations on truncated Fock spaces."""

__version__ = "0.1.0"

from .modes import BogoliubovMap, ModeOperator, bogoliubov_residuals, pair_operator, shale_stinespring_probe
from .fock import FockVector, annihilate, create, vacuum
from .bogoliubov import build_vacuum, implement, implementation_check
from .quadratic import QuadraticSpec, diagonalize, generate_bogoliubov

__all__ = [
    "BogoliubovMap",
    "FockVector",
    "ModeOperator",
    "QuadraticSpec",
    "annihilate",
    "bogoliubov_residuals",
    "build_vacuum",
    "create",
    "diagonalize",
    "generate_bogoliubov",
    "implement",
    "implementation_check",
    "pair_operator",
    "shale_stinespring_probe",
    "vacuum",
]
