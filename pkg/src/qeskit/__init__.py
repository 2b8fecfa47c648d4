"""Quasi-exactly solvable Schroedinger potentials built from supersymmetric superpotential hierarchies.

Modules:
    expr      symbolic expressions in x with exact differentiation
    superpot  generator validation, W+ construction and the superpotential triple
    states    analytic eigenstates and intertwining maps on a grid
    catalog   ready-made generators with closed-form references
    chains    exactly solvable partner chains (oscillator, Morse, generic)
    solver    finite-difference eigenvalue oracle and model verification
    cli       the ``qeskit`` command
"""

from .catalog import build_model, instantiate
from .expr import differentiate, evaluate, parse
from .solver import Tolerances, verify_model
from .states import QesModel, build_qes_model
from .superpot import GeneratorSpec, SuperTriple, construct, validate_generator

__version__ = "0.1.0"

__all__ = [
    "GeneratorSpec",
    "QesModel",
    "SuperTriple",
    "Tolerances",
    "build_model",
    "build_qes_model",
    "construct",
    "differentiate",
    "evaluate",
    "instantiate",
    "parse",
    "validate_generator",
    "verify_model",
]
