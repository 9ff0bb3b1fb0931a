"""Paraconsistent logic programming over the four-valued lattice.

Parse annotated programs, ground them, enumerate consistency-preferred
stable models natively, or transpile them (with preferences) into a
reified answer-set program for an external solver.
"""

from .lattice import BOTTOM, FALSE, TOP, TRUE, TruthValue, eneg, leq, lub
from .parser import ParseError, parse, parse_file, parse_query, render
from .syntax import Program, desugar, validate
from .grounder import GroundProgram, GroundingError, ground
from .semantics import Interpretation, is_model, satisfies
from .solver import entails, preferred_stable_models, stable_models

__all__ = [
    "BOTTOM",
    "FALSE",
    "TOP",
    "TRUE",
    "TruthValue",
    "eneg",
    "leq",
    "lub",
    "ParseError",
    "parse",
    "parse_file",
    "parse_query",
    "render",
    "Program",
    "desugar",
    "validate",
    "GroundProgram",
    "GroundingError",
    "ground",
    "Interpretation",
    "is_model",
    "satisfies",
    "entails",
    "preferred_stable_models",
    "stable_models",
]

__version__ = "0.1.0"
