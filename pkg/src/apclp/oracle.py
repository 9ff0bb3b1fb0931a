"""Brute-force reference semantics for tiny ground programs.

The oracle enumerates the whole assignment space (4^n for n atoms), so
it is a test instrument, not a solver: a hard cap of 12 atoms is
enforced with an explicit error, never silent truncation.
"""

from __future__ import annotations

import itertools

from .grounder import GroundProgram
from .lattice import ALL_VALUES, TruthValue, leq
from .semantics import Interpretation, rule_satisfied
from .solver import has_smaller_model, reduct_rules

ATOM_CAP = 12


class OracleCapError(Exception):
    pass


def _assignments(n: int):
    return itertools.product(ALL_VALUES, repeat=n)


def enumerate_models(gp: GroundProgram, mode: str = "all") -> list[Interpretation]:
    """All models of the program, or only the stable ones.

    Models are returned in the enumeration order of the assignment
    space, which is deterministic.
    """
    if mode not in ("all", "stable"):
        raise ValueError("mode must be 'all' or 'stable'")
    n = gp.atom_count
    if n > ATOM_CAP:
        raise OracleCapError(f"{n} atoms exceed the oracle cap of {ATOM_CAP}")
    rules = gp.rules
    models = []
    for values in _assignments(n):
        if all(rule_satisfied(values, rule) for rule in rules):
            if mode == "stable" and not _stable(gp, values):
                continue
            models.append(Interpretation(gp.atoms, values))
    return models


def _stable(gp: GroundProgram, values: tuple[TruthValue, ...]) -> bool:
    """Exhaustive Gelfond-Lifschitz test: the assignment must be a
    minimal model of its own reduct."""
    positive = reduct_rules(gp.rules, values)
    below = [[v for v in ALL_VALUES if leq(v, value)] for value in values]
    for candidate in itertools.product(*below):
        if candidate == values:
            continue
        if all(rule_satisfied(candidate, rule) for rule in positive):
            return False
    return True


def stable_via_subset_search(gp: GroundProgram, values: tuple[TruthValue, ...]) -> bool:
    """Same test through the solver's subset search; used to cross-check
    the two implementations against each other in tests."""
    return not has_smaller_model(reduct_rules(gp.rules, values), values)


def filter_most_e_consistent(models: list[Interpretation]) -> list[Interpretation]:
    """Models whose sets of contradictory atoms are inclusion-minimal
    within the given list."""
    tops = [m.top_atoms() for m in models]
    kept = []
    for i, model in enumerate(models):
        if not any(tops[j] < tops[i] for j in range(len(models)) if j != i):
            kept.append(model)
    return kept
