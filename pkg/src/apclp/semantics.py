"""Interpretations, satisfaction, and model comparison.

An interpretation is a total map from the registered ground predicate
terms to truth values, defaulting to ``bottom`` for anything it does not
mention.  The equivalent closed-set view (all ``p : s`` with ``s`` at or
below the assigned value, closed under least upper bounds) is available
for tests through :func:`closed_set` / :func:`from_closed_set`.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Iterable, Mapping

from .grounder import OMIT_PREFIX, GroundProgram, GroundRule
from .lattice import ALL_VALUES, TruthValue, leq, lub
from .syntax import AnnotatedAtom, PredicateTerm

#: Disjunction of conjunctions of ground annotated atoms.
QueryFormula = tuple[tuple[AnnotatedAtom, ...], ...]


class UnknownAtomError(KeyError):
    pass


class Interpretation:
    """Immutable assignment of truth values to a fixed atom universe."""

    __slots__ = ("atoms", "values", "_index", "_hash")

    def __init__(self, atoms: tuple[PredicateTerm, ...], values: Iterable[TruthValue]):
        self.atoms = atoms
        self.values = tuple(values)
        if len(self.values) != len(atoms):
            raise ValueError("one value per atom required")
        self._index = {term: i for i, term in enumerate(atoms)}
        self._hash = hash((self.atoms, self.values))

    @classmethod
    def from_map(
        cls,
        atoms: tuple[PredicateTerm, ...],
        mapping: Mapping[PredicateTerm, TruthValue] | None = None,
    ) -> "Interpretation":
        mapping = mapping or {}
        index = {term: i for i, term in enumerate(atoms)}
        values = [TruthValue.BOTTOM] * len(atoms)
        for term, value in mapping.items():
            if term not in index:
                raise UnknownAtomError(str(term))
            values[index[term]] = value
        return cls(atoms, values)

    def value_of(self, term: PredicateTerm) -> TruthValue:
        position = self._index.get(term)
        if position is None:
            raise UnknownAtomError(str(term))
        return self.values[position]

    def value_at(self, atom: int) -> TruthValue:
        return self.values[atom]

    def top_atoms(self) -> frozenset[int]:
        return frozenset(
            i for i, value in enumerate(self.values) if value is TruthValue.TOP
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Interpretation)
            and self.atoms == other.atoms
            and self.values == other.values
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        shown = {
            str(term): str(value)
            for term, value in zip(self.atoms, self.values)
            if value is not TruthValue.BOTTOM
        }
        return f"Interpretation({shown})"


# ---------------------------------------------------------------------------
# Satisfaction


def satisfies_atom(interp: Interpretation, atom: AnnotatedAtom) -> bool:
    return leq(atom.ann, interp.value_of(atom.pred))


def satisfies(interp: Interpretation, formula: QueryFormula) -> bool:
    """Disjunction over branches, conjunction within a branch."""
    return any(
        all(satisfies_atom(interp, atom) for atom in branch) for branch in formula
    )


def rule_satisfied(values: tuple[TruthValue, ...], rule: GroundRule) -> bool:
    for lit in rule.body:
        holds = leq(lit.ann, values[lit.atom])
        satisfied = not holds if lit.negated else holds
        if not satisfied:
            return True  # body falsified, rule vacuously true
    return any(leq(ann, values[atom]) for atom, ann in rule.head)


def is_model(interp: Interpretation, gp: GroundProgram) -> bool:
    values = interp.values
    return all(rule_satisfied(values, rule) for rule in gp.rules)


# ---------------------------------------------------------------------------
# Comparisons


def more_or_equally_e_consistent(i1: Interpretation, i2: Interpretation) -> bool:
    """True when every contradiction of ``i1`` is also one of ``i2``."""
    return i1.top_atoms() <= i2.top_atoms()


class Comparison(enum.Enum):
    LESS = "less"
    EQUAL = "equal"
    GREATER = "greater"
    INCOMPARABLE = "incomparable"


def compare_preference(
    i1: Interpretation,
    i2: Interpretation,
    levels: tuple[tuple[str, frozenset[int]], ...],
) -> Comparison:
    """Lexicographic subset comparison of top-atom intersections.

    ``LESS`` means ``i1`` is strictly preferred over ``i2``.
    """
    top1 = i1.top_atoms()
    top2 = i2.top_atoms()
    for _, members in levels:
        a = top1 & members
        b = top2 & members
        if a == b:
            continue
        if a < b:
            return Comparison.LESS
        if b < a:
            return Comparison.GREATER
        return Comparison.INCOMPARABLE
    return Comparison.EQUAL


def undominated(
    models: list[Interpretation],
    levels: tuple[tuple[str, frozenset[int]], ...],
) -> list[Interpretation]:
    kept = []
    for model in models:
        if not any(
            compare_preference(other, model, levels) is Comparison.LESS
            for other in models
            if other is not model
        ):
            kept.append(model)
    return kept


# ---------------------------------------------------------------------------
# Closed-set view (used by the property tests)


def closed_set(interp: Interpretation) -> frozenset[tuple[PredicateTerm, TruthValue]]:
    """All annotated atoms the interpretation makes true; every atom
    carries its bottom annotation, matching the total-map reading."""
    out = set()
    for term, value in zip(interp.atoms, interp.values):
        for ann in ALL_VALUES:
            if leq(ann, value):
                out.add((term, ann))
    return frozenset(out)


def from_closed_set(
    atoms: tuple[PredicateTerm, ...],
    members: frozenset[tuple[PredicateTerm, TruthValue]],
) -> Interpretation:
    values = {term: TruthValue.BOTTOM for term in atoms}
    for term, ann in members:
        values[term] = lub(values[term], ann)
    return Interpretation(atoms, tuple(values[t] for t in atoms))


# ---------------------------------------------------------------------------
# Display


def model_lines(
    interp: Interpretation,
    show_bottom: bool = False,
    project: set[str] | None = None,
) -> list[str]:
    lines = []
    for term, value in sorted(
        zip(interp.atoms, interp.values), key=lambda pair: str(pair[0])
    ):
        if value is TruthValue.BOTTOM and not show_bottom:
            continue
        if project is not None and term.symbol not in project:
            continue
        lines.append(f"{term} : {value}")
    return lines


def model_dict(
    interp: Interpretation,
    show_bottom: bool = False,
    project: set[str] | None = None,
) -> dict[str, str]:
    out: dict[str, str] = {}
    for term, value in sorted(
        zip(interp.atoms, interp.values), key=lambda pair: str(pair[0])
    ):
        if value is TruthValue.BOTTOM and not show_bottom:
            continue
        if project is not None and term.symbol not in project:
            continue
        out[str(term)] = str(value)
    return out


def models_json(models: list[Interpretation], show_bottom: bool = False) -> str:
    return json.dumps(
        [{"atoms": model_dict(m, show_bottom=show_bottom)} for m in models], indent=2
    )
