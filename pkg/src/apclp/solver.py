"""Native stable-model computation.

Every atom contributes two search bits, "at least t" and "at least f"
(top sets both, bottom neither); the pointwise lattice order on
interpretations is then bitwise subset, so reduct minimality is a search
for a satisfying proper subset of the candidate's true bits.

Enumeration is a DPLL search over the bits constrained by

* classical satisfaction clauses for every ground rule, and
* *necessity* clauses: in a minimal model of the reduct, flipping any
  single true bit off must break some rule, i.e. some rule must have a
  satisfied body (including its ontological negations, which decide
  reduct membership) whose only satisfied head disjuncts go through that
  bit.  This is a sound consequence of stability and prunes the vast
  space of models with gratuitously inconsistent atoms.

Each complete assignment is then verified exactly: build the reduct and
search for a strictly smaller model of it.  Atoms that occur only as the
single head of rules (display predicates like a puzzle's solution tuple)
are peeled off beforehand and evaluated deterministically per model.
"""

from __future__ import annotations

import sys
import time
from collections import namedtuple
from dataclasses import dataclass, field

from .grounder import GroundLiteral, GroundProgram, GroundRule
from .lattice import TruthValue, leq, lub
from .semantics import (
    Interpretation,
    QueryFormula,
    model_lines,
    satisfies,
    undominated,
)

Entailment = namedtuple("Entailment", ["holds", "vacuous"])


@dataclass
class SolveStats:
    ground_rules: int = 0
    candidates_explored: int = 0
    elapsed_ms: float = 0.0


@dataclass
class SolveResult:
    models: list[Interpretation]
    stats: SolveStats = field(default_factory=SolveStats)
    truncated: bool = False


# ---------------------------------------------------------------------------
# Reduct and minimality (the declarative definitions, shared with the oracle)


def reduct(gp: GroundProgram, interp: Interpretation) -> GroundProgram:
    """Remove rules whose ontologically negated atoms the interpretation
    satisfies; strip the remaining negations.  Preferences pass through."""
    return GroundProgram(gp.atoms, reduct_rules(gp.rules, interp.values), gp.preference)


def reduct_rules(
    rules: tuple[GroundRule, ...], values: tuple[TruthValue, ...]
) -> tuple[GroundRule, ...]:
    out = []
    for rule in rules:
        keep = True
        positive = []
        for lit in rule.body:
            if lit.negated:
                if leq(lit.ann, values[lit.atom]):
                    keep = False
                    break
            else:
                positive.append(lit)
        if keep:
            out.append(GroundRule(rule.head, tuple(positive)))
    return tuple(out)


def _bits_of(atom: int, ann: TruthValue) -> tuple[int, ...]:
    if ann is TruthValue.TRUE:
        return (2 * atom,)
    if ann is TruthValue.FALSE:
        return (2 * atom + 1,)
    if ann is TruthValue.TOP:
        return (2 * atom, 2 * atom + 1)
    return ()


def _values_from_bits(n_atoms: int, bits: set[int]) -> tuple[TruthValue, ...]:
    values = []
    for atom in range(n_atoms):
        mask = (1 if 2 * atom in bits else 0) | (2 if 2 * atom + 1 in bits else 0)
        values.append(TruthValue(mask))
    return tuple(values)


def has_smaller_model(
    rules: tuple[GroundRule, ...], values: tuple[TruthValue, ...]
) -> bool:
    """Does a negation-free rule set have a model strictly below
    ``values`` (bitwise subset of its true bits)?"""
    true_bits = []
    for atom, value in enumerate(values):
        true_bits.extend(_bits_of(atom, value))
    if not true_bits:
        return False
    var_of = {bit: i + 1 for i, bit in enumerate(true_bits)}

    sat = _Dpll(len(true_bits))
    for rule in rules:
        if not rule.head:
            continue  # constraints hold automatically below a model of them
        body_vars = []
        dead = False
        for lit in rule.body:
            if lit.negated:
                raise ValueError("minimality check requires a negation-free program")
            for bit in _bits_of(lit.atom, lit.ann):
                var = var_of.get(bit)
                if var is None:
                    dead = True  # body already false, rule holds below values
                    break
                body_vars.append(var)
            if dead:
                break
        if dead:
            continue
        # Disjuncts unsatisfied at ``values`` stay unsatisfied below it.
        live_disjuncts = []
        tautology = False
        for atom, ann in rule.head:
            bits = _bits_of(atom, ann)
            if not bits:
                tautology = True
                break
            disjunct_vars = [var_of.get(bit) for bit in bits]
            if all(v is not None for v in disjunct_vars):
                live_disjuncts.append(disjunct_vars)
        if tautology:
            continue
        base = [-v for v in set(body_vars)]
        # Distribute conjunctions inside disjuncts (tops are two bits).
        clauses = [base]
        for disjunct_vars in live_disjuncts:
            if len(disjunct_vars) == 1:
                for clause in clauses:
                    clause.append(disjunct_vars[0])
            else:
                clauses = [
                    clause + [choice] for clause in clauses for choice in disjunct_vars
                ]
        for clause in clauses:
            sat.add_clause(clause)
    sat.add_clause([-var for var in var_of.values()])
    return sat.satisfiable()


def is_minimal_model(interp: Interpretation, gp: GroundProgram) -> bool:
    """Minimality of a model of a negation-free ground program, with
    respect to the pointwise lattice order."""
    from .semantics import is_model

    if not is_model(interp, gp):
        raise ValueError("is_minimal_model requires a model of the program")
    return not has_smaller_model(gp.rules, interp.values)


def is_stable_values(gp: GroundProgram, values: tuple[TruthValue, ...]) -> bool:
    """Exact stability test for a complete assignment known to satisfy
    the program's rules and constraints."""
    return not has_smaller_model(reduct_rules(gp.rules, values), values)


# ---------------------------------------------------------------------------
# A small watched-literal DPLL used both for enumeration and for the
# minimality sub-search.


class _StopSearch(Exception):
    pass


class _Dpll:
    def __init__(self, nvars: int):
        self.nvars = nvars
        self.assign = bytearray(nvars + 1)  # 0 free, 1 true, 2 false
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.units: list[int] = []
        self.unsat = False
        self.trail: list[int] = []

    def new_var(self) -> int:
        self.nvars += 1
        self.assign.append(0)
        return self.nvars

    def add_clause(self, lits: list[int]) -> None:
        seen = set()
        clause = []
        for lit in lits:
            if -lit in seen:
                return  # tautology
            if lit not in seen:
                seen.add(lit)
                clause.append(lit)
        if not clause:
            self.unsat = True
            return
        if len(clause) == 1:
            self.units.append(clause[0])
            return
        index = len(self.clauses)
        self.clauses.append(clause)
        self.watches.setdefault(-clause[0], []).append(index)
        self.watches.setdefault(-clause[1], []).append(index)

    def _lit_value(self, lit: int) -> int:
        value = self.assign[abs(lit)]
        if value == 0:
            return 0
        return 1 if (value == 1) == (lit > 0) else 2

    def _enqueue(self, lit: int) -> bool:
        current = self._lit_value(lit)
        if current == 1:
            return True
        if current == 2:
            return False
        self.assign[abs(lit)] = 1 if lit > 0 else 2
        self.trail.append(lit)
        self.queue.append(lit)
        return True

    def propagate(self, assumptions: list[int]) -> bool:
        self.queue: list[int] = []
        for lit in assumptions:
            if not self._enqueue(lit):
                return False
        head = 0
        while head < len(self.queue):
            lit = self.queue[head]
            head += 1
            watching = self.watches.get(lit)
            if not watching:
                continue
            kept = []
            for position, index in enumerate(watching):
                clause = self.clauses[index]
                # -lit is the falsified watch; keep it in slot 1.
                if clause[0] == -lit:
                    clause[0], clause[1] = clause[1], clause[0]
                other = clause[0]
                if self._lit_value(other) == 1:
                    kept.append(index)
                    continue
                moved = False
                for slot in range(2, len(clause)):
                    candidate = clause[slot]
                    if self._lit_value(candidate) != 2:
                        clause[1], clause[slot] = clause[slot], clause[1]
                        self.watches.setdefault(-candidate, []).append(index)
                        moved = True
                        break
                if moved:
                    continue
                kept.append(index)
                if not self._enqueue(other):
                    kept.extend(watching[position + 1 :])
                    self.watches[lit] = kept
                    return False
            self.watches[lit] = kept
        return True

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            lit = self.trail.pop()
            self.assign[abs(lit)] = 0

    def enumerate(self, decision_vars: list[int], on_model, prune=None) -> None:
        """Depth-first enumeration of all satisfying assignments projected
        onto the decision variables (auxiliaries follow by propagation).

        ``prune``, when given, is consulted after each successful
        propagation; returning True abandons the whole subtree.
        """
        if self.unsat:
            return
        if not self.propagate(self.units):
            return
        if prune is not None and prune():
            return

        order = decision_vars

        def search(start: int) -> None:
            position = start
            while position < len(order) and self.assign[order[position]] != 0:
                position += 1
            if position == len(order):
                on_model()
                return
            var = order[position]
            for lit in (-var, var):
                mark = len(self.trail)
                if self.propagate([lit]) and not (prune is not None and prune()):
                    search(position + 1)
                self.undo_to(mark)

        previous_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(previous_limit, len(order) * 4 + 10000))
        try:
            search(0)
        finally:
            sys.setrecursionlimit(previous_limit)

    def satisfiable(self) -> bool:
        found = []

        def stop():
            found.append(True)
            raise _StopSearch

        try:
            self.enumerate(list(range(1, self.nvars + 1)), stop)
        except _StopSearch:
            pass
        return bool(found)


# ---------------------------------------------------------------------------
# Tail peeling: atoms occurring only as single-disjunct rule heads are
# evaluated after the core search instead of inside it.


def _peel_tail(gp: GroundProgram):
    """Split rule indices into core rules and layered tail definitions.

    Returns (core_rule_indices, layers) where each layer maps an atom to
    the rules defining it; layers are evaluated in reverse peel order.
    """
    remaining = set(range(len(gp.rules)))
    layers: list[dict[int, list[GroundRule]]] = []
    while True:
        in_body: set[int] = set()
        head_rules: dict[int, list[int]] = {}
        blocked: set[int] = set()
        for index in remaining:
            rule = gp.rules[index]
            for lit in rule.body:
                in_body.add(lit.atom)
            if len(rule.head) == 1:
                head_rules.setdefault(rule.head[0][0], []).append(index)
            else:
                for atom, _ in rule.head:
                    blocked.add(atom)
        layer = {
            atom: indices
            for atom, indices in head_rules.items()
            if atom not in in_body and atom not in blocked
        }
        if not layer:
            break
        layers.append(
            {atom: [gp.rules[i] for i in indices] for atom, indices in sorted(layer.items())}
        )
        for indices in layer.values():
            remaining.difference_update(indices)
    return sorted(remaining), layers


def _evaluate_tail(
    gp: GroundProgram,
    layers: list[dict[int, list[GroundRule]]],
    values: list[TruthValue],
) -> None:
    for layer in reversed(layers):
        for atom, rules in layer.items():
            value = TruthValue.BOTTOM
            for rule in rules:
                fired = True
                for lit in rule.body:
                    holds = leq(lit.ann, values[lit.atom])
                    if holds if lit.negated else not holds:
                        fired = False
                        break
                if fired:
                    value = lub(value, rule.head[0][1])
            values[atom] = value


# ---------------------------------------------------------------------------
# CNF compilation of the core


class _UnsatProgram(Exception):
    pass


class _Compiler:
    TRUE_CONST = 0  # pseudo-literal for constant truth

    def __init__(self, gp: GroundProgram, core_rule_indices: list[int]):
        self.gp = gp
        self.core_rules = [gp.rules[i] for i in core_rule_indices]
        core_atoms = sorted(
            {lit.atom for r in self.core_rules for lit in r.body}
            | {atom for r in self.core_rules for atom, _ in r.head}
        )
        self.sat = _Dpll(0)
        self.bit_var: dict[int, int] = {}
        for atom in core_atoms:
            self.bit_var[2 * atom] = self.sat.new_var()
            self.bit_var[2 * atom + 1] = self.sat.new_var()
        # Branch on choice-like atoms first: heads of even negation
        # loops (cardinality choices) and two-way t/f disjunctions drive
        # the combinatorial part; everything else mostly propagates.
        neg_dep: dict[int, set[int]] = {}
        for rule in self.core_rules:
            if len(rule.head) == 1 and rule.head[0][1] is TruthValue.TRUE:
                atom = rule.head[0][0]
                for lit in rule.body:
                    if lit.negated and lit.ann is TruthValue.TRUE:
                        neg_dep.setdefault(atom, set()).add(lit.atom)
        choice_atoms = []
        seen_choice = set()
        for rule in self.core_rules:
            if len(rule.head) == 1 and rule.head[0][1] is TruthValue.TRUE:
                atom = rule.head[0][0]
                if atom not in seen_choice and any(
                    atom in neg_dep.get(other, ()) for other in neg_dep.get(atom, ())
                ):
                    seen_choice.add(atom)
                    choice_atoms.append(atom)
            elif len(rule.head) == 2:
                (a1, ann1), (a2, ann2) = rule.head
                if a1 == a2 and {ann1, ann2} == {TruthValue.TRUE, TruthValue.FALSE}:
                    if a1 not in seen_choice:
                        seen_choice.add(a1)
                        choice_atoms.append(a1)
        ordered = choice_atoms + [a for a in core_atoms if a not in seen_choice]
        self.decision_vars = []
        for atom in ordered:
            self.decision_vars.append(self.bit_var[2 * atom])
            self.decision_vars.append(self.bit_var[2 * atom + 1])
        self.top_vars: dict[int, int] = {}
        self.nec_terms: dict[int, list] = {bit: [] for bit in self.bit_var}
        self.term_cache: dict[tuple, int] = {}

    def satvar(self, atom: int, ann: TruthValue) -> int:
        """Single variable equivalent to 'atom satisfies ann'; constant
        TRUE_CONST for bottom annotations."""
        if ann is TruthValue.BOTTOM:
            return self.TRUE_CONST
        if ann is TruthValue.TRUE:
            return self.bit_var[2 * atom]
        if ann is TruthValue.FALSE:
            return self.bit_var[2 * atom + 1]
        top = self.top_vars.get(atom)
        if top is None:
            top = self.sat.new_var()
            self.top_vars[atom] = top
            t_var = self.bit_var[2 * atom]
            f_var = self.bit_var[2 * atom + 1]
            self.sat.add_clause([-top, t_var])
            self.sat.add_clause([-top, f_var])
            self.sat.add_clause([top, -t_var, -f_var])
        return top

    def _conj_var(self, lits: tuple[int, ...]) -> int:
        """Tseitin variable equivalent to the conjunction of literals."""
        if not lits:
            return self.TRUE_CONST
        if len(lits) == 1:
            return lits[0]
        cached = self.term_cache.get(lits)
        if cached is not None:
            return cached
        var = self.sat.new_var()
        for lit in lits:
            self.sat.add_clause([-var, lit])
        self.sat.add_clause([var] + [-lit for lit in lits])
        self.term_cache[lits] = var
        return var

    def _body_lits(self, rule: GroundRule) -> tuple[int, ...] | None:
        """Signed literals whose conjunction is body satisfaction
        (negations included); None when the body is unsatisfiable."""
        lits = []
        for lit in rule.body:
            var = self.satvar(lit.atom, lit.ann)
            if var == self.TRUE_CONST:
                if lit.negated:
                    return None  # 'not p : bottom' can never hold
                continue
            lits.append(-var if lit.negated else var)
        unique = tuple(dict.fromkeys(lits))
        if any(-lit in unique for lit in unique):
            return None
        return unique

    def compile(self) -> None:
        for rule in self.core_rules:
            body = self._body_lits(rule)
            if body is None:
                continue  # rule can never fire
            disjunct_vars = []
            tautology = False
            for atom, ann in rule.head:
                if ann is TruthValue.BOTTOM:
                    tautology = True
                    break
                disjunct_vars.append(self.satvar(atom, ann))
            if tautology:
                continue
            body_var = self._conj_var(body)
            clause = [] if body_var == self.TRUE_CONST else [-body_var]
            clause.extend(disjunct_vars)
            if not clause:
                raise _UnsatProgram
            self.sat.add_clause(clause)
            self._register_necessity(rule, body)

    def _register_necessity(self, rule: GroundRule, body: tuple[int, ...]) -> None:
        positive_bits = set()
        for lit in rule.body:
            if not lit.negated:
                positive_bits.update(_bits_of(lit.atom, lit.ann))
        head_bits = [(atom, ann, _bits_of(atom, ann)) for atom, ann in rule.head]
        for atom, ann, bits in head_bits:
            for bit in bits:
                if bit in positive_bits:
                    continue
                others = [
                    self.satvar(other_atom, other_ann)
                    for other_atom, other_ann, other_bits in head_bits
                    if bit not in other_bits
                ]
                term = tuple(dict.fromkeys(list(body) + [-v for v in others]))
                if any(-lit in term for lit in term):
                    continue
                terms = self.nec_terms.get(bit)
                if terms is not None and terms != [True]:
                    if not term:
                        self.nec_terms[bit] = [True]  # unconditionally supported
                    else:
                        terms.append(term)

    def add_necessity_clauses(self) -> None:
        for bit, terms in self.nec_terms.items():
            if terms == [True]:
                continue
            clause = [-self.bit_var[bit]]
            for term in terms:
                clause.append(self._conj_var(term))
            self.sat.add_clause(clause)


# ---------------------------------------------------------------------------
# Public solving API


def _enumerate_stable(
    gp: GroundProgram,
    limit: int | None,
    max_candidates: int | None,
    dominance_pruning: bool,
) -> SolveResult:
    started = time.monotonic()
    stats = SolveStats(ground_rules=len(gp.rules))
    core_indices, layers = _peel_tail(gp)

    try:
        compiler = _Compiler(gp, core_indices)
        compiler.compile()
        compiler.add_necessity_clauses()
    except _UnsatProgram:
        stats.elapsed_ms = (time.monotonic() - started) * 1000
        return SolveResult([], stats)

    core_rules = tuple(gp.rules[i] for i in core_indices)
    core_gp = GroundProgram(gp.atoms, core_rules, gp.preference)
    found: list[Interpretation] = []
    found_tops: list[frozenset[int]] = []
    truncated = False

    sat = compiler.sat
    assign = sat.assign
    top_pairs = [
        (atom, compiler.bit_var[2 * atom], compiler.bit_var[2 * atom + 1])
        for atom in sorted(
            {bit // 2 for bit in compiler.bit_var}
        )
    ]

    def forced_tops() -> frozenset[int]:
        return frozenset(
            atom for atom, t_var, f_var in top_pairs if assign[t_var] == 1 and assign[f_var] == 1
        )

    def prune() -> bool:
        if not found_tops:
            return False
        forced = forced_tops()
        return any(top < forced for top in found_tops)

    def on_model() -> None:
        nonlocal truncated
        stats.candidates_explored += 1
        if max_candidates is not None and stats.candidates_explored > max_candidates:
            truncated = True
            raise _StopSearch
        bits = {
            bit for bit, var in compiler.bit_var.items() if assign[var] == 1
        }
        values = list(_values_from_bits(gp.atom_count, bits))
        if not is_stable_values(core_gp, tuple(values)):
            return
        _evaluate_tail(gp, layers, values)
        model = Interpretation(gp.atoms, values)
        found.append(model)
        if dominance_pruning:
            found_tops.append(model.top_atoms())
        if limit is not None and len(found) >= limit:
            truncated = True
            raise _StopSearch

    try:
        sat.enumerate(
            compiler.decision_vars, on_model, prune=prune if dominance_pruning else None
        )
    except _StopSearch:
        pass

    found.sort(key=lambda m: "\n".join(model_lines(m, show_bottom=True)))
    stats.elapsed_ms = (time.monotonic() - started) * 1000
    return SolveResult(found, stats, truncated)


def stable_models(
    gp: GroundProgram,
    limit: int | None = None,
    max_candidates: int | None = None,
) -> SolveResult:
    """Enumerate the stable models: interpretations that are minimal
    models of their own reduct and satisfy every constraint."""
    return _enumerate_stable(gp, limit, max_candidates, dominance_pruning=False)


def _filter_undominated(
    models: list[Interpretation],
    levels: tuple[tuple[str, frozenset[int]], ...],
) -> list[Interpretation]:
    """Same result as :func:`apclp.semantics.undominated`, but compares
    the distinct top-set signatures instead of every model pair."""
    signatures: dict[tuple[frozenset[int], ...], list[Interpretation]] = {}
    for model in models:
        top = model.top_atoms()
        signature = tuple(top & members for _, members in levels)
        signatures.setdefault(signature, []).append(model)

    def dominates(a, b) -> bool:
        for sa, sb in zip(a, b):
            if sa == sb:
                continue
            return sa < sb
        return False

    kept: list[Interpretation] = []
    for signature, group in signatures.items():
        if not any(
            dominates(other, signature) for other in signatures if other != signature
        ):
            kept.extend(group)
    return kept


def preferred_stable_models(
    gp: GroundProgram,
    max_candidates: int | None = None,
) -> SolveResult:
    """The consistency-preferred subset: stable models not strictly
    dominated under the program's lexicographic subset preference.

    Branches whose forced contradictions already strictly contain a found
    stable model's contradictions are skipped: every completion would be
    dominated outright.
    """
    result = _enumerate_stable(gp, None, max_candidates, dominance_pruning=True)
    kept = _filter_undominated(result.models, gp.preference)
    kept.sort(key=lambda m: "\n".join(model_lines(m, show_bottom=True)))
    return SolveResult(kept, result.stats, result.truncated)


def entails(gp: GroundProgram, formula: QueryFormula, mode: str = "preferred") -> Entailment:
    """Does every (preferred) stable model satisfy the formula?

    Vacuous entailment (no models at all) reports holds=True with the
    vacuous flag set.
    """
    if mode not in ("preferred", "all"):
        raise ValueError("mode must be 'preferred' or 'all'")
    result = preferred_stable_models(gp) if mode == "preferred" else stable_models(gp)
    if not result.models:
        return Entailment(True, True)
    return Entailment(all(satisfies(m, formula) for m in result.models), False)
