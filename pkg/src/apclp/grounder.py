"""Instantiate a validated program over its Herbrand universe.

Rules are instantiated by joining their positive body literals against a
monotone overapproximation of the derivable predicate terms (a rule
instance whose positive body mentions an underivable term is vacuously
satisfied and dropped).  Builtins are evaluated and removed.  Cardinality
statements expand into choice rules, at-most / at-least constraints, and
optional closure rules.  Preference patterns expand over their declared
domains, and the implicit final level over all registered atoms is
appended.

Grounding is deterministic: identical input yields an identical ground
program, including atom numbering and rule order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .lattice import TruthValue
from .syntax import (
    AbsDiff,
    AnnotatedAtom,
    Arith,
    ArithExpr,
    Builtin,
    CardinalityRule,
    Compound,
    IMPLICIT_LEVEL_NAME,
    Literal,
    PredicateTerm,
    Program,
    Rule,
    Term,
    Var,
    int_value,
    is_desugared,
    subst_term,
    validate,
)

DEFAULT_RULE_CAP = 1_000_000

#: Prefix for the per-candidate choice witnesses a cardinality statement
#: introduces; these atoms are plumbing and hidden from model display.
OMIT_PREFIX = "omit__"


class GroundingError(Exception):
    pass


@dataclass(frozen=True)
class GroundLiteral:
    atom: int
    ann: TruthValue
    negated: bool = False


@dataclass(frozen=True)
class GroundRule:
    head: tuple[tuple[int, TruthValue], ...]
    body: tuple[GroundLiteral, ...] = ()


@dataclass(frozen=True)
class GroundProgram:
    atoms: tuple[PredicateTerm, ...]
    rules: tuple[GroundRule, ...]
    #: Preference levels, most significant first; the last is always the
    #: implicit level over every registered atom.
    preference: tuple[tuple[str, frozenset[int]], ...]

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    def atom_name(self, atom: int) -> str:
        return str(self.atoms[atom])


# ---------------------------------------------------------------------------
# Builtin evaluation


def _eval_arith(expr: ArithExpr, binding: dict[str, Term]):
    """Evaluate to an int or a ground symbolic term."""
    if isinstance(expr, Var):
        value = binding.get(expr.name)
        if value is None:
            raise GroundingError(f"builtin variable {expr.name} is unbound")
        return _eval_arith(value, binding)
    if isinstance(expr, Compound):
        number = int_value(expr)
        return expr if number is None else number
    if isinstance(expr, AbsDiff):
        inner = _eval_arith(expr.expr, binding)
        if not isinstance(inner, int):
            raise GroundingError(f"arithmetic on non-integer constant {inner}")
        return abs(inner)
    lhs = _eval_arith(expr.lhs, binding)
    rhs = _eval_arith(expr.rhs, binding)
    if not isinstance(lhs, int) or not isinstance(rhs, int):
        bad = lhs if not isinstance(lhs, int) else rhs
        raise GroundingError(f"arithmetic on non-integer constant {bad}")
    return lhs + rhs if expr.op == "+" else lhs - rhs


def eval_builtin(builtin: Builtin, binding: dict[str, Term]) -> bool:
    lhs = _eval_arith(builtin.lhs, binding)
    rhs = _eval_arith(builtin.rhs, binding)
    if builtin.op in ("<", "<=", ">", ">="):
        if not isinstance(lhs, int) or not isinstance(rhs, int):
            bad = lhs if not isinstance(lhs, int) else rhs
            raise GroundingError(f"arithmetic on non-integer constant {bad}")
        return {
            "<": lhs < rhs,
            "<=": lhs <= rhs,
            ">": lhs > rhs,
            ">=": lhs >= rhs,
        }[builtin.op]
    equal = lhs == rhs  # int vs symbolic term compares unequal
    return equal if builtin.op == "=" else not equal


# ---------------------------------------------------------------------------
# Pattern matching against derivable terms


def _match_term(pattern: Term, value: Term, binding: dict[str, Term]) -> bool:
    if isinstance(pattern, Var):
        seen = binding.get(pattern.name)
        if seen is None:
            binding[pattern.name] = value
            return True
        return seen == value
    if isinstance(value, Var) or pattern.functor != value.functor:
        return False
    if len(pattern.args) != len(value.args):
        return False
    return all(_match_term(p, v, binding) for p, v in zip(pattern.args, value.args))


def _match_pred(pattern: PredicateTerm, value: PredicateTerm, binding: dict[str, Term]) -> bool:
    if pattern.symbol != value.symbol or len(pattern.args) != len(value.args):
        return False
    return all(_match_term(p, v, binding) for p, v in zip(pattern.args, value.args))


def _subst_pred(pred: PredicateTerm, binding: dict[str, Term]) -> PredicateTerm:
    return PredicateTerm(pred.symbol, tuple(subst_term(a, binding) for a in pred.args))


def _builtin_ready(builtin: Builtin, binding: dict[str, Term]) -> bool:
    from .syntax import arith_vars

    return (arith_vars(builtin.lhs) | arith_vars(builtin.rhs)) <= set(binding)


class _Derivable:
    """Insertion-ordered index of possibly-derivable ground predicate terms."""

    def __init__(self) -> None:
        self.by_symbol: dict[tuple[str, int], list[PredicateTerm]] = {}
        self.all: set[PredicateTerm] = set()

    def add(self, term: PredicateTerm) -> bool:
        if term in self.all:
            return False
        self.all.add(term)
        self.by_symbol.setdefault((term.symbol, term.arity), []).append(term)
        return True

    def candidates(self, pred: PredicateTerm) -> list[PredicateTerm]:
        return self.by_symbol.get((pred.symbol, pred.arity), [])


def _body_substitutions(
    body: tuple, derivable: _Derivable, seed: dict[str, Term] | None = None
):
    """Enumerate bindings that match every positive literal against the
    derivable index and satisfy every builtin; negated literals do not
    constrain the enumeration."""
    positives = [lit for lit in body if isinstance(lit, Literal) and not lit.negated]
    builtins = [lit for lit in body if isinstance(lit, Builtin)]

    def extend(index: int, binding: dict[str, Term], pending: list[Builtin]):
        still_pending = []
        for builtin in pending:
            if _builtin_ready(builtin, binding):
                if not eval_builtin(builtin, binding):
                    return
            else:
                still_pending.append(builtin)
        if index == len(positives):
            if still_pending:
                raise GroundingError(
                    f"builtin {still_pending[0]} has unbound variables"
                )
            yield dict(binding)
            return
        atom = positives[index].atom
        for value in derivable.candidates(atom.pred):
            fresh = dict(binding)
            if _match_pred(atom.pred, value, fresh):
                yield from extend(index + 1, fresh, still_pending)

    yield from extend(0, dict(seed or {}), builtins)


# ---------------------------------------------------------------------------
# Grounding proper


class _Grounder:
    def __init__(self, program: Program, max_rules: int):
        self.program = program
        self.max_rules = max_rules
        self.atom_ids: dict[PredicateTerm, int] = {}
        self.atoms: list[PredicateTerm] = []
        self.rules: list[GroundRule] = []
        self.domains = dict(program.domains)
        seen: set[Compound] = set()
        self.constants: list[Compound] = []
        for _, constants in program.domains:
            for const in constants:
                if const not in seen:
                    seen.add(const)
                    self.constants.append(const)
        self.facts: set[PredicateTerm] = {
            rule.head[0].pred
            for rule in program.rules
            if len(rule.head) == 1 and not rule.body and rule.head[0].ann is TruthValue.TRUE
        }

    def atom_id(self, term: PredicateTerm) -> int:
        known = self.atom_ids.get(term)
        if known is not None:
            return known
        fresh = len(self.atoms)
        self.atom_ids[term] = fresh
        self.atoms.append(term)
        return fresh

    def emit(self, rule: GroundRule) -> None:
        self.rules.append(rule)
        if len(self.rules) > self.max_rules:
            raise GroundingError(f"grounding exceeds the cap of {self.max_rules} rules")

    # -- derivability fixpoint ------------------------------------------------

    def compute_derivable(self) -> _Derivable:
        derivable = _Derivable()
        changed = True
        while changed:
            changed = False
            for rule in self.program.rules:
                for binding in _body_substitutions(rule.body, derivable):
                    for head in rule.head:
                        term = _subst_pred(head.pred, binding)
                        changed |= derivable.add(term)
            for card in self.program.cardinalities:
                for binding in _body_substitutions(card.guard, derivable):
                    for candidate in self.candidate_terms(card, binding):
                        changed |= derivable.add(candidate)
        return derivable

    # -- cardinality candidates ------------------------------------------------

    def candidate_terms(
        self, card: CardinalityRule, guard_binding: dict[str, Term]
    ) -> list[PredicateTerm]:
        from .syntax import atom_vars

        counted = sorted(atom_vars(card.element) - set(guard_binding))
        seen: set[PredicateTerm] = set()
        ordered: list[PredicateTerm] = []
        for combo in itertools.product(self.constants, repeat=len(counted)):
            binding = dict(guard_binding)
            binding.update(zip(counted, combo))
            if not self.condition_holds(card, binding):
                continue
            term = _subst_pred(card.element.pred, binding)
            if term not in seen:
                seen.add(term)
                ordered.append(term)
        return ordered

    def condition_holds(self, card: CardinalityRule, binding: dict[str, Term]) -> bool:
        for branch in card.condition:
            ok = True
            for item in branch:
                if isinstance(item, AnnotatedAtom):
                    if _subst_pred(item.pred, binding) not in self.facts:
                        ok = False
                        break
                elif not eval_builtin(item, binding):
                    ok = False
                    break
            if ok:
                return True
        return False

    # -- instantiation ----------------------------------------------------------

    def ground_body(self, body: tuple, binding: dict[str, Term]) -> tuple[GroundLiteral, ...]:
        ground: list[GroundLiteral] = []
        for lit in body:
            if isinstance(lit, Builtin):
                continue  # evaluated during enumeration
            pred = _subst_pred(lit.atom.pred, binding)
            ground.append(GroundLiteral(self.atom_id(pred), lit.atom.ann, lit.negated))
        return tuple(ground)

    def instantiate_rule(self, rule: Rule, derivable: _Derivable) -> None:
        bindings = sorted(
            _body_substitutions(rule.body, derivable),
            key=lambda b: sorted((name, str(term)) for name, term in b.items()),
        )
        for binding in bindings:
            head = tuple(
                (self.atom_id(_subst_pred(item.pred, binding)), item.ann)
                for item in rule.head
            )
            self.emit(GroundRule(head, self.ground_body(rule.body, binding)))

    def expand_cardinality(self, card: CardinalityRule, derivable: _Derivable) -> None:
        """Choice loops, at-most and at-least constraints, optional closure.

        Each candidate gets an even negation loop through a fresh
        ``omit__``-prefixed witness so that picking the candidate needs no
        further justification (the target system's count aggregates behave
        the same way; a plain t-or-f disjunction would let minimality
        cancel a picked candidate against an independently derived f).
        Counting is over the t-annotation, so inconsistent candidates
        count too.
        """
        bindings = sorted(
            _body_substitutions(card.guard, derivable),
            key=lambda b: sorted((name, str(term)) for name, term in b.items()),
        )
        for binding in bindings:
            guard = self.ground_body(card.guard, binding)
            candidate_terms = self.candidate_terms(card, binding)
            candidates = [self.atom_id(t) for t in candidate_terms]
            k = len(candidates)
            if card.count > k:
                raise GroundingError(
                    f"cardinality requires {card.count} of only {k} candidates "
                    f"for {card.element.pred.symbol}"
                )
            for term, cand in zip(candidate_terms, candidates):
                witness = self.atom_id(
                    PredicateTerm(OMIT_PREFIX + term.symbol, term.args)
                )
                self.emit(
                    GroundRule(
                        ((cand, TruthValue.TRUE),),
                        guard + (GroundLiteral(witness, TruthValue.TRUE, negated=True),),
                    )
                )
                self.emit(
                    GroundRule(
                        ((witness, TruthValue.TRUE),),
                        guard + (GroundLiteral(cand, TruthValue.TRUE, negated=True),),
                    )
                )
            for subset in itertools.combinations(candidates, card.count + 1):
                body = guard + tuple(GroundLiteral(c, TruthValue.TRUE) for c in subset)
                self.emit(GroundRule((), body))
            for subset in itertools.combinations(candidates, k - card.count + 1):
                body = guard + tuple(
                    GroundLiteral(c, TruthValue.TRUE, negated=True) for c in subset
                )
                self.emit(GroundRule((), body))
            if card.with_closure:
                for cand in candidates:
                    body = guard + (GroundLiteral(cand, TruthValue.TRUE, negated=True),)
                    self.emit(GroundRule(((cand, TruthValue.FALSE),), body))

    # -- preferences --------------------------------------------------------------

    def expand_preference(self) -> list[tuple[str, frozenset[int]]]:
        levels: list[tuple[str, frozenset[int]]] = []
        for level in self.program.preference:
            members: set[int] = set()
            for pattern in level.patterns:
                domains = []
                for _, domain in pattern.binders:
                    if domain not in self.domains:
                        raise GroundingError(f"domain {domain} referenced but not declared")
                    domains.append(self.domains[domain])
                names = [var for var, _ in pattern.binders]
                for combo in itertools.product(*domains):
                    binding = dict(zip(names, combo))
                    term = _subst_pred(pattern.atom.pred, binding)
                    members.add(self.atom_id(term))
            levels.append((level.name, frozenset(members)))
        return levels

    def run(self) -> GroundProgram:
        derivable = self.compute_derivable()
        for rule in self.program.rules:
            self.instantiate_rule(rule, derivable)
        for card in self.program.cardinalities:
            self.expand_cardinality(card, derivable)
        preference = self.expand_preference()
        preference.append((IMPLICIT_LEVEL_NAME, frozenset(range(len(self.atoms)))))
        return GroundProgram(tuple(self.atoms), tuple(self.rules), tuple(preference))


def ground(program: Program, max_rules: int = DEFAULT_RULE_CAP) -> GroundProgram:
    """Ground a desugared, validated program.

    Raises :class:`GroundingError` for arithmetic on non-integer
    constants, undeclared domains, unsatisfiable cardinality counts, and
    the rule cap.
    """
    if not is_desugared(program):
        raise GroundingError("program must be desugared before grounding")
    problems = validate(program)
    if problems:
        raise GroundingError(f"program does not validate: {problems[0]}")
    return _Grounder(program, max_rules).run()


# ---------------------------------------------------------------------------
# Debug rendering


def render_ground_literal(gp: GroundProgram, lit: GroundLiteral) -> str:
    text = f"{gp.atoms[lit.atom]} : {lit.ann}"
    return f"not {text}" if lit.negated else text


def render_ground_rule(gp: GroundProgram, rule: GroundRule) -> str:
    head = " ; ".join(f"{gp.atoms[a]} : {ann}" for a, ann in rule.head)
    if not rule.body:
        return f"{head}."
    body = ", ".join(render_ground_literal(gp, lit) for lit in rule.body)
    return f"{head} :- {body}." if head else f":- {body}."


def render_ground(gp: GroundProgram) -> str:
    lines = [render_ground_rule(gp, rule) for rule in gp.rules]
    for name, members in gp.preference:
        atoms = ", ".join(sorted(str(gp.atoms[a]) for a in members))
        lines.append(f"% preference {name}: {{{atoms}}}")
    return "\n".join(lines) + ("\n" if lines else "")
