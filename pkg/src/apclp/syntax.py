"""Abstract syntax of annotated logic programs.

A program is a set of disjunctive rules over annotated atoms ``p : v``
(v one of t/f/top/bottom), plus exactly-N cardinality statements,
domain declarations, and an ordered consistency-preference declaration.

Two pieces of surface sugar are eliminated by :func:`desugar`:

* epistemic negation ``~ (p : v)`` becomes ``p : eneg(v)``;
* an epistemic-implication head ``(c1 ; ... ; cm <~ p1, ..., pk)``
  becomes the plain disjunction ``c1 ; ... ; cm ; ~p1 ; ... ; ~pk``
  (with the ``~`` then folded into the annotations).

Ontological negation (``not`` in the concrete syntax) is *not* sugar;
it is the nonmonotonic negation removed by the program reduct.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .lattice import TruthValue, eneg

# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Compound:
    """Function application; constants are 0-ary, integers are 0-ary with a
    numeric functor name."""

    functor: str
    args: tuple["Term", ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.functor
        return f"{self.functor}({','.join(str(a) for a in self.args)})"


Term = Var | Compound


def constant(name) -> Compound:
    return Compound(str(name))


def int_value(term: Term) -> int | None:
    """The integer a 0-ary numeric functor denotes, else None."""
    if isinstance(term, Compound) and not term.args:
        try:
            return int(term.functor)
        except ValueError:
            return None
    return None


def term_vars(term: Term) -> set[str]:
    if isinstance(term, Var):
        return {term.name}
    names: set[str] = set()
    for arg in term.args:
        names |= term_vars(arg)
    return names


def subst_term(term: Term, binding: dict[str, Term]) -> Term:
    if isinstance(term, Var):
        return binding.get(term.name, term)
    if not term.args:
        return term
    return Compound(term.functor, tuple(subst_term(a, binding) for a in term.args))


# ---------------------------------------------------------------------------
# Arithmetic expressions (builtin comparisons only)


@dataclass(frozen=True)
class Arith:
    """Binary +/- over integer operands."""

    op: str  # "+" or "-"
    lhs: "ArithExpr"
    rhs: "ArithExpr"

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class AbsDiff:
    """Absolute value, written ``|e|`` in the concrete syntax."""

    expr: "ArithExpr"

    def __str__(self) -> str:
        return f"|{self.expr}|"


ArithExpr = Term | Arith | AbsDiff


def arith_vars(expr: ArithExpr) -> set[str]:
    if isinstance(expr, Arith):
        return arith_vars(expr.lhs) | arith_vars(expr.rhs)
    if isinstance(expr, AbsDiff):
        return arith_vars(expr.expr)
    return term_vars(expr)


def subst_arith(expr: ArithExpr, binding: dict[str, Term]) -> ArithExpr:
    if isinstance(expr, Arith):
        return Arith(expr.op, subst_arith(expr.lhs, binding), subst_arith(expr.rhs, binding))
    if isinstance(expr, AbsDiff):
        return AbsDiff(subst_arith(expr.expr, binding))
    return subst_term(expr, binding)


# ---------------------------------------------------------------------------
# Atoms and literals


@dataclass(frozen=True)
class PredicateTerm:
    symbol: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(str(a) for a in self.args)})"

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class AnnotatedAtom:
    pred: PredicateTerm
    ann: TruthValue

    def __str__(self) -> str:
        return f"{self.pred} : {self.ann}"


@dataclass(frozen=True)
class Eneg:
    """Epistemic negation applied to an atom; removed by desugar."""

    atom: AnnotatedAtom

    def __str__(self) -> str:
        return f"~ ({self.atom})"


HeadAtom = AnnotatedAtom | Eneg


@dataclass(frozen=True)
class HeadImplication:
    """Epistemic implication in head position; removed by desugar."""

    conclusions: tuple[HeadAtom, ...]
    premises: tuple[HeadAtom, ...]

    def __str__(self) -> str:
        left = " ; ".join(str(c) for c in self.conclusions)
        right = ", ".join(str(p) for p in self.premises)
        return f"({left} <~ {right})"


HeadItem = AnnotatedAtom | Eneg | HeadImplication


@dataclass(frozen=True)
class Literal:
    """Body literal: an atom, possibly under ontological negation."""

    atom: HeadAtom
    negated: bool = False

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


BUILTIN_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Builtin:
    op: str
    lhs: ArithExpr
    rhs: ArithExpr

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


BodyLiteral = Literal | Builtin


# ---------------------------------------------------------------------------
# Rules, cardinality statements, preferences


@dataclass(frozen=True)
class Rule:
    head: tuple[HeadItem, ...]  # empty head = integrity constraint
    body: tuple[BodyLiteral, ...] = ()

    def __str__(self) -> str:
        head = " ; ".join(str(h) for h in self.head)
        if not self.body:
            return f"{head}."
        body = ", ".join(str(b) for b in self.body)
        return f"{head} :- {body}." if head else f":- {body}."


CondItem = AnnotatedAtom | Builtin


@dataclass(frozen=True)
class CardinalityRule:
    """Exactly-``count`` statement over instances of ``element``.

    ``condition`` is a disjunction (outer tuple) of conjunctions (inner
    tuples) of fact-closed atoms and builtins; it selects the candidate
    instances.  ``with_closure`` adds the closed-world rule deriving the
    f-annotation for candidates not chosen.
    """

    count: int
    element: AnnotatedAtom
    condition: tuple[tuple[CondItem, ...], ...]
    guard: tuple[BodyLiteral, ...] = ()
    with_closure: bool = True


@dataclass(frozen=True)
class PrefPattern:
    """A top-annotated atom pattern with ``for VAR in domain`` binders."""

    atom: AnnotatedAtom
    binders: tuple[tuple[str, str], ...] = ()  # (variable, domain name)


@dataclass(frozen=True)
class PreferenceLevel:
    name: str
    patterns: tuple[PrefPattern, ...]


#: Reserved name for the implicit final preference level over all atoms.
IMPLICIT_LEVEL_NAME = "btop"


@dataclass(frozen=True)
class Program:
    domains: tuple[tuple[str, tuple[Compound, ...]], ...] = ()
    rules: tuple[Rule, ...] = ()
    cardinalities: tuple[CardinalityRule, ...] = ()
    preference: tuple[PreferenceLevel, ...] = ()  # most significant first


# ---------------------------------------------------------------------------
# Variable collection and substitution over literals


def atom_vars(atom: AnnotatedAtom) -> set[str]:
    names: set[str] = set()
    for arg in atom.pred.args:
        names |= term_vars(arg)
    return names


def head_atom_vars(item: HeadAtom) -> set[str]:
    return atom_vars(item.atom if isinstance(item, Eneg) else item)


def head_item_vars(item: HeadItem) -> set[str]:
    if isinstance(item, HeadImplication):
        names: set[str] = set()
        for part in item.conclusions + item.premises:
            names |= head_atom_vars(part)
        return names
    return head_atom_vars(item)


def subst_atom(atom: AnnotatedAtom, binding: dict[str, Term]) -> AnnotatedAtom:
    pred = PredicateTerm(atom.pred.symbol, tuple(subst_term(a, binding) for a in atom.pred.args))
    return AnnotatedAtom(pred, atom.ann)


def atom_is_ground(atom: AnnotatedAtom) -> bool:
    return not atom_vars(atom)


# ---------------------------------------------------------------------------
# Desugaring


class DesugarError(Exception):
    pass


def _strip_eneg(item: HeadAtom) -> AnnotatedAtom:
    if isinstance(item, Eneg):
        inner = item.atom
        return AnnotatedAtom(inner.pred, eneg(inner.ann))
    return item


def _flip(item: HeadAtom) -> AnnotatedAtom:
    atom = _strip_eneg(item)
    return AnnotatedAtom(atom.pred, eneg(atom.ann))


def desugar_rule(rule: Rule) -> Rule:
    head: list[AnnotatedAtom] = []
    for item in rule.head:
        if isinstance(item, HeadImplication):
            head.extend(_strip_eneg(c) for c in item.conclusions)
            head.extend(_flip(p) for p in item.premises)
        else:
            head.append(_strip_eneg(item))
    body: list[BodyLiteral] = []
    for lit in rule.body:
        if isinstance(lit, Literal):
            body.append(Literal(_strip_eneg(lit.atom), lit.negated))
        else:
            body.append(lit)
    return Rule(tuple(head), tuple(body))


def desugar_cardinality(card: CardinalityRule) -> CardinalityRule:
    guard = tuple(
        Literal(_strip_eneg(lit.atom), lit.negated) if isinstance(lit, Literal) else lit
        for lit in card.guard
    )
    return replace(card, guard=guard)


def desugar(program: Program) -> Program:
    """Eliminate epistemic negation and epistemic-implication heads."""
    return replace(
        program,
        rules=tuple(desugar_rule(r) for r in program.rules),
        cardinalities=tuple(desugar_cardinality(c) for c in program.cardinalities),
    )


def is_desugared(program: Program) -> bool:
    for rule in program.rules:
        if any(not isinstance(h, AnnotatedAtom) for h in rule.head):
            return False
        for lit in rule.body:
            if isinstance(lit, Literal) and not isinstance(lit.atom, AnnotatedAtom):
                return False
    for card in program.cardinalities:
        for lit in card.guard:
            if isinstance(lit, Literal) and not isinstance(lit.atom, AnnotatedAtom):
                return False
    return True


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    message: str

    def __str__(self) -> str:
        return self.message


def _positive_vars(body: tuple[BodyLiteral, ...]) -> set[str]:
    bound: set[str] = set()
    for lit in body:
        if isinstance(lit, Literal) and not lit.negated:
            bound |= head_atom_vars(lit.atom)
    return bound


def _body_vars(body: tuple[BodyLiteral, ...]) -> set[str]:
    names: set[str] = set()
    for lit in body:
        if isinstance(lit, Literal):
            names |= head_atom_vars(lit.atom)
        else:
            names |= arith_vars(lit.lhs) | arith_vars(lit.rhs)
    return names


def _cond_pin(item: CondItem) -> str | None:
    """Variable pinned by an equality like ``Y = null`` (or reversed)."""
    if isinstance(item, Builtin) and item.op == "=":
        if isinstance(item.lhs, Var) and isinstance(item.rhs, Compound) and not item.rhs.args:
            return item.lhs.name
        if isinstance(item.rhs, Var) and isinstance(item.lhs, Compound) and not item.lhs.args:
            return item.rhs.name
    return None


def validate(program: Program) -> list[Diagnostic]:
    """Static checks; an empty result means the program is well formed."""
    diags: list[Diagnostic] = []

    domain_names = [name for name, _ in program.domains]
    for name in sorted({n for n in domain_names if domain_names.count(n) > 1}):
        diags.append(Diagnostic(f"domain {name} declared more than once"))
    domains = dict(program.domains)

    # Arity consistency over every atom occurrence.
    arities: dict[str, int] = {}

    def note_atom(atom: AnnotatedAtom, where: str) -> None:
        seen = arities.setdefault(atom.pred.symbol, atom.pred.arity)
        if seen != atom.pred.arity:
            diags.append(
                Diagnostic(
                    f"{where}: predicate {atom.pred.symbol}/{atom.pred.arity} "
                    f"clashes with earlier use of arity {seen}"
                )
            )

    def note_head_atom(item: HeadAtom, where: str) -> None:
        note_atom(item.atom if isinstance(item, Eneg) else item, where)

    for index, rule in enumerate(program.rules):
        where = f"rule {index + 1}"
        for item in rule.head:
            if isinstance(item, HeadImplication):
                for part in item.conclusions + item.premises:
                    note_head_atom(part, where)
            else:
                note_head_atom(item, where)
        for lit in rule.body:
            if isinstance(lit, Literal):
                note_head_atom(lit.atom, where)

    for index, card in enumerate(program.cardinalities):
        where = f"cardinality {index + 1}"
        note_atom(card.element, where)
        for branch in card.condition:
            for item in branch:
                if isinstance(item, AnnotatedAtom):
                    note_atom(item, where)
        for lit in card.guard:
            if isinstance(lit, Literal):
                note_head_atom(lit.atom, where)

    for level in program.preference:
        for pattern in level.patterns:
            note_atom(pattern.atom, f"preference {level.name}")

    # Rule safety.
    for index, rule in enumerate(program.rules):
        where = f"rule {index + 1}"
        bound = _positive_vars(rule.body)
        free: set[str] = set()
        for item in rule.head:
            free |= head_item_vars(item)
        for lit in rule.body:
            if isinstance(lit, Literal) and lit.negated:
                free |= head_atom_vars(lit.atom)
            elif isinstance(lit, Builtin):
                free |= arith_vars(lit.lhs) | arith_vars(lit.rhs)
        for name in sorted(free - bound):
            diags.append(Diagnostic(f"{where}: unsafe variable {name}"))

    # Fact-closed predicates: defined exclusively by ground TRUE facts.
    defined_by_nonfact: set[str] = set()
    fact_preds: set[str] = set()
    for rule in program.rules:
        is_fact = (
            len(rule.head) == 1
            and not rule.body
            and isinstance(rule.head[0], AnnotatedAtom)
            and rule.head[0].ann is TruthValue.TRUE
            and atom_is_ground(rule.head[0])
        )
        for item in rule.head:
            if isinstance(item, HeadImplication):
                for part in item.conclusions + item.premises:
                    defined_by_nonfact.add(_strip_eneg(part).pred.symbol)
            else:
                atom = _strip_eneg(item)
                if is_fact:
                    fact_preds.add(atom.pred.symbol)
                else:
                    defined_by_nonfact.add(atom.pred.symbol)
    for card in program.cardinalities:
        defined_by_nonfact.add(card.element.pred.symbol)

    def fact_closed(symbol: str) -> bool:
        return symbol in fact_preds and symbol not in defined_by_nonfact

    # Cardinality checks.
    for index, card in enumerate(program.cardinalities):
        where = f"cardinality {index + 1}"
        if card.element.ann is not TruthValue.TRUE:
            diags.append(Diagnostic(f"{where}: counted element must be annotated t"))
        if card.count < 0:
            diags.append(Diagnostic(f"{where}: negative count"))
        guard_bound = _positive_vars(card.guard)
        guard_free = _body_vars(card.guard) - guard_bound
        for name in sorted(guard_free):
            diags.append(Diagnostic(f"{where}: unsafe guard variable {name}"))
        counted = atom_vars(card.element) - guard_bound
        for branch in card.condition:
            branch_bound = set(guard_bound)
            for item in branch:
                if isinstance(item, AnnotatedAtom):
                    branch_bound |= atom_vars(item)
                else:
                    pin = _cond_pin(item)
                    if pin is not None:
                        branch_bound.add(pin)
            for name in sorted(counted - branch_bound):
                diags.append(Diagnostic(f"{where}: condition does not bind variable {name}"))
            for item in branch:
                if isinstance(item, AnnotatedAtom):
                    if item.ann is not TruthValue.TRUE:
                        diags.append(Diagnostic(f"{where}: condition atoms must be annotated t"))
                    if not fact_closed(item.pred.symbol):
                        diags.append(
                            Diagnostic(f"{where}: condition not fact-closed ({item.pred.symbol})")
                        )

    # Preference declarations.
    seen_levels: set[str] = set()
    for level in program.preference:
        if level.name in seen_levels:
            diags.append(Diagnostic(f"preference level {level.name} declared more than once"))
        seen_levels.add(level.name)
        if level.name == IMPLICIT_LEVEL_NAME:
            diags.append(Diagnostic(f"preference level name {IMPLICIT_LEVEL_NAME} is reserved"))
        for pattern in level.patterns:
            if pattern.atom.ann is not TruthValue.TOP:
                diags.append(
                    Diagnostic(f"preference {level.name}: patterns must be annotated top")
                )
            binder_vars = set()
            for var, domain in pattern.binders:
                if var in binder_vars:
                    diags.append(
                        Diagnostic(f"preference {level.name}: duplicate binder variable {var}")
                    )
                binder_vars.add(var)
                if domain not in domains:
                    diags.append(
                        Diagnostic(f"preference {level.name}: unknown domain {domain}")
                    )
            for name in sorted(atom_vars(pattern.atom) - binder_vars):
                diags.append(
                    Diagnostic(f"preference {level.name}: unbound pattern variable {name}")
                )

    return diags
