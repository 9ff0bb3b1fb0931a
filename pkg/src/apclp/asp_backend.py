"""Embedding into a reified answer-set program.

Atoms ``p : v`` become ``truth(p,v)`` over the annotation names
t/f/top/bottom; ontological negation becomes default negation;
disjunction and conjunction map one-to-one.  Four background axioms
recreate the lattice closure on the target side.  Cardinality
statements are emitted as native count aggregates, and the preference
declaration becomes one ``lexico`` preference over named ``subset``
preferences (most significant level, highest weight) plus an
``#optimize`` directive, in the Asprin dialect.

Emission is byte-deterministic, so the transpiled corpus files can be
golden-tested.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

from .grounder import GroundProgram, GroundRule
from .lattice import TruthValue, lub, truth_value_from_name
from .semantics import Interpretation, model_lines
from .solver import SolveResult, SolveStats
from .syntax import (
    AnnotatedAtom,
    Builtin,
    CardinalityRule,
    Compound,
    IMPLICIT_LEVEL_NAME,
    Literal,
    PredicateTerm,
    Program,
    Rule,
    Var,
    desugar,
    is_desugared,
    subst_term,
)

#: The lattice-closure axioms every emitted program carries.  The last
#: one is range-restricted over the reified universe so the target
#: grounder accepts it.
BACKGROUND_AXIOMS = (
    "truth(X,top) :- truth(X,t),truth(X,f).",
    "truth(X,t) :- truth(X,top).",
    "truth(X,f) :- truth(X,top).",
    "truth(X,bottom) :- hu(X).",
)


@dataclass(frozen=True)
class AspDocument:
    program_text: str
    preference_text: str


@dataclass(frozen=True)
class ExternalRunConfig:
    solver_path: str
    extra_args: tuple[str, ...] = ()
    timeout: float = 60.0
    enumeration_cap: int = 0  # 0 = all models

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class ExternalSolverError(Exception):
    pass


# ---------------------------------------------------------------------------
# Structured reified rules (used directly by the embedding property tests)


@dataclass(frozen=True)
class TruthAtom:
    term: PredicateTerm
    value: TruthValue

    def __str__(self) -> str:
        return f"truth({self.term},{self.value})"


@dataclass(frozen=True)
class ReifiedLiteral:
    atom: TruthAtom
    negated: bool = False

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class ReifiedRule:
    head: tuple[TruthAtom, ...]
    body: tuple[ReifiedLiteral, ...] = ()

    def __str__(self) -> str:
        head = ";".join(str(a) for a in self.head)
        if not self.body:
            return f"{head}."
        body = ",".join(str(lit) for lit in self.body)
        return f"{head}:-{body}." if head else f":-{body}."


def reify_ground_rule(gp: GroundProgram, rule: GroundRule) -> ReifiedRule:
    head = tuple(TruthAtom(gp.atoms[atom], ann) for atom, ann in rule.head)
    body = tuple(
        ReifiedLiteral(TruthAtom(gp.atoms[lit.atom], lit.ann), lit.negated)
        for lit in rule.body
    )
    return ReifiedRule(head, body)


def reify_ground_program(gp: GroundProgram) -> tuple[ReifiedRule, ...]:
    return tuple(reify_ground_rule(gp, rule) for rule in gp.rules)


def reify_interpretation(interp: Interpretation) -> frozenset[TruthAtom]:
    """The closed-set image: one truth atom for every annotation at or
    below the assigned value (bottom included for every atom)."""
    from .lattice import ALL_VALUES, leq

    out = set()
    for term, value in zip(interp.atoms, interp.values):
        for ann in ALL_VALUES:
            if leq(ann, value):
                out.add(TruthAtom(term, ann))
    return frozenset(out)


def unreify_interpretation(
    truth_atoms: frozenset[TruthAtom], atoms: tuple[PredicateTerm, ...]
) -> Interpretation:
    """Inverse of :func:`reify_interpretation` (least-upper-bound fold)."""
    index = {term: i for i, term in enumerate(atoms)}
    values = [TruthValue.BOTTOM] * len(atoms)
    for atom in truth_atoms:
        values[index[atom.term]] = lub(values[index[atom.term]], atom.value)
    return Interpretation(atoms, values)


def reified_reduct(
    rules: tuple[ReifiedRule, ...], truth_atoms: frozenset[TruthAtom]
) -> tuple[ReifiedRule, ...]:
    """Standard Gelfond-Lifschitz reduct on the reified side."""
    out = []
    for rule in rules:
        if any(lit.negated and lit.atom in truth_atoms for lit in rule.body):
            continue
        out.append(
            ReifiedRule(rule.head, tuple(lit for lit in rule.body if not lit.negated))
        )
    return tuple(out)


def parse_reified_rule(line: str) -> ReifiedRule:
    """Inverse of ``str(ReifiedRule)`` for round-trip checks."""
    from .parser import parse

    text = line.strip()
    if not text.endswith("."):
        raise ValueError(f"not a statement: {line!r}")
    # Piggyback on the surface parser: rewrite truth(p,v) into p : v.
    program = parse(_dereify_text(text))
    if len(program.rules) != 1:
        raise ValueError(f"expected one statement in {line!r}")
    rule = program.rules[0]
    head = tuple(TruthAtom(item.pred, item.ann) for item in rule.head)
    body = tuple(
        ReifiedLiteral(TruthAtom(lit.atom.pred, lit.atom.ann), lit.negated)
        for lit in rule.body
        if isinstance(lit, Literal)
    )
    return ReifiedRule(head, body)


def _dereify_text(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        if text.startswith("truth(", i):
            depth = 1
            j = i + len("truth(")
            start = j
            while depth:
                if text[j] == "(":
                    depth += 1
                elif text[j] == ")":
                    depth -= 1
                j += 1
            inner = text[start : j - 1]
            term, _, value = inner.rpartition(",")
            out.append(f"{term} : {value}")
            i = j
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Text emission


def _reify_atom_text(atom: AnnotatedAtom) -> str:
    return f"truth({atom.pred},{atom.ann})"


def _reify_literal_text(lit: Literal | Builtin) -> str:
    if isinstance(lit, Builtin):
        return _builtin_text(lit)
    text = _reify_atom_text(lit.atom)
    return f"not {text}" if lit.negated else text


def _builtin_text(builtin: Builtin) -> str:
    return f"{_arith_text(builtin.lhs)}{builtin.op}{_arith_text(builtin.rhs)}"


def _arith_text(expr) -> str:
    from .syntax import AbsDiff, Arith

    if isinstance(expr, Arith):
        return f"{_arith_text(expr.lhs)}{expr.op}{_arith_text(expr.rhs)}"
    if isinstance(expr, AbsDiff):
        return f"|{_arith_text(expr.expr)}|"
    return str(expr)


def _rule_text(rule: Rule) -> str:
    head = ";".join(_reify_atom_text(item) for item in rule.head)
    if not rule.body:
        return f"{head}."
    body = ",".join(_reify_literal_text(lit) for lit in rule.body)
    return f"{head}:-{body}." if head else f":-{body}."


def _cond_pin(item) -> tuple[str, Compound] | None:
    if isinstance(item, Builtin) and item.op == "=":
        if isinstance(item.lhs, Var) and isinstance(item.rhs, Compound) and not item.rhs.args:
            return item.lhs.name, item.rhs
        if isinstance(item.rhs, Var) and isinstance(item.lhs, Compound) and not item.lhs.args:
            return item.rhs.name, item.lhs
    return None


def _aggregate_elements(card: CardinalityRule) -> list[str]:
    """One aggregate element per condition branch, with equality pins
    substituted into the counted element."""
    elements = []
    for branch in card.condition:
        binding: dict[str, Compound] = {}
        conds = []
        for item in branch:
            pin = _cond_pin(item)
            if pin is not None:
                binding[pin[0]] = pin[1]
            elif isinstance(item, AnnotatedAtom):
                conds.append(_reify_atom_text(item))
            else:
                conds.append(_builtin_text(item))
        pred = PredicateTerm(
            card.element.pred.symbol,
            tuple(subst_term(a, binding) for a in card.element.pred.args),
        )
        element = _reify_atom_text(AnnotatedAtom(pred, card.element.ann))
        elements.append(f"{element}:{','.join(conds)}" if conds else element)
    return elements


def _cardinality_text(card: CardinalityRule) -> list[str]:
    lines = []
    elements = ";".join(_aggregate_elements(card))
    statement = f"{card.count} {{{elements}}} {card.count}"
    if card.guard:
        guard = ",".join(_reify_literal_text(lit) for lit in card.guard)
        statement += f":-{guard}"
    lines.append(statement + ".")
    if card.with_closure:
        for branch in card.condition:
            binding: dict[str, Compound] = {}
            conds = []
            for item in branch:
                pin = _cond_pin(item)
                if pin is not None:
                    binding[pin[0]] = pin[1]
                elif isinstance(item, AnnotatedAtom):
                    conds.append(_reify_atom_text(item))
                else:
                    conds.append(_builtin_text(item))
            pred = PredicateTerm(
                card.element.pred.symbol,
                tuple(subst_term(a, binding) for a in card.element.pred.args),
            )
            element = _reify_atom_text(AnnotatedAtom(pred, TruthValue.TRUE))
            false_head = _reify_atom_text(AnnotatedAtom(pred, TruthValue.FALSE))
            body = [_reify_literal_text(lit) for lit in card.guard]
            body.extend(conds)
            body.append(f"not {element}")
            lines.append(f"{false_head}:-{','.join(body)}.")
    return lines


def _signature(program: Program) -> list[tuple[str, int]]:
    seen: set[tuple[str, int]] = set()

    def note(atom: AnnotatedAtom):
        seen.add((atom.pred.symbol, atom.pred.arity))

    for rule in program.rules:
        for item in rule.head:
            note(item)
        for lit in rule.body:
            if isinstance(lit, Literal):
                note(lit.atom)
    for card in program.cardinalities:
        note(card.element)
        for branch in card.condition:
            for item in branch:
                if isinstance(item, AnnotatedAtom):
                    note(item)
        for lit in card.guard:
            if isinstance(lit, Literal):
                note(lit.atom)
    return sorted(seen)


def _domain_block(program: Program) -> list[str]:
    lines = []
    all_constants: list[str] = []
    seen: set[str] = set()
    for name, constants in program.domains:
        values = ";".join(str(c) for c in constants)
        lines.append(f"dom_{name}({values}).")
        for c in constants:
            if str(c) not in seen:
                seen.add(str(c))
                all_constants.append(str(c))
    if all_constants:
        lines.append(f"dom({';'.join(all_constants)}).")
    for symbol, arity in _signature(program):
        if arity == 0:
            lines.append(f"hu({symbol}).")
        else:
            variables = [f"X{i + 1}" for i in range(arity)]
            body = ",".join(f"dom({v})" for v in variables)
            lines.append(f"hu({symbol}({','.join(variables)})):-{body}.")
    return lines


def _preference_text_for_program(program: Program) -> str:
    lines = []
    names = [level.name for level in program.preference] + [IMPLICIT_LEVEL_NAME]
    for level in program.preference:
        elements = []
        for pattern in level.patterns:
            conds = ",".join(f"dom_{domain}({var})" for var, domain in pattern.binders)
            text = _reify_atom_text(pattern.atom)
            elements.append(f"{text} : {conds}" if conds else text)
        lines.append(f"#preference({level.name},subset){{{';'.join(elements)}}}.")
    lines.append(f"#preference({IMPLICIT_LEVEL_NAME},subset){{truth(X,top) : hu(X)}}.")
    weighted = ";".join(
        f"{len(names) - i}::name({name})" for i, name in enumerate(names)
    )
    lines.append(f"#preference(all,lexico){{{weighted}}}.")
    lines.append("#optimize(all).")
    return "\n".join(lines) + "\n"


def translate(source: Program | GroundProgram) -> AspDocument:
    """Emit the reified document (program text plus preference text)."""
    if isinstance(source, GroundProgram):
        return _translate_ground(source)
    program = source if is_desugared(source) else desugar(source)
    lines: list[str] = []
    for rule in program.rules:
        lines.append(_rule_text(rule))
    for card in program.cardinalities:
        lines.extend(_cardinality_text(card))
    lines.extend(_domain_block(program))
    lines.extend(BACKGROUND_AXIOMS)
    program_text = "\n".join(lines) + "\n"
    preference_text = _preference_text_for_program(program) if program.preference else ""
    return AspDocument(program_text, preference_text)


def _translate_ground(gp: GroundProgram) -> AspDocument:
    lines = [str(rule) for rule in reify_ground_program(gp)]
    terms = sorted(str(term) for term in gp.atoms)
    for term in terms:
        lines.append(f"hu({term}).")
    lines.extend(BACKGROUND_AXIOMS)
    program_text = "\n".join(lines) + "\n"

    pref_lines = []
    names = []
    for name, members in gp.preference:
        names.append(name)
        elements = ";".join(sorted(f"truth({gp.atoms[a]},top)" for a in members))
        pref_lines.append(f"#preference({name},subset){{{elements}}}.")
    weighted = ";".join(f"{len(names) - i}::name({n})" for i, n in enumerate(names))
    pref_lines.append(f"#preference(all,lexico){{{weighted}}}.")
    pref_lines.append("#optimize(all).")
    return AspDocument(program_text, "\n".join(pref_lines) + "\n")


# ---------------------------------------------------------------------------
# Answer sets back into interpretations


def parse_answer_set(
    text: str,
    atoms: tuple[PredicateTerm, ...],
    permissive: bool = False,
) -> Interpretation:
    """One answer set (whitespace-separated atoms) to an interpretation.

    Non-``truth/2`` atoms are ignored.  Unknown predicate terms with a
    bottom annotation add nothing and are skipped; other unknown terms
    are registered when ``permissive`` is set and rejected otherwise.
    """
    from .parser import _Parser, _tokenize

    index = {term: i for i, term in enumerate(atoms)}
    extra: list[PredicateTerm] = []
    values: dict[int, TruthValue] = {}

    tokens, errors = _tokenize(text, "<answer>")
    if errors:
        span, message = errors[0]
        raise ValueError(f"{span}: {message}")
    parser = _Parser(tokens, "<answer>")
    while parser.peek().kind != "eof":
        term = parser.parse_term()
        if isinstance(term, Var) or term.functor != "truth" or len(term.args) != 2:
            continue
        inner, value_term = term.args
        if isinstance(inner, Var) or isinstance(value_term, Var) or value_term.args:
            raise ValueError(f"malformed truth atom {term}")
        try:
            value = truth_value_from_name(value_term.functor)
        except ValueError as err:
            raise ValueError(str(err)) from None
        pred = PredicateTerm(inner.functor, inner.args)
        position = index.get(pred)
        if position is None:
            if value is TruthValue.BOTTOM:
                continue
            if not permissive:
                raise ValueError(f"unknown atom {pred}")
            position = len(atoms) + len(extra)
            extra.append(pred)
            index[pred] = position
        values[position] = lub(values.get(position, TruthValue.BOTTOM), value)

    universe = atoms + tuple(extra)
    out = [TruthValue.BOTTOM] * len(universe)
    for position, value in values.items():
        out[position] = value
    return Interpretation(universe, out)


# ---------------------------------------------------------------------------
# External process bridge


def solve_external(
    doc: AspDocument,
    cfg: ExternalRunConfig,
    atoms: tuple[PredicateTerm, ...],
    with_preferences: bool = True,
) -> SolveResult:
    """Run the external solver on the document and parse its answer sets.

    The program (and, when present, the preference declarations) are
    written to temporary files passed as arguments; answer sets are read
    from standard output in the usual ``Answer: N`` block format.  When
    optimality markers appear, only optimal answers are kept.
    """
    started = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="apclp-") as workdir:
        program_path = os.path.join(workdir, "program.lp")
        with open(program_path, "w", encoding="utf-8") as handle:
            handle.write(doc.program_text)
        argv = [cfg.solver_path, program_path]
        if with_preferences and doc.preference_text:
            preference_path = os.path.join(workdir, "preferences.lp")
            with open(preference_path, "w", encoding="utf-8") as handle:
                handle.write(doc.preference_text)
            argv.append(preference_path)
        argv.append(str(cfg.enumeration_cap))
        argv.extend(cfg.extra_args)
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=cfg.timeout
            )
        except FileNotFoundError:
            raise ExternalSolverError(
                f"external solver not found: {cfg.solver_path}"
            ) from None
        except subprocess.TimeoutExpired:
            raise ExternalSolverError(
                f"external solver timed out after {cfg.timeout}s"
            ) from None
    if proc.returncode not in (0, 10, 20, 30):  # clingo-style exit codes
        raise ExternalSolverError(
            f"external solver failed with code {proc.returncode}: {proc.stderr.strip()}"
        )

    models, optimal = _parse_solver_output(proc.stdout, atoms)
    chosen = optimal if optimal else models
    unique = sorted(set(chosen), key=lambda m: "\n".join(model_lines(m, show_bottom=True)))
    stats = SolveStats(candidates_explored=len(models))
    stats.elapsed_ms = (time.monotonic() - started) * 1000
    return SolveResult(unique, stats, False)


def _parse_solver_output(stdout: str, atoms: tuple[PredicateTerm, ...]):
    models: list[Interpretation] = []
    optimal: list[Interpretation] = []
    lines = stdout.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("Answer:"):
            i += 1
            payload = lines[i] if i < len(lines) else ""
            model = parse_answer_set(payload, atoms, permissive=True)
            models.append(model)
            j = i + 1
            while j < len(lines) and not lines[j].strip().startswith("Answer:"):
                if "OPTIMUM FOUND" in lines[j]:
                    optimal.append(model)
                    break
                j += 1
        i += 1
    return models, optimal


def write_document(doc: AspDocument, program_path: str, preference_path: str | None = None) -> None:
    """Write the document; preferences go inline when no separate path is
    given."""
    with open(program_path, "w", encoding="utf-8") as handle:
        handle.write(doc.program_text)
        if preference_path is None and doc.preference_text:
            handle.write(doc.preference_text)
    if preference_path is not None and doc.preference_text:
        with open(preference_path, "w", encoding="utf-8") as handle:
            handle.write(doc.preference_text)
