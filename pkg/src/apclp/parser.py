"""Concrete syntax: text to :class:`~apclp.syntax.Program` and back.

Grammar sketch (``%`` starts a line comment)::

    p(a) : t.                          facts
    h1 : t ; h2 : f :- b : t, not c : top, X - 1 = Y.
    :- b1 : t, b2 : t.                 integrity constraint
    ~ p(a) : t.                        epistemic negation (sugar)
    (c : t <~ p1 : t, p2 : t) :- ...   epistemic implication head (sugar)
    1 { hold(X,Y) : t : person(X) : t } 1 :- job(Y) : t.
    #domain persons = {roberta, thelma}.
    #pref s1 subset { person(X) : top for X in persons }.
    #lexico (s1, s2).

Annotations are exactly ``t``, ``f``, ``top``, ``bottom``.  ``not`` is
ontological negation, ``~`` epistemic negation.  A trailing
``#noclosure`` on a cardinality statement suppresses its closed-world
closure rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lattice import TruthValue, truth_value_from_name
from .syntax import (
    AbsDiff,
    AnnotatedAtom,
    Arith,
    ArithExpr,
    Builtin,
    CardinalityRule,
    Compound,
    CondItem,
    Eneg,
    HeadAtom,
    HeadImplication,
    HeadItem,
    Literal,
    PredicateTerm,
    PrefPattern,
    PreferenceLevel,
    Program,
    Rule,
    Term,
    Var,
    desugar,
    is_desugared,
)

FILE_EXTENSION = ".apc"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


class ParseError(Exception):
    """Carries every (span, message) pair collected during a parse."""

    def __init__(self, diagnostics: list[tuple[SourceSpan, str]]):
        self.diagnostics = diagnostics
        first = diagnostics[0]
        extra = f" (+{len(diagnostics) - 1} more)" if len(diagnostics) > 1 else ""
        super().__init__(f"{first[0]}: {first[1]}{extra}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<directive>\#[a-z]+)
  | (?P<symbol>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<int>\d+)
  | (?P<punct>:-|<~|<=|>=|!=|[.,;:~{}()=<>+\-|])
    """,
    re.VERBOSE,
)

_ANNOTATIONS = {"t", "f", "top", "bottom"}


@dataclass(frozen=True)
class _Token:
    kind: str  # symbol | var | int | punct | directive | eof
    text: str
    line: int
    col: int
    end_line: int
    end_col: int


def _tokenize(text: str, file: str) -> tuple[list[_Token], list[tuple[SourceSpan, str]]]:
    tokens: list[_Token] = []
    errors: list[tuple[SourceSpan, str]] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            span = SourceSpan(file, line, col, line, col + 1)
            errors.append((span, f"unexpected character {text[pos]!r}"))
            pos += 1
            col += 1
            continue
        chunk = match.group(0)
        newlines = chunk.count("\n")
        if newlines:
            end_line = line + newlines
            end_col = len(chunk) - chunk.rfind("\n")
        else:
            end_line = line
            end_col = col + len(chunk)
        kind = match.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, chunk, line, col, end_line, end_col))
        line, col = end_line, end_col
        pos = match.end()
    tokens.append(_Token("eof", "", line, col, line, col))
    return tokens, errors


class _Syntax(Exception):
    def __init__(self, span: SourceSpan, message: str):
        self.span = span
        self.message = message
        super().__init__(message)


class _Parser:
    def __init__(self, tokens: list[_Token], file: str):
        self.tokens = tokens
        self.file = file
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def span_of(self, token: _Token) -> SourceSpan:
        return SourceSpan(self.file, token.line, token.col, token.end_line, token.end_col)

    def fail(self, token: _Token, message: str) -> _Syntax:
        return _Syntax(self.span_of(token), message)

    def at_punct(self, text: str) -> bool:
        token = self.peek()
        return token.kind == "punct" and token.text == text

    def at_word(self, text: str) -> bool:
        token = self.peek()
        return token.kind == "symbol" and token.text == text

    def eat_punct(self, text: str) -> _Token:
        token = self.peek()
        if token.kind != "punct" or token.text != text:
            raise self.fail(token, f"expected {text!r}")
        return self.advance()

    def eat_word(self, text: str) -> _Token:
        token = self.peek()
        if token.kind != "symbol" or token.text != text:
            raise self.fail(token, f"expected {text!r}")
        return self.advance()

    # -- terms and atoms ----------------------------------------------------

    def parse_term(self) -> Term:
        token = self.peek()
        if token.kind == "var":
            self.advance()
            return Var(token.text)
        if token.kind == "int":
            self.advance()
            return Compound(token.text)
        if token.kind == "symbol":
            self.advance()
            if self.at_punct("("):
                self.advance()
                args = [self.parse_term()]
                while self.at_punct(","):
                    self.advance()
                    args.append(self.parse_term())
                self.eat_punct(")")
                return Compound(token.text, tuple(args))
            return Compound(token.text)
        raise self.fail(token, "expected a term")

    def parse_constant(self) -> Compound:
        token = self.peek()
        if token.kind in ("symbol", "int"):
            self.advance()
            return Compound(token.text)
        raise self.fail(token, "expected a constant")

    def parse_annotation(self) -> TruthValue:
        token = self.peek()
        if token.kind != "symbol" or token.text not in _ANNOTATIONS:
            raise self.fail(token, f"unknown annotation {token.text!r}")
        self.advance()
        return truth_value_from_name(token.text)

    def parse_annotated_atom(self) -> AnnotatedAtom:
        term = self.parse_term()
        if isinstance(term, Var):
            raise self.fail(self.peek(), "a predicate term cannot be a variable")
        self.eat_punct(":")
        ann = self.parse_annotation()
        return AnnotatedAtom(PredicateTerm(term.functor, term.args), ann)

    def parse_epatom(self) -> HeadAtom:
        if self.at_punct("~"):
            self.advance()
            if self.at_punct("("):
                self.advance()
                atom = self.parse_annotated_atom()
                self.eat_punct(")")
            else:
                atom = self.parse_annotated_atom()
            return Eneg(atom)
        return self.parse_annotated_atom()

    # -- arithmetic and builtins ---------------------------------------------

    def parse_arith(self) -> ArithExpr:
        expr = self.parse_arith_operand()
        while self.at_punct("+") or self.at_punct("-"):
            op = self.advance().text
            expr = Arith(op, expr, self.parse_arith_operand())
        return expr

    def parse_arith_operand(self) -> ArithExpr:
        if self.at_punct("|"):
            self.advance()
            inner = self.parse_arith()
            self.eat_punct("|")
            return AbsDiff(inner)
        return self.parse_term()

    def parse_relop(self) -> str:
        token = self.peek()
        if token.kind == "punct" and token.text in ("=", "!=", "<", "<=", ">", ">="):
            self.advance()
            return token.text
        raise self.fail(token, "expected a comparison operator")

    def parse_atom_or_builtin(self) -> CondItem:
        """A positive body element: annotated atom or builtin comparison."""
        if self.at_punct("|"):
            lhs = self.parse_arith()
            op = self.parse_relop()
            return Builtin(op, lhs, self.parse_arith())
        expr = self.parse_term()
        if self.at_punct(":") and isinstance(expr, Compound):
            self.advance()
            ann = self.parse_annotation()
            return AnnotatedAtom(PredicateTerm(expr.functor, expr.args), ann)
        while self.at_punct("+") or self.at_punct("-"):
            op = self.advance().text
            expr = Arith(op, expr, self.parse_arith_operand())
        op = self.parse_relop()
        return Builtin(op, expr, self.parse_arith())

    # -- rule parts ----------------------------------------------------------

    def parse_body(self) -> tuple[Literal | Builtin, ...]:
        body: list[Literal | Builtin] = []
        while True:
            if self.at_word("not"):
                self.advance()
                body.append(Literal(self.parse_epatom(), negated=True))
            elif self.at_punct("~"):
                body.append(Literal(self.parse_epatom()))
            else:
                item = self.parse_atom_or_builtin()
                body.append(item if isinstance(item, Builtin) else Literal(item))
            if not self.at_punct(","):
                return tuple(body)
            self.advance()

    def parse_head_item(self) -> HeadItem:
        if self.at_punct("("):
            opener = self.advance()
            conclusions = [self.parse_epatom()]
            while self.at_punct(";"):
                self.advance()
                conclusions.append(self.parse_epatom())
            if self.at_punct("<~"):
                self.advance()
                premises = [self.parse_epatom()]
                while self.at_punct(","):
                    self.advance()
                    premises.append(self.parse_epatom())
                self.eat_punct(")")
                return HeadImplication(tuple(conclusions), tuple(premises))
            self.eat_punct(")")
            if len(conclusions) == 1:
                return conclusions[0]
            raise self.fail(opener, "parenthesized head disjunction needs <~")
        atom = self.parse_epatom()
        if self.at_punct("<~"):
            self.advance()
            premises = [self.parse_epatom()]
            while self.at_punct(","):
                self.advance()
                premises.append(self.parse_epatom())
            return HeadImplication((atom,), tuple(premises))
        return atom

    def parse_rule(self) -> Rule:
        head: list[HeadItem] = []
        if not self.at_punct(":-"):
            head.append(self.parse_head_item())
            while self.at_punct(";"):
                self.advance()
                head.append(self.parse_head_item())
        body: tuple[Literal | Builtin, ...] = ()
        if self.at_punct(":-"):
            self.advance()
            if not self.at_punct("."):
                body = self.parse_body()
        self.eat_punct(".")
        return Rule(tuple(head), body)

    def parse_cardinality(self) -> CardinalityRule:
        low_token = self.advance()
        low = int(low_token.text)
        self.eat_punct("{")
        element = self.parse_annotated_atom()
        condition: tuple[tuple[CondItem, ...], ...] = ((),)
        if self.at_punct(":"):
            self.advance()
            branches: list[tuple[CondItem, ...]] = []
            while True:
                items = [self.parse_atom_or_builtin()]
                while self.at_punct(","):
                    self.advance()
                    items.append(self.parse_atom_or_builtin())
                branches.append(tuple(items))
                if not self.at_word("or"):
                    break
                self.advance()
            condition = tuple(branches)
        self.eat_punct("}")
        high_token = self.peek()
        if high_token.kind != "int":
            raise self.fail(high_token, "expected the upper cardinality bound")
        self.advance()
        if int(high_token.text) != low:
            raise self.fail(high_token, "cardinality bounds must match (exactly-N only)")
        guard: tuple[Literal | Builtin, ...] = ()
        if self.at_punct(":-"):
            self.advance()
            guard = self.parse_body()
        with_closure = True
        if self.peek().kind == "directive" and self.peek().text == "#noclosure":
            self.advance()
            with_closure = False
        self.eat_punct(".")
        return CardinalityRule(low, element, condition, guard, with_closure)

    # -- directives ------------------------------------------------------------

    def parse_domain(self) -> tuple[str, tuple[Compound, ...]]:
        self.advance()  # #domain
        name = self.peek()
        if name.kind != "symbol":
            raise self.fail(name, "expected a domain name")
        self.advance()
        self.eat_punct("=")
        self.eat_punct("{")
        constants = [self.parse_constant()]
        while self.at_punct(","):
            self.advance()
            constants.append(self.parse_constant())
        self.eat_punct("}")
        self.eat_punct(".")
        return name.text, tuple(constants)

    def parse_pref(self) -> PreferenceLevel:
        self.advance()  # #pref
        name = self.peek()
        if name.kind != "symbol":
            raise self.fail(name, "expected a preference level name")
        self.advance()
        self.eat_word("subset")
        self.eat_punct("{")
        patterns = [self.parse_pref_pattern()]
        while self.at_punct(","):
            self.advance()
            patterns.append(self.parse_pref_pattern())
        self.eat_punct("}")
        self.eat_punct(".")
        return PreferenceLevel(name.text, tuple(patterns))

    def parse_pref_pattern(self) -> PrefPattern:
        atom = self.parse_annotated_atom()
        binders: list[tuple[str, str]] = []
        while self.at_word("for"):
            self.advance()
            var = self.peek()
            if var.kind != "var":
                raise self.fail(var, "expected a variable after 'for'")
            self.advance()
            self.eat_word("in")
            domain = self.peek()
            if domain.kind != "symbol":
                raise self.fail(domain, "expected a domain name after 'in'")
            self.advance()
            binders.append((var.text, domain.text))
        return PrefPattern(atom, tuple(binders))

    def parse_lexico(self) -> list[str]:
        self.advance()  # #lexico
        self.eat_punct("(")
        names = []
        token = self.peek()
        if token.kind != "symbol":
            raise self.fail(token, "expected a preference level name")
        names.append(self.advance().text)
        while self.at_punct(","):
            self.advance()
            token = self.peek()
            if token.kind != "symbol":
                raise self.fail(token, "expected a preference level name")
            names.append(self.advance().text)
        self.eat_punct(")")
        self.eat_punct(".")
        return names

    # -- program ------------------------------------------------------------

    def skip_statement(self) -> None:
        while not self.at_punct(".") and self.peek().kind != "eof":
            self.advance()
        if self.at_punct("."):
            self.advance()

    def parse_program(self) -> tuple[Program, list[tuple[SourceSpan, str]]]:
        errors: list[tuple[SourceSpan, str]] = []
        domains: list[tuple[str, tuple[Compound, ...]]] = []
        rules: list[Rule] = []
        cards: list[CardinalityRule] = []
        levels: list[PreferenceLevel] = []
        lexico: list[str] | None = None
        while self.peek().kind != "eof":
            token = self.peek()
            try:
                if token.kind == "directive":
                    if token.text == "#domain":
                        domains.append(self.parse_domain())
                    elif token.text == "#pref":
                        levels.append(self.parse_pref())
                    elif token.text == "#lexico":
                        names = self.parse_lexico()
                        if lexico is not None:
                            raise self.fail(token, "duplicate #lexico directive")
                        lexico = names
                    else:
                        raise self.fail(token, f"unknown directive {token.text}")
                elif token.kind == "int":
                    cards.append(self.parse_cardinality())
                else:
                    rules.append(self.parse_rule())
            except _Syntax as err:
                errors.append((err.span, err.message))
                self.skip_statement()

        preference: tuple[PreferenceLevel, ...]
        if lexico is not None:
            by_name = {level.name: level for level in levels}
            ordered = []
            for name in lexico:
                if name not in by_name:
                    errors.append(
                        (
                            SourceSpan(self.file, 1, 1, 1, 1),
                            f"#lexico names undeclared preference level {name}",
                        )
                    )
                else:
                    ordered.append(by_name.pop(name))
            for leftover in by_name:
                errors.append(
                    (
                        SourceSpan(self.file, 1, 1, 1, 1),
                        f"preference level {leftover} missing from #lexico",
                    )
                )
            preference = tuple(ordered)
        else:
            preference = tuple(levels)

        program = Program(tuple(domains), tuple(rules), tuple(cards), preference)
        return program, errors


def parse(text: str, file: str = "<string>") -> Program:
    """Parse program text; raises :class:`ParseError` with spans on failure."""
    tokens, errors = _tokenize(text, file)
    parser = _Parser(tokens, file)
    program, parse_errors = parser.parse_program()
    errors.extend(parse_errors)
    if errors:
        raise ParseError(errors)
    return program


def parse_file(path: str) -> Program:
    with open(path, encoding="utf-8") as handle:
        return parse(handle.read(), file=path)


def parse_query(text: str):
    """A ground query: disjunction (``;``) of conjunctions (``,``) of
    annotated atoms, e.g. ``nurse(pete) : f`` or ``a : t, b : t ; c : f``."""
    tokens, errors = _tokenize(text, "<query>")
    if errors:
        raise ParseError(errors)
    parser = _Parser(tokens, "<query>")
    try:
        branches = []
        while True:
            branch = [parser.parse_annotated_atom()]
            while parser.at_punct(","):
                parser.advance()
                branch.append(parser.parse_annotated_atom())
            branches.append(tuple(branch))
            if not parser.at_punct(";"):
                break
            parser.advance()
        token = parser.peek()
        if token.kind != "eof":
            raise parser.fail(token, "trailing input after query")
    except _Syntax as err:
        raise ParseError([(err.span, err.message)]) from None
    return tuple(branches)


# ---------------------------------------------------------------------------
# Rendering


def render_term(term: Term) -> str:
    return str(term)


def render_atom(atom: AnnotatedAtom) -> str:
    return f"{atom.pred} : {atom.ann}"


def _render_head_atom(item: HeadAtom) -> str:
    if isinstance(item, Eneg):
        return f"~ ({render_atom(item.atom)})"
    return render_atom(item)


def _render_head_item(item: HeadItem) -> str:
    if isinstance(item, HeadImplication):
        left = " ; ".join(_render_head_atom(c) for c in item.conclusions)
        right = ", ".join(_render_head_atom(p) for p in item.premises)
        return f"({left} <~ {right})"
    return _render_head_atom(item)


def render_body_literal(lit: Literal | Builtin) -> str:
    if isinstance(lit, Builtin):
        return f"{lit.lhs} {lit.op} {lit.rhs}"
    text = _render_head_atom(lit.atom)
    return f"not {text}" if lit.negated else text


def render_rule(rule: Rule) -> str:
    head = " ; ".join(_render_head_item(item) for item in rule.head)
    if not rule.body:
        return f"{head}."
    body = ", ".join(render_body_literal(lit) for lit in rule.body)
    return f"{head} :- {body}." if head else f":- {body}."


def render_cardinality(card: CardinalityRule) -> str:
    parts = [f"{card.count} {{ {render_atom(card.element)}"]
    if card.condition != ((),):
        branches = []
        for branch in card.condition:
            branches.append(
                ", ".join(
                    render_atom(item) if isinstance(item, AnnotatedAtom) else str(item)
                    for item in branch
                )
            )
        parts.append(f" : {' or '.join(branches)}")
    parts.append(f" }} {card.count}")
    if card.guard:
        parts.append(" :- " + ", ".join(render_body_literal(lit) for lit in card.guard))
    if not card.with_closure:
        parts.append(" #noclosure")
    parts.append(".")
    return "".join(parts)


def render(program: Program) -> str:
    """Canonical text; the inverse of :func:`parse` on desugared programs."""
    if not is_desugared(program):
        program = desugar(program)
    lines: list[str] = []
    for name, constants in program.domains:
        lines.append(f"#domain {name} = {{{', '.join(str(c) for c in constants)}}}.")
    for rule in program.rules:
        lines.append(render_rule(rule))
    for card in program.cardinalities:
        lines.append(render_cardinality(card))
    for level in program.preference:
        patterns = []
        for pattern in level.patterns:
            text = render_atom(pattern.atom)
            for var, domain in pattern.binders:
                text += f" for {var} in {domain}"
            patterns.append(text)
        lines.append(f"#pref {level.name} subset {{ {', '.join(patterns)} }}.")
    if program.preference:
        names = ", ".join(level.name for level in program.preference)
        lines.append(f"#lexico ({names}).")
    return "\n".join(lines) + ("\n" if lines else "")
