"""Parser and pretty-printer for the event-calculus surface language."""

from __future__ import annotations

import re
from fractions import Fraction
from pathlib import Path

from .terms import (
    ARITH_OPS,
    Clause,
    Constraint,
    Directive,
    ModelProgram,
    Query,
    Struct,
    Var,
    format_term,
    term_vars,
)

NEGATED_BUILTINS = {
    ("not_stoppedIn", 3),
    ("not_startedIn", 3),
    ("not_holdsAt", 2),
    ("not_holdsAt", 3),
    ("not_happens", 2),
}

DIRECTIVES = {"incr_max_time": 1}

RESERVED_HEADS = {"holdsAt", "stoppedIn", "startedIn", "incr_happens"}

DECLARATIONS = {"fluent": "fluents", "event": "events", "incr_event": "incr_events"}

_REL = {".=.": "=", ".<>.": "!=", ".<.": "<", ".=<.": "<=", ".>=.": ">=", ".>.": ">"}


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0, token: str = ""):
        where = f"line {line}, column {column}"
        shown = f" near {token!r}" if token else ""
        super().__init__(f"{where}: {message}{shown}")
        self.message = message
        self.line = line
        self.column = column
        self.token = token


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<rel>\.=<\.|\.>=\.|\.<>\.|\.=\.|\.<\.|\.>\.)
  | (?P<num>\d+\.\d+|\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<punct>:-|\?-|[().,!+\-*/])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError("unexpected character", line, pos - line_start + 1, text[pos])
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, allow_reserved: bool = False):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allow_reserved = allow_reserved
        self.scope: dict = {}

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.col, tok.text or "<end of input>")

    def accept(self, text) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    # -- top level ------------------------------------------------------------

    def program(self) -> ModelProgram:
        prog = ModelProgram()
        while self.tok.kind != "eof":
            self.scope = {}
            if self.tok.text == "?-":
                prog.queries.append(self.query(require_dot=True))
                continue
            if self.tok.text == "!":
                self.error("directives are only allowed inside queries")
            start = self.tok
            head = self.term()
            if not isinstance(head, Struct) or head.functor in ARITH_OPS:
                self.error("clause head must be an atom or compound term", start)
            reserved = head.functor.startswith("not_") or head.functor in RESERVED_HEADS
            if reserved and not self.allow_reserved:
                self.error(f"{head.functor}/{head.arity} cannot be redefined", start)
            body = ()
            if self.accept(":-"):
                body = self.body()
            self.expect(".")
            decl = DECLARATIONS.get(head.functor)
            if decl and head.arity == 1:
                if body:
                    self.error("declarations must be facts", start)
                getattr(prog, decl).append(head.args[0])
            else:
                prog.clauses.append(Clause(head, tuple(body)))
        return prog

    def query(self, require_dot: bool) -> Query:
        self.expect("?-")
        goals = []
        directives = []
        if self.tok.kind == "eof" or self.tok.text == ".":
            self.error("empty query")
        while True:
            if self.accept("!"):
                directives.append(self.directive())
            else:
                goals.append(self.literal())
            if not self.accept(","):
                break
        if require_dot:
            self.expect(".")
        else:
            self.accept(".")
        return Query(tuple(goals), tuple(directives))

    def directive(self) -> Directive:
        tok = self.tok
        if tok.kind != "name":
            self.error("expected directive name")
        term = self.term()
        if not isinstance(term, Struct):
            self.error("malformed directive", tok)
        arity = DIRECTIVES.get(term.functor)
        if arity is None:
            self.error(f"unknown directive {term.functor}", tok)
        if arity != term.arity:
            self.error(f"directive {term.functor} takes {arity} argument(s)", tok)
        return Directive(term.functor, term.args)

    def body(self) -> list:
        lits = [self.literal()]
        while self.accept(","):
            lits.append(self.literal())
        return lits

    def literal(self):
        start = self.tok
        if start.text == "!":
            self.error("directives are only allowed inside queries")
        lhs = self.expr()
        if self.tok.kind == "rel":
            rel = _REL[self.tok.text]
            self.i += 1
            rhs = self.expr()
            c = Constraint(rel, lhs, rhs)
            self.check_linear(c.lhs, start)
            self.check_linear(c.rhs, start)
            return c
        if not isinstance(lhs, Struct) or lhs.functor in ARITH_OPS:
            self.error("expected a goal or a constraint", start)
        if lhs.functor.startswith("not_") and lhs.key not in NEGATED_BUILTINS and not self.allow_reserved:
            self.error(f"unsupported negated predicate {lhs.functor}/{lhs.arity}", start)
        self.check_args(lhs, start)
        return lhs

    # -- terms and expressions ------------------------------------------------

    def expr(self):
        node = self.product()
        while self.tok.text in ("+", "-") and self.tok.kind == "punct":
            op = self.tok.text
            self.i += 1
            node = _fold(Struct(op, (node, self.product())))
        return node

    def product(self):
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "punct":
            op_tok = self.tok
            self.i += 1
            rhs = self.unary()
            if op_tok.text == "*" and not _constant(node) and not _constant(rhs):
                self.error("nonlinear arithmetic: product of two variable terms", op_tok)
            if op_tok.text == "/":
                if not _constant(rhs):
                    self.error("nonlinear arithmetic: division by a variable term", op_tok)
                if _fold(rhs) == 0:
                    self.error("division by zero", op_tok)
            node = _fold(Struct(op_tok.text, (node, rhs)))
        return node

    def unary(self):
        if self.tok.text == "-" and self.tok.kind == "punct":
            self.i += 1
            return _fold(Struct("neg", (self.unary(),)))
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Fraction(tok.text)
        if tok.kind == "var":
            self.i += 1
            if tok.text == "_":
                return Var("_")
            var = self.scope.get(tok.text)
            if var is None:
                var = self.scope[tok.text] = Var(tok.text)
            return var
        if tok.kind == "name":
            self.i += 1
            if self.accept("("):
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                return Struct(tok.text, tuple(args))
            return Struct(tok.text, ())
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("unexpected token")

    def term(self):
        start = self.tok
        t = self.expr()
        self.check_args(t, start)
        return t

    def check_args(self, t, tok):
        """Arithmetic is only allowed inside constraints."""
        if isinstance(t, Struct):
            if t.functor in ARITH_OPS and t.args:
                self.error("arithmetic outside a constraint", tok)
            for a in t.args:
                self.check_args(a, tok)

    def check_linear(self, t, tok):
        if isinstance(t, Struct) and t.functor not in ARITH_OPS:
            self.error(f"non-numeric term {t.functor} inside a constraint", tok)


def _constant(t) -> bool:
    return isinstance(_fold(t), Fraction)


def _fold(t):
    """Fold constant sub-expressions into exact rationals."""
    if not isinstance(t, Struct) or t.functor not in ARITH_OPS or not t.args:
        return t
    args = t.args
    if not all(isinstance(a, Fraction) for a in args):
        return t
    if t.functor == "neg":
        return -args[0]
    a, b = args
    if t.functor == "+":
        return a + b
    if t.functor == "-":
        return a - b
    if t.functor == "*":
        return a * b
    if b == 0:
        return t
    return a / b


# -- public interface -----------------------------------------------------------


def parse_program(text: str, allow_reserved: bool = False) -> ModelProgram:
    prog = _Parser(text, allow_reserved).program()
    if prog.fluents or prog.events:
        check_declarations(prog)
    return prog


def parse_query(text: str) -> Query:
    parser = _Parser(text)
    if parser.tok.text != "?-":
        parser.error("query must start with '?-'")
    q = parser.query(require_dot=False)
    if parser.tok.kind != "eof":
        parser.error("unexpected text after query")
    return q


def parse_goal_text(text: str) -> Query:
    """Accept a query with or without the leading ``?-``."""
    text = text.strip()
    if not text.startswith("?-"):
        text = "?- " + text
    return parse_query(text)


def load_program(paths) -> ModelProgram:
    """Concatenate and parse several model files (domain model + narrative)."""
    parts = [Path(p).read_text(encoding="utf-8") for p in paths]
    return parse_program("\n".join(parts))


_EFFECT_HEADS = {("initiates", 3), ("terminates", 3), ("releases", 3)}


def check_declarations(prog: ModelProgram) -> None:
    """Effect and occurrence heads must mention declared events and fluents."""
    from .unify import matches_pattern

    events = prog.events + prog.incr_events
    for clause in prog.clauses:
        head = clause.head
        if head.key in _EFFECT_HEADS:
            event, fluent = head.args[0], head.args[1]
        elif head.key == ("happens", 2):
            event, fluent = head.args[0], None
        else:
            continue
        if not any(matches_pattern(event, p) for p in events):
            raise ParseError(f"undeclared event {format_term(event)} in {head.functor}/{head.arity}")
        if fluent is not None and not any(matches_pattern(fluent, p) for p in prog.fluents):
            raise ParseError(f"undeclared fluent {format_term(fluent)} in {head.functor}/{head.arity}")


# -- pretty-printing --------------------------------------------------------------


def format_literal(lit, name=None) -> str:
    return format_term(lit, name)


def format_clause(clause: Clause, name=None) -> str:
    head = format_term(clause.head, name)
    if not clause.body:
        return f"{head}."
    body = ",\n    ".join(format_literal(l, name) for l in clause.body)
    return f"{head} :-\n    {body}."


def format_query(query: Query, name=None) -> str:
    items = [f"!{format_term(Struct(d.name, d.args), name)}" for d in query.directives]
    items += [format_literal(g, name) for g in query.goals]
    return f"?- {', '.join(items)}."


def pretty_print(prog: ModelProgram) -> str:
    lines = []
    for kind, items in (("fluent", prog.fluents), ("event", prog.events), ("incr_event", prog.incr_events)):
        for t in items:
            lines.append(f"{kind}({format_term(t)}).")
    for c in prog.clauses:
        lines.append(format_clause(c))
    for q in prog.queries:
        lines.append(format_query(q))
    return "\n".join(lines) + ("\n" if lines else "")


def _alpha_names(items):
    names: dict = {}

    def name(v):
        if v.name == "_":
            return "_"
        key = id(v)
        if key not in names:
            names[key] = f"V{len(names)}"
        return names[key]

    return name


def canonical_text(prog: ModelProgram) -> str:
    """Pretty-printed form with variables renamed per clause."""
    out = []
    for kind, items in (("fluent", prog.fluents), ("event", prog.events), ("incr_event", prog.incr_events)):
        for t in items:
            out.append(f"{kind}({format_term(t, _alpha_names(t))}).")
    for c in prog.clauses:
        out.append(format_clause(c, _alpha_names(c)))
    for q in prog.queries:
        out.append(format_query(q, _alpha_names(q)))
    return "\n".join(out)


def query_variables(query: Query) -> list:
    out = []
    for g in query.goals:
        term_vars(g, out)
    return [v for v in out if v.name != "_"]
