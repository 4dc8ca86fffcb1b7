"""Terms, clauses and programs of the event-calculus surface language."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .constraints import format_rational

_ids = itertools.count()


class Var:
    """A logic variable.  Identity-compared; ``id`` gives creation order."""

    __slots__ = ("name", "id")

    def __init__(self, name: str = "_"):
        self.name = name
        self.id = next(_ids)

    def __repr__(self):
        return f"Var({self.name}#{self.id})"


class Struct:
    """A compound term ``functor(args...)``; atoms have no arguments."""

    __slots__ = ("functor", "args", "_hash")

    def __init__(self, functor: str, args: tuple = ()):
        self.functor = functor
        self.args = tuple(args)
        self._hash = None

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> tuple:
        return (self.functor, len(self.args))

    def __eq__(self, other):
        return (
            isinstance(other, Struct)
            and self.functor == other.functor
            and self.args == other.args
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.functor, self.args))
        return self._hash

    def __repr__(self):
        return format_term(self)


def atom(name: str) -> Struct:
    return Struct(name, ())


ARITH_OPS = {"+", "-", "*", "/", "neg"}

SURFACE_REL = {"=": ".=.", "!=": ".<>.", "<": ".<.", "<=": ".=<.", ">=": ".>=.", ">": ".>."}


@dataclass
class Constraint:
    """Arithmetic constraint literal ``lhs rel rhs`` (sides are terms)."""

    rel: str
    lhs: object
    rhs: object


@dataclass
class Directive:
    name: str
    args: tuple


@dataclass
class Clause:
    head: Struct
    body: tuple = ()

    @property
    def key(self) -> tuple:
        return self.head.key


@dataclass
class Query:
    goals: tuple
    directives: tuple = ()

    def directive(self, name: str):
        for d in self.directives:
            if d.name == name:
                return d
        return None


@dataclass(eq=False)
class ModelProgram:
    fluents: list = field(default_factory=list)
    events: list = field(default_factory=list)
    incr_events: list = field(default_factory=list)
    clauses: list = field(default_factory=list)
    queries: list = field(default_factory=list)

    def rules(self, name: str, arity: int) -> list:
        return [c for c in self.clauses if c.head.functor == name and c.head.arity == arity]

    @property
    def rule_groups(self) -> dict:
        groups: dict = {}
        for c in self.clauses:
            groups.setdefault(c.key, []).append(c)
        return groups

    @property
    def initially(self) -> list:
        return [c for c in self.clauses if c.head.functor in ("initiallyP", "initiallyN")]

    def merged(self, other: "ModelProgram") -> "ModelProgram":
        return ModelProgram(
            self.fluents + other.fluents,
            self.events + other.events,
            self.incr_events + other.incr_events,
            self.clauses + other.clauses,
            self.queries + other.queries,
        )

    def __eq__(self, other):
        if not isinstance(other, ModelProgram):
            return NotImplemented
        from .surface import canonical_text

        return canonical_text(self) == canonical_text(other)


# -- helpers -------------------------------------------------------------------


def term_vars(t, out=None) -> list:
    """Variables of a term (or constraint) in first-occurrence order."""
    if out is None:
        out = []
    if isinstance(t, Var):
        if not any(t is v for v in out):
            out.append(t)
    elif isinstance(t, Struct):
        for a in t.args:
            term_vars(a, out)
    elif isinstance(t, Constraint):
        term_vars(t.lhs, out)
        term_vars(t.rhs, out)
    return out


def is_ground(t) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Struct):
        return all(is_ground(a) for a in t.args)
    return True


def format_term(t, name=None) -> str:
    """Render a term in surface syntax."""
    if isinstance(t, Var):
        return name(t) if name else t.name
    if isinstance(t, Fraction):
        return format_rational(t)
    if isinstance(t, int):
        return str(t)
    if isinstance(t, Struct):
        if t.functor in ARITH_OPS and t.args:
            return format_expr(t, name)
        if not t.args:
            return t.functor
        return f"{t.functor}({', '.join(format_term(a, name) for a in t.args)})"
    if isinstance(t, Constraint):
        return f"{format_expr(t.lhs, name)} {SURFACE_REL[t.rel]} {format_expr(t.rhs, name)}"
    return str(t)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3}


def format_expr(t, name=None, parent: int = 0, right: bool = False) -> str:
    if isinstance(t, Struct) and t.functor in ARITH_OPS and t.args:
        prec = _PREC[t.functor]
        if t.functor == "neg":
            text = f"-{format_expr(t.args[0], name, prec)}"
        else:
            lhs = format_expr(t.args[0], name, prec)
            rhs = format_expr(t.args[1], name, prec, right=True)
            text = f"{lhs} {t.functor} {rhs}"
        if prec < parent or (prec == parent and right):
            return f"({text})"
        return text
    if isinstance(t, Fraction):
        text = format_rational(t)
        if (t < 0 or "/" in text) and parent:
            return f"({text})"
        return text
    return format_term(t, name)
