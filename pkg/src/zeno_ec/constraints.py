"""Exact linear constraint store over the rationals.

Constraints are kept in a solved form: equalities become substitutions
``pivot = expression`` and inequalities are stored as ``expr < 0`` or
``expr <= 0`` over the remaining variables.  Satisfiability is decided by
Fourier-Motzkin elimination with strict/non-strict bookkeeping, restricted
to the connected component touched by the newest constraint.

Variables are arbitrary hashable keys.  The order in which a store first
sees a variable is its registration order; it drives pivot choice,
elimination tie-breaks and rendering.
"""

from __future__ import annotations

import re
from math import gcd
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

ZERO = Fraction(0)
ONE = Fraction(1)

RELATIONS = ("=", "!=", "<", "<=", ">=", ">")


class NeedsSplit(Exception):
    """Raised when a disequality reaches the store; callers branch on it."""

    def __init__(self, lower: "Linear", upper: "Linear"):
        super().__init__("disequality requires a case split")
        self.lower = lower
        self.upper = upper


@dataclass(frozen=True)
class Linear:
    """The constraint ``sum(c * v for v, c in coeffs) + const  rel  0``."""

    coeffs: tuple
    const: Fraction
    rel: str

    @staticmethod
    def build(terms: Mapping, const=0, rel: str = "=") -> "Linear":
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        items = tuple((v, Fraction(c)) for v, c in terms.items() if c != 0)
        return Linear(items, Fraction(const), rel)

    @staticmethod
    def compare(lhs, rel: str, rhs) -> "Linear":
        """Build ``lhs rel rhs`` where each side is a variable, a number or a
        ``{var: coeff}`` mapping (the key ``1`` carries a constant)."""
        left, lc = _as_terms(lhs)
        right, rc = _as_terms(rhs)
        terms = dict(left)
        for v, c in right.items():
            terms[v] = terms.get(v, ZERO) - c
        return Linear.build(terms, lc - rc, rel)

    @property
    def variables(self):
        return [v for v, _ in self.coeffs]

    def negated(self) -> list["Linear"]:
        """Disjuncts of the complement (two for an equality)."""
        if self.rel == "=":
            return [Linear(self.coeffs, self.const, "<"), Linear(self.coeffs, self.const, ">")]
        opposite = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "!=": "="}
        return [Linear(self.coeffs, self.const, opposite[self.rel])]

    def holds_at(self, point: Mapping) -> bool:
        value = self.const + sum(c * Fraction(point[v]) for v, c in self.coeffs)
        return _compare_zero(value, self.rel)

    def render(self, name=str) -> str:
        return render_linear(self, name)


def _as_terms(side):
    if isinstance(side, Mapping):
        terms = {k: Fraction(c) for k, c in side.items() if k != 1}
        return terms, Fraction(side.get(1, 0))
    if isinstance(side, (int, Fraction)):
        return {}, Fraction(side)
    return {side: ONE}, ZERO


def _compare_zero(value: Fraction, rel: str) -> bool:
    if rel == "=":
        return value == 0
    if rel == "!=":
        return value != 0
    if rel == "<":
        return value < 0
    if rel == "<=":
        return value <= 0
    if rel == ">":
        return value > 0
    return value >= 0


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?(?:/\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(!=|<=|=<|>=|<|>|=|[-+*()]))")


def parse_linear(text: str) -> Linear:
    """Parse a small textual constraint such as ``"T2 - T1 >= 1/2"``."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse constraint at {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", Fraction(num)))
        elif name is not None:
            tokens.append(("var", name))
        else:
            tokens.append(("op", "<=" if op == "=<" else op))
        pos = m.end()
    rels = [i for i, t in enumerate(tokens) if t[0] == "op" and t[1] in RELATIONS]
    if len(rels) != 1:
        raise ValueError(f"expected exactly one relation in {text!r}")
    i = rels[0]
    left = _ExprReader(tokens[:i]).read()
    right = _ExprReader(tokens[i + 1:]).read()
    return Linear.compare(left, tokens[i][1], right)


class _ExprReader:
    """Recursive descent over ``+ - * ( )`` producing ``{var: coeff, 1: const}``."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def read(self) -> dict:
        out = self.sum()
        if self.i != len(self.tokens):
            raise ValueError("trailing tokens in constraint")
        return out

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def sum(self) -> dict:
        acc = self.product()
        while self.peek() in (("op", "+"), ("op", "-")):
            sign = ONE if self.tokens[self.i][1] == "+" else -ONE
            self.i += 1
            acc = _combine(acc, self.product(), sign)
        return acc

    def product(self) -> dict:
        acc = self.unary()
        while self.peek() == ("op", "*"):
            self.i += 1
            rhs = self.unary()
            if set(acc) <= {1}:
                acc = {k: v * acc.get(1, ZERO) for k, v in rhs.items()}
            elif set(rhs) <= {1}:
                acc = {k: v * rhs.get(1, ZERO) for k, v in acc.items()}
            else:
                raise ValueError("nonlinear product")
        return acc

    def unary(self) -> dict:
        kind, val = self.peek()
        if (kind, val) == ("op", "-"):
            self.i += 1
            return {k: -v for k, v in self.unary().items()}
        if (kind, val) == ("op", "("):
            self.i += 1
            out = self.sum()
            if self.peek() != ("op", ")"):
                raise ValueError("missing )")
            self.i += 1
            return out
        self.i += 1
        if kind == "num":
            return {1: val}
        if kind == "var":
            return {val: ONE}
        raise ValueError(f"unexpected token {val!r}")


def _combine(a: dict, b: dict, sign) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, ZERO) + sign * v
    return out


# -- rendering -------------------------------------------------------------


def format_rational(q) -> str:
    """Exact decimal when the denominator is 2^a * 5^b, otherwise ``p/q``."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{q.numerator}/{q.denominator}"
    digits = max(twos, fives)
    scaled = abs(q.numerator) * (10 ** digits) // q.denominator
    text = str(scaled).rjust(digits + 1, "0")
    sign = "-" if q < 0 else ""
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


_SURFACE = {"=": "=", "!=": "\\=", "<": "<", "<=": "=<", ">": ">", ">=": ">="}
_FLIP = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


def render_linear(c: Linear, name=str) -> str:
    if not c.coeffs:
        return f"{format_rational(c.const)} {_SURFACE[c.rel]} 0"
    rel = c.rel
    coeffs = list(c.coeffs)
    const = c.const
    if len(coeffs) == 1:
        v, a = coeffs[0]
        value = -const / a
        if a < 0:
            rel = _FLIP[rel]
        return f"{name(v)} {_SURFACE[rel]} {format_rational(value)}"
    if coeffs[0][1] < 0:
        coeffs = [(v, -a) for v, a in coeffs]
        const = -const
        rel = _FLIP[rel]
    parts = []
    for i, (v, a) in enumerate(coeffs):
        mag = abs(a)
        body = name(v) if mag == 1 else f"{format_rational(mag)}*{name(v)}"
        if i == 0:
            parts.append(body if a > 0 else f"-{body}")
        else:
            parts.append(f"{'+' if a > 0 else '-'} {body}")
    return f"{' '.join(parts)} {_SURFACE[rel]} {format_rational(-const)}"


# -- internal row helpers ---------------------------------------------------
# A row is (coeffs: dict, const: Fraction, kind) with kind in "<", "<=", "=".


def _substitute(coeffs: dict, const: Fraction, var, expr: tuple):
    """Replace ``var`` by ``expr = (coeffs, const)`` inside a row."""
    a = coeffs.get(var)
    if a is None:
        return coeffs, const
    out = dict(coeffs)
    del out[var]
    ecoeffs, econst = expr
    for v, c in ecoeffs.items():
        nv = out.get(v, ZERO) + a * c
        if nv == 0:
            out.pop(v, None)
        else:
            out[v] = nv
    return out, const + a * econst


def _normalize_ineq(coeffs: dict, const: Fraction, order):
    """Scale a row to coprime integer coefficients, ordered by registration.

    Integer keys hash far faster than fractions, and the scaling is
    positive so the direction of the inequality is preserved.
    """
    den = 1
    for c in coeffs.values():
        d = c.denominator
        if d != 1:
            den = den * d // gcd(den, d)
    g = 0
    ints = {}
    for v, c in coeffs.items():
        n = c.numerator * (den // c.denominator)
        ints[v] = n
        g = gcd(g, n)
    if g != 1:
        ints = {v: n // g for v, n in ints.items()}
    scale = Fraction(den, g)
    if scale != 1:
        const = const * scale
    key = tuple(sorted(ints.items(), key=lambda kv: order(kv[0])))
    return key, const


def _row_linear(key, const, rel) -> "Linear":
    return Linear(tuple((v, Fraction(c)) for v, c in key), const, rel)


def _tighter(const_a, strict_a, const_b, strict_b) -> bool:
    """Is ``e + a (<|<=) 0`` at least as tight as ``e + b (<|<=) 0``?"""
    if const_a != const_b:
        return const_a > const_b
    return strict_a or not strict_b


def _fm_rows(rows, keep, order, trace=None):
    """Eliminate every variable not in ``keep`` from inequality rows.

    ``rows`` maps a normalized coefficient key to ``(const, strict)``.
    Returns the projected rows, or ``None`` when the system is infeasible.
    Variables bounded on one side only are dropped with their rows; the
    rest go cheapest first (fewest new rows, newest variable on ties).
    """
    rows = dict(rows)
    occurs: dict = {}
    counts: dict = {}

    def index(key):
        for v, c in key:
            if v in keep:
                continue
            occurs.setdefault(v, set()).add(key)
            pos, neg = counts.get(v, (0, 0))
            counts[v] = (pos + 1, neg) if c > 0 else (pos, neg + 1)

    def drop(key):
        del rows[key]
        for v, c in key:
            s = occurs.get(v)
            if s is None:
                continue
            s.discard(key)
            pos, neg = counts[v]
            counts[v] = (pos - 1, neg) if c > 0 else (pos, neg - 1)

    def insert(coeffs, const, strict):
        if not coeffs:
            return const < 0 or (const == 0 and not strict)
        key, const = _normalize_ineq(coeffs, const, order)
        old = rows.get(key)
        if old is None:
            rows[key] = (const, strict)
            index(key)
        elif _tighter(const, strict, *old):
            rows[key] = (const, strict)
        return True

    for key in rows:
        index(key)
    while occurs:
        var = None
        for v, (pos, neg) in counts.items():
            if pos == 0 or neg == 0:
                var = v
                break
        if var is None:
            var = min(counts, key=lambda v: (counts[v][0] * counts[v][1], -order(v)))
        keys = occurs.pop(var)
        del counts[var]
        upper, lower = [], []
        for key in keys:
            coeff = dict(key)[var]
            (upper if coeff > 0 else lower).append((key, rows[key], coeff))
        if trace is not None:
            trace.append((var, [(k, v) for k, v, _ in upper + lower]))
        for key in keys:
            drop(key)
        for ukey, (uconst, ustrict), ua in upper:
            for lkey, (lconst, lstrict), la in lower:
                coeffs = {}
                for v, c in ukey:
                    coeffs[v] = c * -la
                for v, c in lkey:
                    coeffs[v] = coeffs.get(v, ZERO) + c * ua
                coeffs = {v: c for v, c in coeffs.items() if c != 0}
                if not insert(coeffs, uconst * -la + lconst * ua, ustrict or lstrict):
                    return None
    return rows


def _add_row(rows, coeffs, const, strict, order) -> bool:
    """Insert an inequality row, keeping only the tightest per direction."""
    if not coeffs:
        return const < 0 or (const == 0 and not strict)
    key, const = _normalize_ineq(coeffs, const, order)
    old = rows.get(key)
    if old is None or _tighter(const, strict, *old):
        rows[key] = (const, strict)
    return True


def _row_value(key, const, point):
    total = const
    for v, c in key:
        total += c * point[v]
    return total


def _satisfied(key, const, strict, point) -> bool:
    total = _row_value(key, const, point)
    return total < 0 or (total == 0 and not strict)


def _interval(var, rows, point):
    """Bounds on ``var`` from ``rows`` with every other variable at ``point``."""
    lo = hi = None
    lo_strict = hi_strict = False
    for key, (const, strict) in rows:
        a = None
        rest = const
        for v, c in key:
            if v is var or v == var:
                a = c
            else:
                rest += c * point[v]
        value = Fraction(-rest) / a
        if a > 0:
            if hi is None or value < hi or (value == hi and strict):
                hi, hi_strict = value, strict
        else:
            if lo is None or value > lo or (value == lo and strict):
                lo, lo_strict = value, strict
    return lo, lo_strict, hi, hi_strict


def _choose(lo, lo_strict, hi, hi_strict, prefer=None):
    """A value inside the interval (small denominators first), or ``None``."""

    def inside(x):
        if lo is not None and (x < lo or (x == lo and lo_strict)):
            return False
        if hi is not None and (x > hi or (x == hi and hi_strict)):
            return False
        return True

    if prefer is not None and inside(prefer):
        return prefer
    if lo is not None and hi is not None:
        if lo > hi or (lo == hi and (lo_strict or hi_strict)):
            return None
        if lo == hi:
            return lo
        mid = (lo + hi) / 2
        whole = Fraction(round(mid))
        return whole if inside(whole) else mid
    if lo is not None:
        return Fraction(lo.__floor__() + 1)
    if hi is not None:
        return Fraction(hi.__ceil__() - 1)
    return ZERO


def _back_substitute(trace, point):
    """Extend ``point`` to the eliminated variables, last eliminated first."""
    for var, rows in reversed(trace):
        lo, lo_strict, hi, hi_strict = _interval(var, rows, point)
        value = _choose(lo, lo_strict, hi, hi_strict, point.get(var))
        if value is None:
            raise AssertionError("back-substitution left the feasible region")
        point[var] = value
    return point


class ConstraintStore:
    """Immutable store; every mutating operation returns a new store."""

    # ``_point`` is a satisfying assignment for every variable occurring in
    # an inequality row.  New rows it already satisfies, or that moving a
    # single variable repairs, need no elimination at all.
    __slots__ = ("_eqs", "_ineqs", "_order", "_next", "failed", "_by_var", "_point")

    def __init__(self):
        self._eqs: dict = {}
        self._ineqs: dict = {}
        self._order: dict = {}
        self._next = 0
        self.failed = False
        self._by_var = None
        self._point: dict = {}

    # -- bookkeeping --------------------------------------------------------

    def _clone(self) -> "ConstraintStore":
        new = ConstraintStore.__new__(ConstraintStore)
        new._eqs = self._eqs
        new._ineqs = self._ineqs
        new._order = self._order
        new._next = self._next
        new.failed = self.failed
        new._by_var = self._by_var
        new._point = self._point
        return new

    def _rank(self, v):
        return self._order.get(v, 1 << 60)

    def __contains__(self, v) -> bool:
        return v in self._order

    @property
    def variables(self) -> list:
        return sorted(self._order, key=self._order.__getitem__)

    @property
    def consistent(self) -> bool:
        return not self.failed

    def register(self, variables: Iterable) -> "ConstraintStore":
        fresh = [v for v in variables if v not in self._order]
        if not fresh:
            return self
        new = self._clone()
        new._order = dict(self._order)
        for v in fresh:
            new._order[v] = new._next
            new._next += 1
        return new

    def _failed(self) -> "ConstraintStore":
        new = self._clone()
        new.failed = True
        return new

    # -- assertion ----------------------------------------------------------

    def _reduce(self, c: Linear):
        coeffs: dict = {}
        const = c.const
        for v, a in c.coeffs:
            rhs = self._eqs.get(v)
            if rhs is None:
                coeffs[v] = coeffs.get(v, ZERO) + a
            else:
                for w, b in rhs[0].items():
                    coeffs[w] = coeffs.get(w, ZERO) + a * b
                const += a * rhs[1]
        return {v: a for v, a in coeffs.items() if a != 0}, const

    def add(self, c: Linear) -> "ConstraintStore":
        if self.failed:
            return self
        if c.rel == "!=":
            raise NeedsSplit(Linear(c.coeffs, c.const, "<"), Linear(c.coeffs, c.const, ">"))
        store = self.register(c.variables)
        coeffs, const = store._reduce(c)
        rel = c.rel
        if rel in (">", ">="):
            coeffs = {v: -a for v, a in coeffs.items()}
            const = -const
            rel = "<" if rel == ">" else "<="
        if not coeffs:
            return store if _compare_zero(const, rel) else store._failed()
        if rel == "=":
            return store._add_equality(coeffs, const)
        return store._add_inequality(coeffs, const, rel == "<")

    def _add_equality(self, coeffs, const) -> "ConstraintStore":
        pivot = max(coeffs, key=self._rank)
        a = coeffs[pivot]
        expr = ({v: -c / a for v, c in coeffs.items() if v != pivot}, -const / a)
        new = self._clone()
        eqs = {}
        for p, (ec, ek) in self._eqs.items():
            eqs[p] = _substitute(ec, ek, pivot, expr)
        eqs[pivot] = expr
        new._eqs = eqs
        hit = self._rows_with(pivot)
        if not hit:
            # the pivot is defined by the others and constrains nothing else
            return new
        ineqs = dict(self._ineqs)
        touched = set(expr[0])
        for key in hit:
            del ineqs[key]
        ok = True
        added = []
        for key in hit:
            k, strict = self._ineqs[key]
            rc, rk = _substitute(dict(key), k, pivot, expr)
            touched.update(rc)
            ok = _add_row(ineqs, rc, rk, strict, new._rank) and ok
            if rc:
                added.append(_normalize_ineq(rc, rk, new._rank)[0])
        new._ineqs = ineqs
        new._by_var = None
        if not ok:
            return self._failed()
        point = self._point
        if all(v in point for v in expr[0]):
            point = dict(point)
            del point[pivot]
            if all(_satisfied(key, *ineqs[key], point) for key in added):
                new._point = point
                return new
        return new if new._refresh_point(touched) else self._failed()

    def _rows_with(self, v) -> list:
        if self._by_var is None:
            self._component_rows(())
        return self._by_var.get(v, [])

    def _add_inequality(self, coeffs, const, strict) -> "ConstraintStore":
        key, const = _normalize_ineq(coeffs, const, self._rank)
        old = self._ineqs.get(key)
        if old is not None and _tighter(old[0], old[1], const, strict):
            return self
        new = self._clone()
        new._ineqs = dict(self._ineqs)
        new._ineqs[key] = (const, strict)
        if old is None and self._by_var is not None:
            by_var = dict(self._by_var)
            for v, _ in key:
                by_var[v] = by_var.get(v, []) + [key]
            new._by_var = by_var
        elif old is None:
            new._by_var = None
        point = self._point
        fresh = [v for v, _ in key if v not in point]
        if not fresh and _satisfied(key, const, strict, point):
            return new
        repaired = new._repair(key, fresh)
        if repaired is not None:
            new._point = repaired
            return new
        return new if new._refresh_point(v for v, _ in key) else self._failed()

    def _repair(self, key, fresh):
        """Move one variable of the new row so every row holds again."""
        point = dict(self._point)
        for v in fresh:
            point[v] = ZERO
        candidates = sorted((v for v, _ in key), key=self._rank, reverse=True)
        if fresh:
            candidates = [v for v in candidates if v in fresh][:1]
        for var in candidates:
            rows = [(k, self._ineqs[k]) for k in self._rows_with(var)]
            lo, lo_strict, hi, hi_strict = _interval(var, rows, point)
            value = _choose(lo, lo_strict, hi, hi_strict)
            if value is not None:
                point[var] = value
                return point
        return None

    def _refresh_point(self, seeds) -> bool:
        """Decide the component of ``seeds`` and rebuild its witness."""
        rows = self._component_rows(seeds)
        trace: list = []
        if _fm_rows(rows, frozenset(), self._rank, trace) is None:
            return False
        point = dict(self._point)
        for key in rows:
            for v, _ in key:
                point.pop(v, None)
        old = self._point
        for var, _ in trace:
            if var in old:
                point[var] = old[var]
        self._point = _back_substitute(trace, point)
        return True

    # -- queries --------------------------------------------------------------

    def _component_rows(self, seeds) -> dict:
        """Inequality rows connected to ``seeds`` through shared variables."""
        by_var = self._by_var
        if by_var is None:
            by_var = {}
            for key in self._ineqs:
                for v, _ in key:
                    by_var.setdefault(v, []).append(key)
            self._by_var = by_var
        seen_vars = set()
        rows = {}
        stack = [v for v in seeds]
        while stack:
            v = stack.pop()
            if v in seen_vars:
                continue
            seen_vars.add(v)
            for key in by_var.get(v, ()):
                if key not in rows:
                    rows[key] = self._ineqs[key]
                    stack.extend(w for w, _ in key if w not in seen_vars)
        return rows

    def entails(self, c: Linear) -> bool:
        if self.failed:
            return True
        if c.rel == "!=":
            return self.add(Linear(c.coeffs, c.const, "=")).failed
        return all(self.add(n).failed for n in c.negated())

    def expression_bounds(self, coeffs: Mapping, const=ZERO):
        """Tightest bounds of a linear expression over the store."""
        store = self.register(coeffs)
        probe = _Probe()
        exact, ek = store._reduce(Linear(tuple(coeffs.items()), Fraction(const), "="))
        if not exact:
            point = Bound(ek, False, True)
            return point, point
        rank = lambda v: -1 if v is probe else store._rank(v)
        rows = store._component_rows(exact)
        rows = {k: v for k, v in rows.items()}
        body = dict(exact)
        body[probe] = -ONE
        for sign in (ONE, -ONE):
            if not _add_row(rows, {v: sign * a for v, a in body.items()}, sign * ek, False, rank):
                raise AssertionError("probe rows are never constant")
        out = _fm_rows(rows, frozenset([probe]), rank)
        lo = hi = Bound(None, False, False)
        for key, (k, strict) in out.items():
            (v, a), = key
            value = -k / a
            if a > 0:
                if not hi.present or value < hi.value or (value == hi.value and strict):
                    hi = Bound(value, strict, True)
            else:
                if not lo.present or value > lo.value or (value == lo.value and strict):
                    lo = Bound(value, strict, True)
        return lo, hi

    def bounds_of(self, v):
        return self.expression_bounds({v: ONE})

    def fixed_value(self, v):
        """The value of ``v`` when an equality pins it directly, else ``None``."""
        rhs = self._eqs.get(v)
        if rhs is not None and not rhs[0]:
            return rhs[1]
        return None

    def value_of(self, v):
        """The unique value of ``v`` if the store pins it, else ``None``."""
        rhs = self._eqs.get(v)
        if rhs is not None and not rhs[0]:
            return rhs[1]
        lo, hi = self.bounds_of(v)
        if lo.present and hi.present and lo.value == hi.value and not lo.strict and not hi.strict:
            return lo.value
        return None

    def project(self, keep: Iterable) -> list[Linear]:
        keep_set = [v for v in keep]
        keep_fs = frozenset(keep_set)
        rank = self._rank
        # equality rows touching the component of the kept variables
        eq_rows = []
        seeds = set(keep_set)
        changed = True
        rows_seen = set()
        while changed:
            changed = False
            for p, (ec, ek) in self._eqs.items():
                if p in rows_seen:
                    continue
                if p in seeds or seeds.intersection(ec):
                    rows_seen.add(p)
                    seeds.add(p)
                    seeds.update(ec)
                    changed = True
        for p in sorted(rows_seen, key=rank):
            ec, ek = self._eqs[p]
            row = {v: -c for v, c in ec.items()}
            row[p] = ONE
            eq_rows.append((row, -ek))
        ineq = self._component_rows(seeds)
        # eliminate non-kept variables through equalities first
        work = list(eq_rows)
        ineq_rows = {k: v for k, v in ineq.items()}
        while True:
            target = None
            for i, (row, k) in enumerate(work):
                outs = [v for v in row if v not in keep_fs]
                if outs:
                    target = (i, max(outs, key=rank))
                    break
            if target is None:
                break
            i, var = target
            row, k = work.pop(i)
            a = row[var]
            expr = ({v: -c / a for v, c in row.items() if v != var}, -k / a)
            work = [_substitute(r, rk, var, expr) for r, rk in work]
            work = [(r, rk) for r, rk in work if r or rk != 0]
            new_rows = {}
            for key, (rk, strict) in ineq_rows.items():
                rc, rk2 = _substitute(dict(key), rk, var, expr)
                if not _add_row(new_rows, rc, rk2, strict, rank):
                    return [Linear((), ONE, "=")]
            ineq_rows = new_rows
        projected = _fm_rows(ineq_rows, keep_fs, rank)
        if projected is None:
            return [Linear((), ONE, "=")]
        return _simplify(work, projected, rank)

    def constraints(self) -> list[Linear]:
        """All stored constraints in solved form."""
        out = []
        for p, (ec, ek) in self._eqs.items():
            row = {v: -c for v, c in ec.items()}
            row[p] = ONE
            out.append(Linear(tuple(sorted(row.items(), key=lambda kv: self._rank(kv[0]))), -ek, "="))
        for key, (k, strict) in self._ineqs.items():
            out.append(_row_linear(key, k, "<" if strict else "<="))
        return out


class _Probe:
    """Fresh variable used to read off expression bounds."""

    __slots__ = ()


@dataclass(frozen=True)
class Bound:
    value: Fraction | None
    strict: bool
    present: bool


def _simplify(eq_rows, ineq_rows, rank) -> list[Linear]:
    """Turn projected rows into a small, canonical constraint list."""
    order_key = lambda kv: rank(kv[0])
    eqs = []
    for row, k in eq_rows:
        if not row:
            continue
        lead = min(row, key=rank)
        a = row[lead]
        norm = tuple(sorted(((v, c / a) for v, c in row.items()), key=order_key))
        eqs.append(Linear(norm, k / a, "="))
    rows = dict(ineq_rows)
    # opposite non-strict pairs collapse into an equality
    for key in list(rows):
        if key not in rows:
            continue
        neg = tuple((v, -c) for v, c in key)
        other = rows.get(neg)
        if other is None:
            continue
        k, strict = rows[key]
        k2, strict2 = other
        if k == -k2 and not strict and not strict2:
            del rows[key]
            del rows[neg]
            lead_sign = key[0][1]
            if lead_sign > 0:
                eqs.append(_row_linear(key, k, "="))
            else:
                eqs.append(_row_linear(neg, k2, "="))
    pinned = {}
    for c in eqs:
        if len(c.coeffs) == 1:
            (v, a), = c.coeffs
            pinned[v] = ({}, -c.const / a)
    if pinned:
        folded = {}
        for key, (k, strict) in rows.items():
            coeffs = dict(key)
            for v in [v for v in coeffs if v in pinned]:
                coeffs, k = _substitute(coeffs, k, v, pinned[v])
            if coeffs:
                _add_row(folded, coeffs, k, strict, rank)
        rows = folded
    ineqs = [_row_linear(key, k, "<" if strict else "<=") for key, (k, strict) in rows.items()]
    # drop inequalities implied by the rest
    kept = list(ineqs)
    for c in list(ineqs):
        others = [d for d in kept if d is not c]
        store = ConstraintStore()
        for d in eqs + others:
            store = store.add(d)
        if store.entails(c):
            kept = others
    out = eqs + kept
    out.sort(key=lambda c: (tuple(rank(v) for v, _ in c.coeffs), _REL_ORDER[c.rel]))
    return [_orient(c) for c in out]


_REL_ORDER = {"=": 0, ">": 1, ">=": 1, "<": 2, "<=": 2, "!=": 3}


def _orient(c: Linear) -> Linear:
    """Express single-variable bounds with a positive coefficient."""
    if len(c.coeffs) == 1:
        (v, a), = c.coeffs
        rel = c.rel if a > 0 else _FLIP[c.rel]
        return Linear(((v, ONE),), c.const / a, rel)
    return c


# -- module-level interface ---------------------------------------------------


def empty_store() -> ConstraintStore:
    return ConstraintStore()


def assert_constraint(store: ConstraintStore, c: Linear) -> ConstraintStore:
    return store.add(c)


def is_satisfiable(store: ConstraintStore) -> bool:
    return not store.failed


def entails(store: ConstraintStore, c: Linear) -> bool:
    return store.entails(c)


def bounds_of(store: ConstraintStore, v):
    return store.bounds_of(v)


def project(store: ConstraintStore, keep: Iterable) -> list[Linear]:
    return store.project(keep)


def store_of(constraints: Iterable) -> ConstraintStore:
    """Build a store from constraints or their textual forms."""
    store = ConstraintStore()
    for c in constraints:
        if isinstance(c, str):
            c = parse_linear(c)
        store = store.add(c)
    return store


def render_set(var_name: str, constraints: Iterable[Linear], name=str) -> str:
    """``Var ~ {c1, c2}`` rendering used in answers."""
    body = ", ".join(render_linear(c, name) for c in constraints)
    return f"{var_name} ~ {{{body}}}"


def sample_point(store: ConstraintStore, variables: Iterable, rng) -> dict:
    """Pick a random satisfying rational assignment for ``variables``."""
    point = {}
    for v in variables:
        lo, hi = store.bounds_of(v)
        value = _pick(lo, hi, rng)
        point[v] = value
        store = store.add(Linear(((v, ONE),), -value, "="))
        if store.failed:
            raise AssertionError("sampled value escaped the projected bounds")
    return point


def _pick(lo: Bound, hi: Bound, rng) -> Fraction:
    if lo.present and hi.present and lo.value == hi.value:
        return lo.value
    frac = Fraction(rng.randint(1, 999), 1000)
    if lo.present and hi.present:
        if not lo.strict and rng.random() < 0.2:
            return lo.value
        if not hi.strict and rng.random() < 0.2:
            return hi.value
        return lo.value + frac * (hi.value - lo.value)
    span = Fraction(rng.randint(1, 50))
    if lo.present:
        if not lo.strict and rng.random() < 0.2:
            return lo.value
        return lo.value + frac * span
    if hi.present:
        if not hi.strict and rng.random() < 0.2:
            return hi.value
        return hi.value - frac * span
    return (frac - Fraction(1, 2)) * span
