"""Ground evaluation of event-calculus programs over a finite timeline.

Given every event occurrence as a (event, rational time) pair, the value of
each fluent at each time follows from the effect clauses by direct
chronological evaluation: no resolution, no constraint store.  This is an
independent check on the engine, used to certify its answers.

Effect, trajectory and trigger bodies may use arithmetic constraints,
``holdsAt`` in its 2, 3 and 4 argument forms, ``not_holdsAt/2,3``,
``happens/2`` and ``not_happens/2``.  ``can_*`` gating rules are ignored:
the occurrence set already says which events happen.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator

from .terms import Constraint, ModelProgram, Struct, Var, format_term, is_ground


class OracleError(Exception):
    """The program or query is outside what the oracle evaluates."""


_RELS = {
    "=": lambda d: d == 0,
    "!=": lambda d: d != 0,
    "<": lambda d: d < 0,
    "<=": lambda d: d <= 0,
    ">": lambda d: d > 0,
    ">=": lambda d: d >= 0,
}


# -- substitutions -------------------------------------------------------------------


def _walk(t, s: dict):
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def _inst(t, s: dict):
    t = _walk(t, s)
    if isinstance(t, Struct) and t.args:
        return Struct(t.functor, tuple(_inst(a, s) for a in t.args))
    return t


def _match(pattern, value, s: dict) -> dict | None:
    """Extend ``s`` so that ``pattern`` equals ``value`` (which may hold
    variables too); plain syntactic unification without occurs check."""
    pattern = _walk(pattern, s)
    value = _walk(value, s)
    if isinstance(pattern, Var):
        if pattern is value:
            return s
        return {**s, pattern: value}
    if isinstance(value, Var):
        return {**s, value: pattern}
    if isinstance(pattern, Struct) and isinstance(value, Struct):
        if pattern.functor != value.functor or len(pattern.args) != len(value.args):
            return None
        for a, b in zip(pattern.args, value.args):
            s = _match(a, b, s)
            if s is None:
                return None
        return s
    if isinstance(pattern, Fraction) and isinstance(value, Fraction):
        return s if pattern == value else None
    return s if pattern == value else None


def _linear(t, s: dict) -> tuple[dict, Fraction]:
    """``t`` under ``s`` as (coefficients of unbound variables, constant)."""
    t = _walk(t, s)
    if isinstance(t, Fraction):
        return {}, t
    if isinstance(t, int):
        return {}, Fraction(t)
    if isinstance(t, Var):
        return {t: Fraction(1)}, Fraction(0)
    if isinstance(t, Struct) and t.functor == "neg":
        c, k = _linear(t.args[0], s)
        return {v: -a for v, a in c.items()}, -k
    if isinstance(t, Struct) and t.functor in ("+", "-") and len(t.args) == 2:
        c1, k1 = _linear(t.args[0], s)
        c2, k2 = _linear(t.args[1], s)
        sign = 1 if t.functor == "+" else -1
        out = dict(c1)
        for v, a in c2.items():
            out[v] = out.get(v, 0) + sign * a
        return {v: a for v, a in out.items() if a != 0}, k1 + sign * k2
    if isinstance(t, Struct) and t.functor in ("*", "/") and len(t.args) == 2:
        c1, k1 = _linear(t.args[0], s)
        c2, k2 = _linear(t.args[1], s)
        if t.functor == "/":
            if c2 or k2 == 0:
                raise OracleError(f"cannot divide by {format_term(_inst(t.args[1], s))}")
            return {v: a / k2 for v, a in c1.items()}, k1 / k2
        if c1 and c2:
            raise OracleError(f"nonlinear product {format_term(_inst(t, s))}")
        if c1:
            return {v: a * k2 for v, a in c1.items() if a * k2 != 0}, k1 * k2
        return {v: a * k1 for v, a in c2.items() if a * k1 != 0}, k1 * k2
    raise OracleError(f"non-numeric term {format_term(t)} in arithmetic")


def _number(t, s: dict) -> Fraction | None:
    coeffs, const = _linear(t, s)
    return None if coeffs else const


# -- the oracle ----------------------------------------------------------------------


class GroundOracle:
    def __init__(self, program: ModelProgram, occurrences: Iterable):
        self.program = program
        self.occurrences = sorted(
            ((Fraction(t), e) for e, t in occurrences), key=lambda p: (p[0], format_term(p[1]))
        )
        for t, e in self.occurrences:
            if not is_ground(e):
                raise OracleError(f"occurrence {format_term(e)} at {t} is not ground")
        groups: dict = {}
        for c in program.clauses:
            groups.setdefault(c.key, []).append(c)
        self.groups = groups
        self._fluents_at: dict = {}
        self._initiated: dict = {}

    def clauses(self, name: str, arity: int) -> list:
        return self.groups.get((name, arity), [])

    def is_fluent(self, t) -> bool:
        return isinstance(t, Struct) and any(_match(p, t, {}) is not None for p in self.program.fluents)

    # -- effects of one occurrence --------------------------------------------------

    def initiated(self, event, t: Fraction) -> list:
        """Ground fluents the occurrence (event, t) initiates."""
        key = (event, t)
        if key not in self._initiated:
            out: list = []
            for c in self.clauses("initiates", 3):
                s = _match(c.head.args[0], event, {})
                if s is None:
                    continue
                s = _match(c.head.args[2], t, s)
                if s is None:
                    continue
                for s2 in self.solve(list(c.body), s):
                    f = _inst(c.head.args[1], s2)
                    if not is_ground(f):
                        raise OracleError(f"initiates derives non-ground {format_term(f)}")
                    if f not in out:
                        out.append(f)
            self._initiated[key] = out
        return self._initiated[key]

    def _affects(self, name: str, event, fluent, t: Fraction) -> bool:
        for c in self.clauses(name, 3):
            s = _match(c.head.args[0], event, {})
            if s is None:
                continue
            s = _match(c.head.args[1], fluent, s)
            if s is None:
                continue
            s = _match(c.head.args[2], t, s)
            if s is None:
                continue
            for _ in self.solve(list(c.body), s):
                return True
        return False

    def stopped(self, fluent, t1: Fraction, t2: Fraction) -> bool:
        """Some occurrence strictly inside (t1, t2) terminates or releases ``fluent``."""
        for t, e in self.occurrences:
            if t <= t1:
                continue
            if t >= t2:
                break
            if self._affects("terminates", e, fluent, t) or self._affects("releases", e, fluent, t):
                return True
        return False

    def started(self, fluent, t1: Fraction, t2: Fraction) -> bool:
        """Some occurrence strictly inside (t1, t2) initiates or releases ``fluent``."""
        for t, e in self.occurrences:
            if t <= t1:
                continue
            if t >= t2:
                break
            if fluent in self.initiated(e, t) or self._affects("releases", e, fluent, t):
                return True
        return False

    def initiations(self, t: Fraction) -> Iterator[tuple]:
        """(time, fluent) for every initiation strictly between 0 and ``t``."""
        for t1, e in self.occurrences:
            if t1 >= t:
                break
            if t1 <= 0:
                continue
            for f in self.initiated(e, t1):
                yield t1, f

    def trajectory_values(self, control, t1: Fraction, t2: Fraction) -> list:
        out = []
        for c in self.clauses("trajectory", 4):
            s = _match(c.head.args[0], control, {})
            if s is None:
                continue
            s = _match(c.head.args[1], t1, s)
            s = s if s is None else _match(c.head.args[3], t2, s)
            if s is None:
                continue
            for s2 in self.solve(list(c.body), s):
                f = _inst(c.head.args[2], s2)
                if not is_ground(f):
                    raise OracleError(f"trajectory derives non-ground {format_term(f)}")
                out.append(f)
        return out

    def fluents_at(self, t: Fraction) -> list:
        """Every ground fluent holding at ``t``."""
        t = Fraction(t)
        if t in self._fluents_at:
            return self._fluents_at[t]
        out: list = []

        def add(f):
            if f not in out:
                out.append(f)

        if t > 0:
            for c in self.clauses("initiallyP", 1):
                f = c.head.args[0]
                if not is_ground(f):
                    raise OracleError(f"initiallyP({format_term(f)}) is not ground")
                if not self.stopped(f, Fraction(0), t):
                    add(f)
            for t1, f in self.initiations(t):
                if self.stopped(f, t1, t):
                    continue
                add(f)
                for f2 in self.trajectory_values(f, t1, t):
                    add(f2)
        self._fluents_at[t] = out
        return out

    # -- the holdsAt family ----------------------------------------------------------

    def _time(self, t, s: dict) -> Fraction:
        value = _number(t, s)
        if value is None:
            raise OracleError(f"time {format_term(_inst(t, s))} is not fixed")
        return value

    def holds_at(self, f, t, s: dict) -> Iterator[dict]:
        for g in self.fluents_at(self._time(t, s)):
            s2 = _match(f, g, s)
            if s2 is not None:
                yield s2

    def holds_via(self, f2, t, control, s: dict, duration=None) -> Iterator[dict]:
        """``f2`` at ``t`` through a trajectory of an active ``control``."""
        t2 = self._time(t, s)
        for t1, f1 in self.initiations(t2):
            s1 = _match(control, f1, s)
            if s1 is None or self.stopped(f1, t1, t2):
                continue
            if duration is not None:
                s1 = self._bind_number(duration, t2 - t1, s1)
                if s1 is None:
                    continue
            for g in self.trajectory_values(f1, t1, t2):
                s3 = _match(f2, g, s1)
                if s3 is not None:
                    yield s3

    def holds_after(self, f, t, duration, s: dict, event=None) -> Iterator[dict]:
        """``f`` initiated exactly ``duration`` before ``t`` and not stopped since."""
        t2 = self._time(t, s)
        d = _number(duration, s)
        if d is not None and d <= 0:
            raise OracleError("durations must be positive")
        for t1, e in self.occurrences:
            if t1 >= t2:
                break
            if t1 <= 0:
                continue
            s1 = s if event is None else _match(event, e, s)
            if s1 is None:
                continue
            s1 = self._bind_number(duration, t2 - t1, s1)
            if s1 is None:
                continue
            for g in self.initiated(e, t1):
                s2 = _match(f, g, s1)
                if s2 is not None and not self.stopped(g, t1, t2):
                    yield s2

    def not_holds_after(self, f, t, duration, s: dict) -> bool:
        """``f`` terminated exactly ``duration`` before ``t`` and not started since."""
        t2 = self._time(t, s)
        d = _number(duration, s)
        if d is None or d <= 0:
            raise OracleError("not_holdsAt/3 needs a fixed positive duration")
        t1 = t2 - d
        g = _inst(f, s)
        if not is_ground(g):
            raise OracleError(f"not_holdsAt/3 on non-ground {format_term(g)}")
        for t0, e in self.occurrences:
            if t0 == t1 and t1 > 0 and self._affects("terminates", e, g, t1):
                return not self.started(g, t1, t2)
        return False

    def _bind_number(self, t, value: Fraction, s: dict) -> dict | None:
        coeffs, const = _linear(t, s)
        if not coeffs:
            return s if const == value else None
        if len(coeffs) != 1:
            return None
        (v, a), = coeffs.items()
        return {**s, v: (value - const) / a}

    # -- bodies ----------------------------------------------------------------------

    def solve(self, goals: list, s: dict) -> Iterator[dict]:
        """All extensions of ``s`` satisfying ``goals``.  Constraints wait
        until they are decidable or solvable for a single variable."""
        return self._solve(list(goals), s)

    def _solve(self, goals: list, s: dict) -> Iterator[dict]:
        if not goals:
            yield s
            return
        for i, g in enumerate(goals):
            if isinstance(g, Constraint):
                coeffs, const = _linear(Struct("-", (g.lhs, g.rhs)), s)
                if not coeffs:
                    if _RELS[g.rel](const):
                        yield from self._solve(goals[:i] + goals[i + 1:], s)
                    return
                if g.rel == "=" and len(coeffs) == 1:
                    (v, a), = coeffs.items()
                    yield from self._solve(goals[:i] + goals[i + 1:], {**s, v: -const / a})
                    return
                continue
            rest = goals[:i] + goals[i + 1:]
            for s2 in self.literal(g, s):
                yield from self._solve(rest, s2)
            return
        raise OracleError(
            "constraints never become decidable: " + ", ".join(format_term(_inst(g, s)) for g in goals)
        )

    def literal(self, g, s: dict) -> Iterator[dict]:
        g = _walk(g, s)
        if not isinstance(g, Struct):
            raise OracleError(f"cannot evaluate {format_term(g)}")
        name, args = g.functor, g.args
        if name == "holdsAt" and len(args) == 2:
            yield from self.holds_at(args[0], args[1], s)
        elif name == "holdsAt" and len(args) == 3:
            third = _inst(args[2], s)
            if self.is_fluent(third):
                yield from self.holds_via(args[0], args[1], third, s)
            else:
                yield from self.holds_after(args[0], args[1], args[2], s)
        elif name == "holdsAt" and len(args) == 4:
            third = _inst(args[2], s)
            if self.is_fluent(third):
                yield from self.holds_via(args[0], args[1], third, s, duration=args[3])
            else:
                yield from self.holds_after(args[0], args[1], args[2], s, event=args[3])
        elif name == "not_holdsAt" and len(args) == 2:
            if next(self.holds_at(args[0], args[1], s), None) is None:
                yield s
        elif name == "not_holdsAt" and len(args) == 3:
            if self.not_holds_after(args[0], args[1], args[2], s):
                yield s
        elif name == "happens" and len(args) == 2:
            for t, e in self.occurrences:
                s2 = _match(args[0], e, s)
                if s2 is not None:
                    s2 = self._bind_number(args[1], t, s2)
                    if s2 is not None:
                        yield s2
        elif name == "not_happens" and len(args) == 2:
            if next(self.literal(Struct("happens", args), s), None) is None:
                yield s
        elif name == "not_stoppedIn" and len(args) == 3:
            f = _inst(args[1], s)
            if not self.stopped(f, self._time(args[0], s), self._time(args[2], s)):
                yield s
        elif name == "not_startedIn" and len(args) == 3:
            f = _inst(args[1], s)
            if not self.started(f, self._time(args[0], s), self._time(args[2], s)):
                yield s
        else:
            raise OracleError(f"the oracle does not evaluate {name}/{len(args)}")

    def holds(self, goals, bindings: dict | None = None) -> bool:
        """Whether the conjunction ``goals`` has a solution."""
        return next(self._solve(list(goals), dict(bindings or {})), None) is not None

    def triggered(self, event, t: Fraction) -> bool:
        """Whether some non-fact ``happens`` rule derives (event, t)."""
        for c in self.clauses("happens", 2):
            if not c.body:
                continue
            s = _match(c.head.args[0], event, {})
            if s is None:
                continue
            s = self._bind_number(c.head.args[1], Fraction(t), s)
            if s is not None and self.holds(c.body, s):
                return True
        return False


def narrative_occurrences(program: ModelProgram) -> list:
    """The ground ``happens`` facts of a program as (event, time) pairs."""
    out = []
    for c in program.clauses:
        if c.key == ("happens", 2) and not c.body and is_ground(c.head):
            out.append((c.head.args[0], Fraction(c.head.args[1])))
    return out


def check_ground(program: ModelProgram, occurrences: Iterable, query: tuple) -> bool:
    """Whether fluent ``query[0]`` holds at time ``query[1]`` on the timeline."""
    fluent, t = query
    return GroundOracle(program, occurrences).holds([Struct("holdsAt", (fluent, Fraction(t)))])
