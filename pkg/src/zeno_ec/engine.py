"""Goal-directed resolution for event-calculus programs over rationals.

The search is depth-first with chronological backtracking.  Variable
bindings live in a trail-based environment; the linear constraint store
is immutable and threaded through generators, so backtracking over
constraints is free.

Negated built-ins (``not_stoppedIn`` and friends) are handled by
constructive negation: the positive goal is searched for a first
answer, its constraints on the caller's variables are projected out, and
the complement of that projection is explored branch by branch until the
positive goal finitely fails.
"""

from __future__ import annotations

import queue
import sys
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator

from .axioms import AXIOMS
from .constraints import ONE, ZERO, ConstraintStore, Linear, NeedsSplit, render_linear, format_rational
from .surface import parse_program
from .terms import Clause, Constraint, ModelProgram, Query, Struct, Var, format_term, term_vars
from .unify import is_variant, matches_pattern, rename
from .zeno import ZenoChainReport, on_expand_happens

DEFAULT_DEPTH_LIMIT = 2000

_CAN = {
    "initiates": "can_initiates",
    "terminates": "can_terminates",
    "releases": "can_releases",
    "trajectory": "can_trajectory",
}


class EngineError(Exception):
    """A program uses a feature outside the supported fragment."""


class InvalidDuration(EngineError):
    pass


class Halt(Exception):
    """The search stopped before exhausting the answer stream."""


class ZenoHalt(Halt):
    def __init__(self, report: ZenoChainReport):
        super().__init__(report.text)
        self.report = report


class DepthExhausted(Halt):
    def __init__(self, depth: int, goal: str = ""):
        super().__init__(f"depth limit {depth} exceeded at {goal}")
        self.depth = depth
        self.goal = goal


class NegationDepthExceeded(DepthExhausted):
    pass


@dataclass
class SolveOptions:
    zeno_halt: bool = False
    depth_limit: int = DEFAULT_DEPTH_LIMIT
    answer_limit: int | None = None
    incremental_kb: tuple = ()
    # None: ordinary mode.  A rational: incremental events may only be
    # derived from rules strictly after this time (facts come from the KB).
    # "kb": incremental events are answered from the KB alone.
    incr_frontier: object = None
    base_depth: int = 0
    trace: Callable | None = None
    # when set, each search adds its node count under "nodes"
    stats: dict | None = None

    def __post_init__(self):
        if self.depth_limit <= 0:
            raise ValueError("depth_limit must be positive")


class DerivationNode:
    """One resolution step; ``records`` chains the happens/2 expansions."""

    __slots__ = ("goal", "parent", "depth", "records")

    def __init__(self, goal, parent, depth, records):
        self.goal = goal
        self.parent = parent
        self.depth = depth
        self.records = records

    def happens_records(self) -> list:
        """Expansions from the root to here, oldest first."""
        out = []
        r = self.records
        while r is not None:
            out.append(r[0])
            r = r[1]
        out.reverse()
        return out


@dataclass(frozen=True)
class HappensRecord:
    event: object
    time: object
    depth: int
    store: ConstraintStore = field(repr=False, compare=False)


@dataclass
class Answer:
    """Bindings of the query variables plus residual constraints."""

    names: list
    values: dict
    constraints: list
    store: ConstraintStore = field(repr=False)
    variables: dict = field(repr=False)

    def render(self) -> str:
        return render_answer(self)

    def __str__(self):
        return self.render()


def render_answer(ans: Answer) -> str:
    name = _namer(ans.variables)
    parts = []
    grouped: dict = {}
    multi = []
    for c in ans.constraints:
        vs = c.variables
        if len(vs) == 1:
            grouped.setdefault(vs[0], []).append(c)
        else:
            multi.append(c)
    for n in ans.names:
        value = ans.values.get(n)
        if isinstance(value, Var):
            cs = grouped.pop(value, None)
            if cs is None:
                continue
            if len(cs) == 1 and cs[0].rel == "=":
                parts.append(render_linear(cs[0], name))
            else:
                parts.append(f"{n} ~ {{{', '.join(render_linear(c, name) for c in cs)}}}")
        elif value is not None:
            parts.append(f"{n} = {format_term(value, name)}")
    for cs in grouped.values():
        parts.append(f"{{{', '.join(render_linear(c, name) for c in cs)}}}")
    if multi:
        parts.append(f"{{{', '.join(render_linear(c, name) for c in multi)}}}")
    return ", ".join(parts) if parts else "true"


def _namer(variables: dict):
    def name(v):
        n = variables.get(v)
        if n is not None:
            return n
        return f"_G{v.id}" if isinstance(v, Var) else str(v)

    return name


# -- preprocessing ---------------------------------------------------------------


def generate_can_facts(program: ModelProgram) -> ModelProgram:
    """Add ``can_*`` facts for every effect and trajectory clause head."""
    user = [c for c in program.clauses if c.head.functor in _CAN.values()]
    generated: list = []
    for c in program.clauses:
        target = _CAN.get(c.head.functor)
        if target is None or c.head.arity not in (3, 4):
            continue
        head = rename(Struct(target, c.head.args), {})
        if any(_same_pattern(head, u.head) for u in user):
            continue
        if any(_same_pattern(head, g.head) for g in generated):
            continue
        generated.append(Clause(head, ()))
    return ModelProgram(
        list(program.fluents),
        list(program.events),
        list(program.incr_events),
        list(program.clauses) + generated,
        list(program.queries),
    )


def _same_pattern(a: Struct, b: Struct) -> bool:
    """Same predicate and the same event/fluent argument patterns."""
    if a.key != b.key:
        return False
    if a.functor == "can_trajectory":
        pick = lambda s: Struct("p", (s.args[0], s.args[2]))
    else:
        pick = lambda s: Struct("p", (s.args[0], s.args[1]))
    return is_variant(pick(a), pick(b))


# -- compiled clauses ------------------------------------------------------------------


class _Compiled:
    """A clause with a cheap first-argument index."""

    __slots__ = ("clause", "index", "incr_head")

    def __init__(self, clause: Clause):
        self.clause = clause
        self.index = tuple(_principal(a) for a in clause.head.args)
        self.incr_head = False


def _principal(t):
    if isinstance(t, Struct):
        return (t.functor, len(t.args))
    if isinstance(t, Fraction):
        return t
    return None


_AXIOM_PROGRAM = parse_program(AXIOMS, allow_reserved=True)


class Engine:
    """Immutable, preprocessed program ready for querying."""

    def __init__(self, program: ModelProgram, ec_preprocess: bool = True, releases_stop: bool = True):
        from .surface import check_declarations

        check_declarations(program)
        self.source = program
        self.program = generate_can_facts(program) if ec_preprocess else program
        self.releases_stop = releases_stop
        self.fluents = list(program.fluents)
        self.events = list(program.events)
        self.incr_events = list(program.incr_events)
        self.clauses: dict = {}
        for c in self.program.clauses:
            self.clauses.setdefault(c.key, []).append(_Compiled(c))
        for comp in self.clauses.get(("happens", 2), []):
            comp.incr_head = self.is_incr_event(comp.clause.head.args[0])
        axioms: dict = {}
        for c in _AXIOM_PROGRAM.clauses:
            functor = c.head.functor
            if functor.endswith("_released"):
                if not releases_stop:
                    continue
                functor = functor[: -len("_released")]
                c = Clause(Struct(functor, c.head.args), c.body)
            axioms.setdefault((functor, c.head.arity), []).append(_Compiled(c))
        self.axioms = axioms

    def is_fluent(self, t) -> bool:
        return isinstance(t, Struct) and any(matches_pattern(t, p) for p in self.fluents)

    def is_incr_event(self, t) -> bool:
        return isinstance(t, Struct) and any(matches_pattern(t, p) for p in self.incr_events)

    def solve(self, goals, options: SolveOptions | None = None) -> Iterator[Answer]:
        """Stream answers.  The search itself runs in a worker thread with a
        large stack so that deep derivations do not overflow."""
        options = options or SolveOptions()
        if isinstance(goals, Query):
            goals = goals.goals
        return _threaded(lambda: _Search(self, options).answers(tuple(goals)))

    def solve_terms(self, goals, options: SolveOptions | None, terms: tuple) -> Iterator[tuple]:
        """Stream ``terms`` as instantiated by each answer, with variables the
        store pins replaced by their values."""
        options = options or SolveOptions()

        def run():
            search = _Search(self, options)
            root = DerivationNode(None, None, options.base_depth, None)
            try:
                for store in search.solve_goals(tuple(goals), root, ConstraintStore()):
                    yield tuple(search.materialize(t, store) for t in terms)
            finally:
                search.report_stats()

        return _threaded(run)

    def solve_all(self, goals, options: SolveOptions | None = None) -> list:
        return list(self.solve(goals, options))


# -- threaded generator ---------------------------------------------------------------

STACK_SIZE = 1024 * 1024 * 1024


def run_deep(fn):
    """Run ``fn()`` in a thread with a large stack; return or re-raise."""
    out = {}

    def target():
        try:
            out["value"] = fn()
        except BaseException as exc:  # re-raised in the caller
            out["error"] = exc

    t = _deep_thread(target)
    t.join()
    if "error" in out:
        raise out["error"]
    return out.get("value")


def _deep_thread(target) -> threading.Thread:
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 10 ** 7))
    old = threading.stack_size()
    threading.stack_size(STACK_SIZE)
    try:
        t = threading.Thread(target=target, daemon=True)
        t.start()
    finally:
        threading.stack_size(old)
    return t


def _threaded(make_gen) -> Iterator:
    requests: queue.Queue = queue.Queue()
    replies: queue.Queue = queue.Queue()

    def worker():
        gen = None
        try:
            gen = make_gen()
            while True:
                if requests.get() == "stop":
                    gen.close()
                    return
                try:
                    item = next(gen)
                except StopIteration:
                    replies.put(("done", None))
                    return
                replies.put(("item", item))
        except BaseException as exc:
            replies.put(("error", exc))

    started = False
    thread = None
    try:
        thread = _deep_thread(worker)
        started = True
        while True:
            requests.put("next")
            kind, value = replies.get()
            if kind == "item":
                yield value
            elif kind == "done":
                return
            else:
                raise value
    finally:
        if started and thread.is_alive():
            requests.put("stop")
            thread.join()


# -- the search ------------------------------------------------------------------------

# tabled builtins and their time (or duration) argument positions
_TABLED = {
    ("holdsAt", 2): (1,),
    ("holdsAt", 3): (1, 2),
    ("holdsAt", 4): (1, 2),
    ("happens", 2): (1,),
    ("not_holdsAt", 2): (1,),
    ("not_holdsAt", 3): (1, 2),
    ("not_happens", 2): (1,),
    ("not_stoppedIn", 3): (0, 2),
    ("not_startedIn", 3): (0, 2),
}


def _has_slot(c) -> bool:
    if isinstance(c, tuple):
        return c[:1] == ("$",) or any(_has_slot(x) for x in c)
    return False


class _Slot:
    """Placeholder for a variable inside a recorded answer."""

    __slots__ = ("i",)

    def __init__(self, i: int):
        self.i = i


def _fill(t, fresh: list):
    if isinstance(t, _Slot):
        return fresh[t.i]
    if isinstance(t, Struct) and t.args:
        return Struct(t.functor, tuple(_fill(a, fresh) for a in t.args))
    return t


def rename_vars(t, mapping: dict, deref):
    """``t`` with the variables in ``mapping`` replaced."""
    t = deref(t)
    if isinstance(t, Var):
        return mapping.get(t, t)
    if isinstance(t, Struct) and t.args:
        return Struct(t.functor, tuple(rename_vars(a, mapping, deref) for a in t.args))
    return t


def _canonical_projection(store: ConstraintStore, variables: list, index: dict) -> tuple:
    """The store's projection onto ``variables`` in a caller-independent form."""
    if not variables:
        return ()
    if len(variables) == 1:
        lo, hi = store.bounds_of(variables[0])
        return ((index[variables[0]], lo.value, lo.strict, lo.present, hi.value, hi.strict, hi.present),)
    rows = []
    for c in store.project(variables):
        coeffs = sorted((index[v], a) for v, a in c.coeffs)
        lead = abs(coeffs[0][1])
        rel = c.rel
        if coeffs[0][1] < 0:
            rel = _FLIP_REL[rel]
        sign = 1 if coeffs[0][1] > 0 else -1
        rows.append((tuple((i, sign * a / lead) for i, a in coeffs), sign * c.const / lead, rel))
    rows.sort()
    return tuple(rows)


_FLIP_REL = {"=": "=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}



class _Search:
    def __init__(self, engine: Engine, options: SolveOptions):
        self.engine = engine
        self.options = options
        self.bindings: dict = {}
        self.trail: list = []
        self.nodes = 0
        self.limit = options.depth_limit
        self.trace = options.trace
        self.kb = [(ev, Fraction(t)) for ev, t in options.incremental_kb]
        self.frontier = options.incr_frontier
        self.table: dict = {}
        self.negation_table: dict = {}
        self.table_hits = 0
        self.builtins = {
            ("holdsAt", 2): self._holds2,
            ("holdsAt", 3): self._holds3,
            ("holdsAt", 4): self._holds4,
            ("not_holdsAt", 2): self._not_holds2,
            ("not_holdsAt", 3): self._not_holds3,
            ("not_happens", 2): self._not_happens,
            ("not_stoppedIn", 3): self._not_stopped,
            ("not_startedIn", 3): self._not_started,
            ("stoppedIn", 3): self._axiom_call,
            ("startedIn", 3): self._axiom_call,
            ("happens", 2): self._happens,
            ("incr_happens", 2): self._incr_happens,
        }

    # -- environment ------------------------------------------------------------

    def deref(self, t):
        b = self.bindings
        while isinstance(t, Var):
            nxt = b.get(t)
            if nxt is None:
                return t
            t = nxt
        return t

    def resolve(self, t):
        t = self.deref(t)
        if isinstance(t, Struct) and t.args:
            return Struct(t.functor, tuple(self.resolve(a) for a in t.args))
        return t

    def materialize(self, t, store: ConstraintStore):
        t = self.deref(t)
        if isinstance(t, Var):
            value = store.value_of(t) if t in store else None
            return t if value is None else value
        if isinstance(t, Struct) and t.args:
            return Struct(t.functor, tuple(self.materialize(a, store) for a in t.args))
        return t

    def bind(self, v: Var, t):
        self.bindings[v] = t
        self.trail.append(v)

    def undo(self, mark: int):
        trail = self.trail
        b = self.bindings
        while len(trail) > mark:
            del b[trail.pop()]

    def unify(self, a, b, store: ConstraintStore):
        """Unify two terms; returns the (possibly extended) store or None."""
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            x = self.deref(x)
            y = self.deref(y)
            if x is y:
                continue
            if isinstance(x, Var):
                store = self._bind_var(x, y, store)
            elif isinstance(y, Var):
                store = self._bind_var(y, x, store)
            elif isinstance(x, Struct):
                if not isinstance(y, Struct) or x.functor != y.functor or len(x.args) != len(y.args):
                    return None
                stack.extend(zip(x.args, y.args))
                continue
            elif isinstance(x, Fraction):
                if not isinstance(y, Fraction) or x != y:
                    return None
                continue
            else:
                return None
            if store is None:
                return None
        return store

    def _bind_var(self, v: Var, t, store):
        if isinstance(t, Var):
            if v in store or t in store:
                store = store.add(Linear(((v, ONE), (t, -ONE)), ZERO, "="))
                if store.failed:
                    return None
            self.bind(v, t)
            return store
        if isinstance(t, Fraction):
            if v in store:
                store = store.add(Linear(((v, ONE),), -t, "="))
                if store.failed:
                    return None
            self.bind(v, t)
            return store
        if v in store:
            return None
        self.bind(v, t)
        return store

    # -- arithmetic ---------------------------------------------------------------

    def linear(self, t, coeffs: dict, scale: Fraction):
        """Accumulate ``scale * t`` into ``coeffs``; returns the constant part."""
        t = self.deref(t)
        if isinstance(t, Fraction):
            return scale * t
        if isinstance(t, Var):
            coeffs[t] = coeffs.get(t, ZERO) + scale
            return ZERO
        if isinstance(t, Struct):
            f = t.functor
            if f == "+":
                return self.linear(t.args[0], coeffs, scale) + self.linear(t.args[1], coeffs, scale)
            if f == "-":
                return self.linear(t.args[0], coeffs, scale) + self.linear(t.args[1], coeffs, -scale)
            if f == "neg":
                return self.linear(t.args[0], coeffs, -scale)
            if f in ("*", "/"):
                left, right = t.args
                rc: dict = {}
                rk = self.linear(right, rc, ONE)
                rc = {k: v for k, v in rc.items() if v != 0}
                if f == "/":
                    if rc or rk == 0:
                        raise EngineError(f"nonlinear or zero division in {format_term(t)}")
                    return self.linear(left, coeffs, scale / rk)
                if not rc:
                    return self.linear(left, coeffs, scale * rk)
                lc: dict = {}
                lk = self.linear(left, lc, ONE)
                if any(v != 0 for v in lc.values()):
                    raise EngineError(f"nonlinear product in {format_term(t)}")
                for k, v in rc.items():
                    coeffs[k] = coeffs.get(k, ZERO) + scale * lk * v
                return scale * lk * rk
        raise EngineError(f"non-numeric term {format_term(t)} in arithmetic")

    def to_linear(self, c: Constraint) -> Linear:
        coeffs: dict = {}
        const = self.linear(c.lhs, coeffs, ONE) + self.linear(c.rhs, coeffs, -ONE)
        return Linear(tuple((v, a) for v, a in coeffs.items() if a != 0), const, c.rel)

    def post(self, store: ConstraintStore, c: Linear):
        """Yield the stores obtained by adding ``c`` (two for a disequality)."""
        try:
            s = store.add(c)
        except NeedsSplit as split:
            for branch in (split.lower, split.upper):
                s = store.add(branch)
                if not s.failed:
                    yield s
            return
        if not s.failed:
            yield s

    # -- driver ---------------------------------------------------------------------

    def answers(self, goals: tuple):
        qvars: list = []
        for g in goals:
            term_vars(g, qvars)
        named = [v for v in qvars if v.name != "_"]
        root = DerivationNode(None, None, self.options.base_depth, None)
        count = 0
        try:
            for store in self.solve_goals(goals, root, ConstraintStore()):
                yield self._answer(named, store)
                count += 1
                if self.options.answer_limit is not None and count >= self.options.answer_limit:
                    return
        finally:
            self.report_stats()

    def report_stats(self):
        if self.options.stats is not None:
            self.options.stats["nodes"] = self.options.stats.get("nodes", 0) + self.nodes

    def _answer(self, named: list, store: ConstraintStore) -> Answer:
        values = {}
        keep = []
        variables = {}
        for v in named:
            t = self.resolve(v)
            values[v.name] = t
            if isinstance(t, Var):
                if t not in variables:
                    variables[t] = v.name
                if t in store:
                    keep.append(t)
        constraints = store.project(keep) if keep else []
        return Answer([v.name for v in named], values, constraints, store, variables)

    def solve_goals(self, goals: tuple, node: DerivationNode, store: ConstraintStore):
        if not goals:
            yield store
            return
        first = goals[0]
        rest = goals[1:]
        if isinstance(first, Constraint):
            for s in self.post(store, self.to_linear(first)):
                if rest:
                    yield from self.solve_goals(rest, node, s)
                else:
                    yield s
            return
        for s in self.call(first, node, store):
            if rest:
                yield from self.solve_goals(rest, node, s)
            else:
                yield s

    def call(self, goal: Struct, node: DerivationNode, store: ConstraintStore):
        goal = self.deref(goal)
        if not isinstance(goal, Struct):
            raise EngineError(f"cannot call {format_term(goal)}")
        depth = node.depth + 1
        if depth > self.limit:
            raise DepthExhausted(self.limit, format_term(self.resolve(goal)))
        self.nodes += 1
        handler = self.builtins.get(goal.key)
        if handler is not None and goal.key in _TABLED:
            key, open_vars, fixed_times = self._table_key(goal, store)
            if key is not None:
                known = self.table.get(key)
                if known is not None:
                    self.table_hits += 1
                    return self._trace_replay(self._replay(open_vars, known, store), goal, depth)
                if not fixed_times:
                    child = DerivationNode(goal, node, depth, node.records)
                    return self._record(key, open_vars, self._run(handler, goal, child, store))
                # every time argument is fixed: settle the whole answer set of
                # the call over fresh variables, so that a consumer stopping
                # early still fills the table
                fresh = [Var("_G") for _ in open_vars]
                general = rename_vars(goal, dict(zip(open_vars, fresh)), self.deref)
                child = DerivationNode(general, node, depth, node.records)
                for _ in self._record(key, fresh, self._run(handler, general, child, store)):
                    pass
                return self._trace_replay(self._replay(open_vars, self.table[key], store), goal, depth)
        child = DerivationNode(goal, node, depth, node.records)
        return self._run(handler, goal, child, store)

    def _run(self, handler, goal, child, store):
        inner = handler(goal, child, store) if handler else self.resolve_clauses(
            self.engine.clauses.get(goal.key, ()), goal, child, store
        )
        if self.trace is None:
            return inner
        return self._traced(inner, goal, child.depth)

    def _trace_replay(self, inner, goal, depth):
        return inner if self.trace is None else self._traced(inner, goal, depth)

    def _traced(self, inner, goal, depth):
        self.trace("call", format_term(self.resolve(goal)), depth)
        for s in inner:
            self.trace("exit", format_term(self.resolve(goal)), depth)
            yield s

    # -- tabling ----------------------------------------------------------------------
    # A call shares only its own variables with the caller, so its answers
    # depend on the caller's store only through the projection of that store
    # onto those variables.  Calls are keyed by their shape plus that
    # projection; answers are recorded as they stream past and the table
    # entry is stored only when the enumeration completes.

    def _table_key(self, goal, store):
        """``(key, slots, fixed_times)`` for a tabled call, ``slots`` being
        its variables."""
        slots: list = []
        index: dict = {}
        constrained: list = []

        def canon(t):
            t = self.deref(t)
            if isinstance(t, Var):
                i = index.get(t)
                if i is None:
                    if t in store:
                        value = store.fixed_value(t)
                        if value is not None:
                            return value
                        constrained.append(t)
                    i = index[t] = len(slots)
                    slots.append(t)
                return ("$", i)
            if isinstance(t, Struct) and t.args:
                return (t.functor, tuple(canon(a) for a in t.args))
            return t

        args = tuple(canon(a) for a in goal.args)
        fixed_times = not any(_has_slot(args[i]) for i in _TABLED.get(goal.key, ()))
        if fixed_times:
            # at fixed times the answers do not depend on what the caller
            # knows about the other variables: table the general call and
            # let replay conjoin each answer with the caller's store
            constrained = []
        shape = (goal.key, args)
        return (shape, _canonical_projection(store, constrained, index)), slots, fixed_times

    def _snapshot(self, slots, store):
        """The answer as a term over fresh slots plus projected constraints."""
        index: dict = {}
        constrained: list = []

        def canon(t):
            t = self.deref(t)
            if isinstance(t, Var):
                if t in store:
                    value = store.fixed_value(t)
                    if value is not None:
                        return value
                i = index.get(t)
                if i is None:
                    i = index[t] = len(index)
                    if t in store:
                        constrained.append(t)
                return _Slot(i)
            if isinstance(t, Struct) and t.args:
                return Struct(t.functor, tuple(canon(a) for a in t.args))
            return t

        values = tuple(canon(v) for v in slots)
        constraints = []
        if constrained:
            for c in store.project(constrained):
                constraints.append(Linear(tuple((_Slot(index[v]), a) for v, a in c.coeffs), c.const, c.rel))
        return values, tuple(constraints), len(index)

    def _record(self, key, slots, inner):
        answers: list | None = []
        for s in inner:
            if answers is not None:
                answers.append(self._snapshot(slots, s))
            yield s
        self.table[key] = answers

    def _replay(self, slots, answers, store):
        for values, constraints, width in answers:
            mark = len(self.trail)
            fresh = [Var("_T") for _ in range(width)]
            s = store
            for v, value in zip(slots, values):
                s = self.unify(v, _fill(value, fresh), s)
                if s is None:
                    break
            if s is not None:
                for c in constraints:
                    s = s.add(Linear(tuple((self.deref(fresh[slot.i]), a) for slot, a in c.coeffs), c.const, c.rel))
                    if s.failed:
                        s = None
                        break
            if s is not None:
                yield s
            self.undo(mark)

    def resolve_clauses(self, clauses, goal: Struct, node: DerivationNode, store, check=None):
        args = goal.args
        for comp in clauses:
            index = comp.index
            skip = False
            for i, p in enumerate(index):
                if p is None:
                    continue
                a = self.deref(args[i])
                if isinstance(a, Var):
                    continue
                if isinstance(a, Struct):
                    if p != (a.functor, len(a.args)):
                        skip = True
                        break
                elif p != a:
                    skip = True
                    break
            if skip:
                continue
            mark = len(self.trail)
            mapping: dict = {}
            head = rename(comp.clause.head, mapping)
            s = self.unify(head, goal, store)
            if s is not None:
                if check is not None:
                    s = check(goal, s)
                if s is not None:
                    body = tuple(rename(l, mapping) for l in comp.clause.body)
                    if body:
                        yield from self.solve_goals(body, node, s)
                    else:
                        yield s
            self.undo(mark)

    def _axiom_call(self, goal, node, store):
        return self.resolve_clauses(self.engine.axioms.get(goal.key, ()), goal, node, store)

    # -- built-ins --------------------------------------------------------------------

    def _holds2(self, goal, node, store):
        return self.resolve_clauses(self.engine.axioms[("holdsAt", 2)], goal, node, store)

    def _holds3(self, goal, node, store):
        f, t, third = goal.args
        third = self.deref(third)
        if self.engine.is_fluent(third):
            g = Struct("holdsAt_cf", (f, t, third))
            return self.resolve_clauses(self.engine.axioms[g.key], g, node, store)
        return self._delayed("holdsAt_delay", (f, t, third), third, node, store)

    def _holds4(self, goal, node, store):
        f, t, third, fourth = goal.args
        third = self.deref(third)
        if self.engine.is_fluent(third):
            return self._delayed("holdsAt_cf_dur", (f, t, third, fourth), fourth, node, store)
        return self._delayed("holdsAt_event", (f, t, third, fourth), third, node, store)

    def _not_holds3(self, goal, node, store):
        return self._delayed("not_holdsAt_delay", goal.args, goal.args[2], node, store)

    def _delayed(self, functor, args, dur, node, store):
        store = self._check_duration(dur, store)
        if store is None:
            return iter(())
        g = Struct(functor, args)
        return self.resolve_clauses(self.engine.axioms[g.key], g, node, store)

    def _check_duration(self, dur, store):
        dur = self.deref(dur)
        if isinstance(dur, Fraction):
            if dur <= 0:
                raise InvalidDuration(f"duration must be positive, got {format_rational(dur)}")
            return store
        if isinstance(dur, Var):
            positive = Linear(((dur, ONE),), ZERO, ">")
            if dur in store and store.entails(Linear(((dur, ONE),), ZERO, "<=")):
                raise InvalidDuration("duration is constrained to be non-positive")
            s = store.add(positive)
            return None if s.failed else s
        raise EngineError(f"duration must be numeric, got {format_term(dur)}")

    def _happens(self, goal, node, store):
        event, t = goal.args
        record = HappensRecord(event, t, node.depth, store)
        node.records = (record, node.records)
        if self.options.zeno_halt:
            report = on_expand_happens(node, event, t, store, self.resolve)
            if report is not None:
                raise ZenoHalt(report)
        if self.frontier is None:
            yield from self.resolve_clauses(self.engine.clauses.get(goal.key, ()), goal, node, store)
            return
        yield from self._kb_facts(goal, store)
        if self.frontier == "kb":
            check = self._only_plain_events
        else:
            check = self._after_frontier
        yield from self.resolve_clauses(self.engine.clauses.get(goal.key, ()), goal, node, store, check)

    def _only_plain_events(self, goal, store):
        event = self.resolve(goal.args[0])
        return None if self.engine.is_incr_event(event) else store

    def _after_frontier(self, goal, store):
        if not self.engine.is_incr_event(self.resolve(goal.args[0])):
            return store
        t = self.deref(goal.args[1])
        if isinstance(t, Fraction):
            return store if t > self.frontier else None
        s = store.add(Linear(((t, ONE),), -Fraction(self.frontier), ">"))
        return None if s.failed else s

    def _kb_facts(self, goal, store):
        for ev, t in self.kb:
            mark = len(self.trail)
            s = self.unify(Struct("happens", (ev, t)), goal, store)
            if s is not None:
                yield s
            self.undo(mark)

    def _incr_happens(self, goal, node, store):
        yield from self._kb_facts(Struct("happens", goal.args), store)

    # -- negation -----------------------------------------------------------------

    def _not_happens(self, goal, node, store):
        return self.negate(Struct("happens", goal.args), node, store)

    def _not_holds2(self, goal, node, store):
        return self.negate(Struct("holdsAt", goal.args), node, store)

    def _not_stopped(self, goal, node, store):
        return self._interval_negation("stoppedIn", goal.args, node, store)

    def _not_started(self, goal, node, store):
        return self._interval_negation("startedIn", goal.args, node, store)

    def _interval_negation(self, functor, args, node, store):
        """Split an open-ended right endpoint at its closed lower bound first,
        so the earliest admissible time is settled before later ones."""
        positive = Struct(functor, args)
        t2 = self.deref(args[2])
        if isinstance(t2, Var) and t2 in store:
            lo, _ = store.bounds_of(t2)
            if lo.present and not lo.strict and store.value_of(t2) is None:
                at = store.add(Linear(((t2, ONE),), -lo.value, "="))
                if not at.failed:
                    yield from self.negate(positive, node, at)
                above = store.add(Linear(((t2, ONE),), -lo.value, ">"))
                if not above.failed:
                    yield from self.negate(positive, node, above)
                return
        yield from self.negate(positive, node, store)

    def negate(self, goal: Struct, node: DerivationNode, store: ConstraintStore):
        """Constructive negation by refining away the answers of ``goal``."""
        outer = [v for v in term_vars(self.resolve(goal))]
        key = None
        if all(v in store and store.fixed_value(v) is not None for v in outer):
            key, _, _ = self._table_key(goal, store)
            if key is not None:
                known = self.negation_table.get(key)
                if known is not None:
                    self.table_hits += 1
                    if not known:
                        yield store
                    return
        mark = len(self.trail)
        gen = self.call(goal, node, store)
        try:
            found = next(gen, None)
            refinement = None
            if found is not None:
                refinement = self._refinement(outer, found, store)
        finally:
            gen.close()
            self.undo(mark)
        if key is not None:
            self.negation_table[key] = found is not None
        if found is None:
            yield store
            return
        if not refinement:
            return
        depth = node.depth + 1
        if depth > self.limit:
            raise NegationDepthExceeded(self.limit, format_term(self.resolve(goal)))
        child = DerivationNode(goal, node, depth, node.records)
        for branch in _complement(refinement):
            s = store
            for c in branch:
                s = s.add(c)
                if s.failed:
                    break
            if not s.failed:
                yield from self.negate(goal, child, s)

    def _refinement(self, outer: list, answer: ConstraintStore, store: ConstraintStore):
        """Constraints the answer places on the caller's variables, minus
        those the caller's store already entails.  Empty means the
        positive goal succeeds unconditionally."""
        keep: dict = {}
        extra: list = []
        for v in outer:
            if self.deref(v) is v:
                keep[v] = v
        for v in outer:
            t = self.deref(v)
            if t is v:
                continue
            if isinstance(t, Var):
                if t in keep:
                    extra.append(Linear(((v, ONE), (keep[t], -ONE)), ZERO, "="))
                else:
                    keep[t] = v
            elif isinstance(t, Fraction):
                extra.append(Linear(((v, ONE),), -t, "="))
            else:
                raise EngineError(
                    f"negation would bind {v.name} to {format_term(self.resolve(t))}; "
                    "only numeric variables may be left open in negated goals"
                )
        keep = {w: v for w, v in keep.items() if w in answer}
        projected = []
        if keep:
            for c in answer.project(list(keep)):
                projected.append(Linear(tuple((keep[w], a) for w, a in c.coeffs), c.const, c.rel))
        out = []
        for c in projected + extra:
            if not store.entails(c):
                out.append(c)
        out.sort(key=lambda c: min((v.id for v, _ in c.coeffs), default=0))
        return out


def _complement(constraints: list):
    """Branches covering the complement of a conjunction, in order."""
    prefix = []
    for c in constraints:
        for neg in c.negated():
            yield prefix + [neg]
        prefix = prefix + [c]
