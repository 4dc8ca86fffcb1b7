"""Forward reasoning over incremental events.

Occurrences of events declared with ``incr_event`` are computed one time
step at a time: each round looks for the earliest occurrence after the
current frontier, stores it as an ``incr_happens`` fact and moves the
frontier there.  Effects gated on ``incr_happens`` therefore only ever see
occurrences that were established in an earlier round, which breaks the
backward-in-time circularity that otherwise makes such models diverge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .constraints import format_rational
from .engine import Engine, EngineError, SolveOptions
from .terms import Constraint, Query, Struct, Var, format_term, is_ground
from .unify import rename


class IncrementalError(EngineError):
    pass


class NonPointOccurrence(IncrementalError):
    """An incremental event was derived for a range of times, not one time."""


class IncrMaxTimeMissing(IncrementalError):
    pass


@dataclass
class IncrementalState:
    max_time: Fraction
    frontier: Fraction = Fraction(0)
    facts: list = field(default_factory=list)
    iterations: int = 0

    def fact_set(self) -> set:
        return {(format_term(e), t) for e, t in self.facts}

    def render(self) -> list:
        return [f"incr_happens({format_term(e)}, {format_rational(t)})" for e, t in self.facts]


def max_time_of(query: Query | None, override=None) -> Fraction:
    """The horizon from a CLI override or the query's directive."""
    if override is not None:
        return Fraction(override)
    if query is not None:
        d = query.directive("incr_max_time")
        if d is not None:
            return Fraction(d.args[0])
    raise IncrMaxTimeMissing("incremental mode needs a horizon: use !incr_max_time(T) or --incr-max-time")


def run_incremental(engine: Engine, max_time, options: SolveOptions | None = None) -> IncrementalState:
    """Materialize incremental occurrences up to ``max_time``.

    Every round counts as one level of derivation depth, so a model whose
    occurrences accumulate forever below the horizon exhausts the depth
    limit instead of looping.
    """
    options = options or SolveOptions()
    state = IncrementalState(max_time=Fraction(max_time))
    if not engine.incr_events:
        raise IncrementalError("the program declares no incr_event")
    while True:
        state.iterations += 1
        found = _next_occurrences(engine, state, options)
        if not found:
            return state
        earliest = min(t for _, t in found)
        for event, t in found:
            if t == earliest and (event, t) not in state.facts:
                state.facts.append((event, t))
        state.frontier = earliest


def _next_occurrences(engine: Engine, state: IncrementalState, options: SolveOptions) -> list:
    round_options = replace(
        options,
        incremental_kb=tuple(state.facts),
        incr_frontier=state.frontier,
        base_depth=options.base_depth + state.iterations - 1,
        answer_limit=None,
    )
    found = []
    for pattern in engine.incr_events:
        event = rename(pattern, {})
        time = Var("IncrTime")
        goals = (
            Constraint(">", time, state.frontier),
            Constraint("<=", time, state.max_time),
            Struct("happens", (event, time)),
        )
        for ev, t in engine.solve_terms(goals, round_options, (event, time)):
            found.append(check_point(ev, t))
    return found


def query_with_kb(engine: Engine, state: IncrementalState, goals, options: SolveOptions | None = None):
    """Answer ``goals`` with incremental events read from the fact base."""
    options = replace(options or SolveOptions(), incremental_kb=tuple(state.facts), incr_frontier="kb")
    return engine.solve(goals, options)


def check_point(event, time) -> tuple:
    """Check that an answer names one ground occurrence at one time."""
    if not isinstance(time, Fraction):
        raise NonPointOccurrence(
            f"happens({format_term(event)}, T) holds for a range of T; incremental events must occur at a single time"
        )
    if not is_ground(event):
        raise NonPointOccurrence(f"incremental occurrence {format_term(event)} is not ground")
    return event, time
