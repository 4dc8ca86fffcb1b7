"""Detection of Zeno-descending chains of event occurrences.

A chain is three expansions of ``happens(E, T)`` on one derivation path
for the same event, each time variable strictly below the previous one
while all three are confined to the same interval.  Such a chain means
the search is hunting for an event arbitrarily close to an open bound,
which never terminates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constraints import ONE, ZERO, Bound, ConstraintStore, Linear, format_rational
from .terms import Var, format_term


@dataclass(frozen=True)
class ZenoChainReport:
    event: object
    older_var: int
    newer_var: int
    current_var: int
    shared_interval: tuple
    node_depths: tuple
    text: str = ""


def format_interval(lo: Bound, hi: Bound) -> str:
    left = "(" if (lo.strict or not lo.present) else "["
    right = ")" if (hi.strict or not hi.present) else "]"
    lo_text = format_rational(lo.value) if lo.present else "-inf"
    hi_text = format_rational(hi.value) if hi.present else "inf"
    return f"{left}{lo_text}, {hi_text}{right}"


def render_warning(report: ZenoChainReport) -> str:
    event = format_term(report.event)
    lo, hi = report.shared_interval
    interval = format_interval(lo, hi)
    older, newer, current = (f"T#{v}" for v in (report.older_var, report.newer_var, report.current_var))
    depths = ", ".join(str(d) for d in report.node_depths)
    return (
        f"Warning: Zeno-descending chain detected for event {event}: "
        f"happens({event}, {current}) < happens({event}, {newer}) < happens({event}, {older}), "
        f"all constrained to {interval} (node depths {depths}). "
        "The search is looking for an occurrence arbitrarily close to an open bound; halting."
    )


def _same_values(a: tuple, b: tuple) -> bool:
    return all(x.present == y.present and x.value == y.value for x, y in zip(a, b))


def on_expand_happens(node, event, time_var, store: ConstraintStore, resolve=lambda t: t):
    """Check the newest happens/2 expansion against the ancestor path.

    ``node.records`` must already include the expansion being checked as
    its head.  ``resolve`` maps terms through the current bindings.
    """
    current = resolve(time_var)
    if not isinstance(current, Var) or current not in store:
        return None
    ev = resolve(event)
    records = node.records
    head_record = records[0] if records is not None else None
    rest = records[1] if records is not None else None
    same = []
    r = rest
    while r is not None:
        rec = r[0]
        t = resolve(rec.time)
        if isinstance(t, Var) and t is not current and t in store and resolve(rec.event) == ev:
            same.append((rec, t))
        r = r[1]
    if len(same) < 2:
        return None
    cur_bounds = store.bounds_of(current)
    if not (cur_bounds[0].present or cur_bounds[1].present):
        return None
    cache: dict = {}

    def bounds(v):
        if v not in cache:
            cache[v] = store.bounds_of(v)
        return cache[v]

    def below(a, b) -> bool:
        return store.entails(Linear(((a, ONE), (b, -ONE)), ZERO, "<"))

    for i, (newer, nv) in enumerate(same):
        if bounds(nv) != cur_bounds or not below(current, nv):
            continue
        for older, ov in same[i + 1:]:
            if ov is nv or not _same_values(bounds(ov), cur_bounds):
                continue
            if not below(nv, ov):
                continue
            depth = head_record.depth if head_record is not None else node.depth
            report = ZenoChainReport(
                event=ev,
                older_var=ov.id,
                newer_var=nv.id,
                current_var=current.id,
                shared_interval=cur_bounds,
                node_depths=(older.depth, newer.depth, depth),
            )
            return ZenoChainReport(**{**report.__dict__, "text": render_warning(report)})
    return None
