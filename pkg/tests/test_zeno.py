from fractions import Fraction as Q
from pathlib import Path

import pytest

from zeno_ec.constraints import Bound, ConstraintStore, Linear
from zeno_ec.engine import DerivationNode, Engine, HappensRecord, SolveOptions, ZenoHalt
from zeno_ec.surface import load_program, parse_goal_text
from zeno_ec.terms import Struct, Var, format_term
from zeno_ec.zeno import ZenoChainReport, format_interval, on_expand_happens, render_warning

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def c(text_terms, const, rel):
    return Linear.build(text_terms, const, rel)


def chain(events_and_times, store):
    """Node whose records hold the given expansions, newest last."""
    records = None
    for depth, (event, t) in enumerate(events_and_times, start=1):
        records = (HappensRecord(event, t, depth * 5, store), records)
    return DerivationNode(None, None, len(events_and_times) * 5, records)


def fee_chain():
    """The three serviceFee expansions of the unfixed bank account."""
    t1, t2, t3 = Var("T1"), Var("T2"), Var("T3")
    s = ConstraintStore()
    for lin in [
        c({t1: 1}, 0, ">"), c({t1: 1}, -100, "<="),
        c({t2: 1}, 0, ">"), c({t2: 1}, -100, "<"), c({t2: 1, t1: -1}, 0, "<"),
        c({t3: 1}, 0, ">"), c({t3: 1}, -100, "<"), c({t3: 1, t2: -1}, 0, "<"),
    ]:
        s = s.add(lin)
    return (t1, t2, t3), s


def test_descending_chain_is_reported():
    (t1, t2, t3), s = fee_chain()
    fee = Struct("serviceFee")
    node = chain([(fee, t1), (fee, t2), (fee, t3)], s)
    report = on_expand_happens(node, fee, t3, s)
    assert report is not None
    assert report.event == fee
    assert (report.older_var, report.newer_var, report.current_var) == (t1.id, t2.id, t3.id)
    assert report.shared_interval == (Bound(Q(0), True, True), Bound(Q(100), True, True))
    assert report.node_depths == (5, 10, 15)
    # invariants: the order is entailed and the bounds agree
    assert s.entails(c({t3: 1, t2: -1}, 0, "<")) and s.entails(c({t2: 1, t1: -1}, 0, "<"))
    for v in (t1, t2, t3):
        lo, hi = s.bounds_of(v)
        assert (lo.value, hi.value) == (Q(0), Q(100))


def test_two_expansions_are_not_a_chain():
    (t1, t2, _), s = fee_chain()
    fee = Struct("serviceFee")
    assert on_expand_happens(chain([(fee, t1), (fee, t2)], s), fee, t2, s) is None


def test_different_events_are_not_a_chain():
    (t1, t2, t3), s = fee_chain()
    node = chain([(Struct("serviceFee"), t1), (Struct("withdraw", (Q(5),)), t2), (Struct("serviceFee"), t3)], s)
    assert on_expand_happens(node, Struct("serviceFee"), t3, s) is None


def test_fixed_delta_is_not_a_chain():
    t1, t2, t3 = Var("T1"), Var("T2"), Var("T3")
    s = ConstraintStore()
    for lin in [
        c({t1: 1}, 0, ">"), c({t1: 1}, -100, "<="),
        c({t2: 1, t1: -1}, 5, "="),
        c({t3: 1, t2: -1}, 5, "="),
        c({t3: 1}, 0, ">"),
    ]:
        s = s.add(lin)
    e = Struct("e")
    assert on_expand_happens(chain([(e, t1), (e, t2), (e, t3)], s), e, t3, s) is None


def test_unconstrained_times_are_not_a_chain():
    t1, t2, t3 = Var("T1"), Var("T2"), Var("T3")
    s = ConstraintStore().add(c({t2: 1, t1: -1}, 0, "<")).add(c({t3: 1, t2: -1}, 0, "<"))
    e = Struct("e")
    assert on_expand_happens(chain([(e, t1), (e, t2), (e, t3)], s), e, t3, s) is None


def test_render_warning_for_service_fee():
    (t1, t2, t3), s = fee_chain()
    fee = Struct("serviceFee")
    report = on_expand_happens(chain([(fee, t1), (fee, t2), (fee, t3)], s), fee, t3, s)
    text = render_warning(report)
    assert "Zeno-descending chain" in text
    assert "serviceFee" in text
    assert "(0, 100)" in text
    assert report.text == text
    assert "\n" not in text


def test_interval_format():
    assert format_interval(Bound(Q(0), True, True), Bound(Q(100), False, True)) == "(0, 100]"
    assert format_interval(Bound(None, False, False), Bound(Q(25, 2), True, True)) == "(-inf, 12.5)"


def test_report_is_a_value():
    r = ZenoChainReport(Struct("e"), 1, 2, 3, (Bound(Q(0), True, True), Bound(Q(1), True, True)), (1, 2, 3))
    assert r == ZenoChainReport(Struct("e"), 1, 2, 3, (Bound(Q(0), True, True), Bound(Q(1), True, True)), (1, 2, 3))


UNFIXED = [
    (["ex2-bank/domain.pl", "ex2-bank/narrative.pl", "ex2-bank/trigger.pl"],
     "happens(serviceFee, T)", "serviceFee", "(0, inf)"),
    (["ex3-fading/domain.pl", "ex3-fading/narrative.pl", "ex3-fading/trigger.pl"],
     "happens(fade_in_end, T)", "fade_in_end", "(0, 10)"),
    # the chain closes in on the open lower bound left by switch_right at 13
    (["ex5-tanks/domain.pl", "ex5-tanks/switch-right.pl", "ex5-tanks/trigger.pl", "ex5-tanks/narrative2.pl"],
     "happens(switch_left, T)", "switch_left", "(13, inf)"),
]


@pytest.mark.parametrize("files, query, event, interval", UNFIXED, ids=[u[2] for u in UNFIXED])
def test_engine_halts_with_report(files, query, event, interval):
    engine = Engine(load_program([CORPUS / f for f in files]))
    with pytest.raises(ZenoHalt) as halt:
        list(engine.solve(parse_goal_text(query), SolveOptions(zeno_halt=True)))
    report = halt.value.report
    assert format_term(report.event) == event
    assert event in report.text
    assert format_interval(*report.shared_interval) == interval
    assert f"all constrained to {interval}" in report.text
    assert report.node_depths[0] < report.node_depths[1] < report.node_depths[2] <= 2000
