from fractions import Fraction as Q
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeno_ec.constraints import parse_linear, store_of
from zeno_ec.engine import Engine
from zeno_ec.surface import ParseError, parse_goal_text, parse_program, parse_query, pretty_print
from zeno_ec.terms import Constraint, ModelProgram, Var

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

LIGHT = """
% light switched on and off
fluent(light_on).
event(turn_light_on).
event(turn_light_off).
initiates(turn_light_on, light_on, T).
terminates(turn_light_off, light_on, T).
initiallyN(light_on).
happens(turn_light_on, 10).
happens(turn_light_off, 20).
?- holdsAt(light_on, T).
"""


def test_empty_program():
    assert parse_program("") == ModelProgram()
    assert parse_program("% only a comment\n").clauses == []


def test_light_program_shape():
    prog = parse_program(LIGHT)
    assert len(prog.fluents) == 1
    assert len(prog.events) == 2
    keys = [c.key for c in prog.clauses]
    assert keys.count(("initiates", 3)) == 1
    assert keys.count(("terminates", 3)) == 1
    assert keys.count(("initiallyN", 1)) == 1
    assert keys.count(("happens", 2)) == 2
    assert len(prog.queries) == 1


def test_trajectory_constraint_normal_form():
    text = (
        "trajectory(fading_in, T1, brightness(NewB), T2) :- "
        "NewB .=. OldB + ((T2-T1) * 1), holdsAt(brightness(OldB), T1)."
    )
    prog = parse_program(text)
    (clause,) = prog.clauses
    assert clause.key == ("trajectory", 4)
    c, call = clause.body
    assert isinstance(c, Constraint) and c.rel == "="
    assert call.key == ("holdsAt", 2)
    # the constraint alone, solved, must be NewB - OldB - T2 + T1 = 0
    engine = Engine(ModelProgram())
    (answer,) = engine.solve(parse_goal_text("NewB .=. OldB + ((T2-T1) * 1)"))
    names = {v: n for v, n in answer.variables.items()}
    renamed = [parse_linear(c.render(lambda v: names[v])) for c in answer.constraints]
    store = store_of(renamed)
    assert store.entails(parse_linear("NewB - OldB - T2 + T1 = 0"))
    assert not store.entails(parse_linear("NewB = 0"))


def test_query_examples():
    q = parse_query("?- holdsAt(light_on, T).")
    assert len(q.goals) == 1 and q.directives == ()
    q = parse_query("?- !incr_max_time(19.5), T .=<. 19.5, happens(switch_left, T).")
    assert len(q.goals) == 2
    (d,) = q.directives
    assert d.name == "incr_max_time" and d.args == (Q(39, 2),)
    assert isinstance(q.goals[0], Constraint) and q.goals[1].functor == "happens"


def test_empty_query_is_an_error():
    with pytest.raises(ParseError):
        parse_query("?-")


def test_query_must_start_with_marker():
    with pytest.raises(ParseError):
        parse_query("holdsAt(light_on, T).")


def test_unknown_directive():
    with pytest.raises(ParseError, match="unknown directive"):
        parse_query("?- !max_depth(3), happens(e, T).")


def test_directive_in_program_is_an_error():
    with pytest.raises(ParseError):
        parse_program("!incr_max_time(3).")


def test_exact_rationals():
    q = parse_query("?- X .=. 1/1000000, Y .=. 16.25, Z .=. 18.125.")
    values = [g.rhs for g in q.goals]
    assert values == [Q(1, 1000000), Q(65, 4), Q(145, 8)]
    assert all(isinstance(v, Q) for v in values)


def test_nonlinear_product_is_a_parse_error():
    with pytest.raises(ParseError) as err:
        parse_program("p(X, Y) :-\n    Z .=. X * Y.")
    assert err.value.line == 2
    assert err.value.column > 0
    assert err.value.token == "*"


def test_division_by_a_variable_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_query("?- Z .=. 3 / X.")


def test_constant_products_are_linear():
    q = parse_query("?- Z .=. (2 * 3) * X + X / 4.")
    assert isinstance(q.goals[0], Constraint)


def test_unsupported_negation_is_a_parse_error():
    with pytest.raises(ParseError, match="not_foo"):
        parse_program("p(T) :- not_foo(T).")


def test_supported_negations_parse():
    prog = parse_program("p(T) :- not_holdsAt(f, T), not_happens(e, T), not_stoppedIn(0, f, T).")
    assert [g.functor for g in prog.clauses[0].body] == ["not_holdsAt", "not_happens", "not_stoppedIn"]


def test_builtins_cannot_be_redefined():
    with pytest.raises(ParseError):
        parse_program("holdsAt(f, 1).")


def test_error_reports_location():
    with pytest.raises(ParseError) as err:
        parse_program("fluent(f).\nhappens(e 10).")
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_undeclared_event_is_rejected():
    with pytest.raises(ParseError, match="undeclared event"):
        parse_program("fluent(f).\nevent(e).\ninitiates(g, f, T).")


def test_undeclared_fluent_is_rejected():
    with pytest.raises(ParseError, match="undeclared fluent"):
        parse_program("fluent(f).\nevent(e).\ninitiates(e, h, T).")


def test_declared_patterns_accept_instances():
    prog = parse_program("fluent(balance(X)).\nevent(withdraw(X)).\ninitiates(withdraw(5), balance(3), T).")
    assert len(prog.clauses) == 1


def test_variables_are_shared_within_a_clause_only():
    prog = parse_program("p(X) :- q(X).\nr(X).")
    first, second = prog.clauses
    assert first.head.args[0] is first.body[0].args[0]
    assert first.head.args[0] is not second.head.args[0]


def test_pretty_print_light():
    text = pretty_print(parse_program(LIGHT))
    assert "initiates(turn_light_on, light_on, T)." in text
    assert "?- holdsAt(light_on, T)." in text


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*/*.pl")), ids=lambda p: f"{p.parent.name}/{p.name}")
def test_corpus_round_trip(path):
    prog = parse_program(path.read_text())
    again = parse_program(pretty_print(prog))
    assert again == prog
    assert pretty_print(again) == pretty_print(prog)


# -- generated round trips -----------------------------------------------------------

names = st.sampled_from(["f", "light_on", "balance", "water_left"])
variables = st.sampled_from(["T", "T1", "T2", "X", "OldB"])
numbers = st.fractions(min_value=-1000, max_value=1000, max_denominator=64).map(
    lambda q: str(q) if q.denominator == 1 else f"({q.numerator}/{q.denominator})"
)


def _expr(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-"]), children).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
        st.tuples(numbers, children).map(lambda t: f"{t[0]} * ({t[1]})"),
        st.tuples(children, st.integers(1, 9)).map(lambda t: f"({t[0]}) / {t[1]}"),
        children.map(lambda e: f"-({e})"),
    )


exprs = st.recursive(st.one_of(variables, numbers), _expr, max_leaves=6)
rels = st.sampled_from([".=.", ".<>.", ".<.", ".=<.", ".>=.", ".>."])


@settings(max_examples=200, deadline=None)
@given(names, variables, exprs, rels, exprs)
def test_generated_clauses_round_trip(functor, v, lhs, rel, rhs):
    text = f"{functor}({v}) :- {lhs} {rel} {rhs}, holdsAt(f, {v})."
    prog = parse_program(text)
    assert parse_program(pretty_print(prog)) == prog


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=0, max_value=10**6))
def test_quotient_literals_are_exact(q):
    # any rational written as a quotient of integers parses to itself
    text = f"?- X .=. {q.numerator}/{q.denominator}."
    assert parse_query(text).goals[0].rhs == q


def test_decimal_text_is_exact():
    q = parse_query("?- X .=. 0.1 + 0.2.")
    assert q.goals[0].rhs == Q(3, 10)
    assert isinstance(q.goals[0].lhs, Var)
    assert isinstance(q.goals[0], Constraint)
    assert not isinstance(q.goals[0].rhs, float)
