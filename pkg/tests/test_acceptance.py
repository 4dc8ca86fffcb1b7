"""Acceptance criteria 1 to 8.  Each test prints one PASS or FAIL line."""

import io
import random
import time
from fractions import Fraction as Q


from certify import CORPUS, RowCertifier
from checks import projection_problems, satisfiability_mismatches
from zeno_ec.cli import (
    EXIT_ANSWERS,
    EXIT_DEPTH,
    EXIT_NO_ANSWER,
    EXIT_ZENO,
    Expectation,
    ManifestRow,
    RunConfig,
    build_parser,
    execute,
    parse_manifest,
    run_query_main,
)
from zeno_ec.engine import Engine
from zeno_ec.incremental import run_incremental
from zeno_ec.surface import load_program, parse_goal_text
from zeno_ec.terms import Var, format_term

ROWS = parse_manifest((CORPUS / "manifest.txt").read_text())

LIGHT = "ex1-light/domain.pl ex1-light/narrative.pl"
BANK_REMODEL = "ex2-bank/fix-remodel.pl ex2-bank/narrative.pl"
BANK_EPS = "ex2-bank/domain.pl ex2-bank/narrative.pl ex2-bank/fix-holdsAt4.pl"
FADING = "ex3-fading/domain.pl ex3-fading/narrative.pl ex3-fading/fix-holdsAt3.pl"
PULSING_DUR = "ex4-pulsing/domain.pl ex4-pulsing/narrative.pl ex4-pulsing/fix-holdsAt4.pl"
PULSING_INCR = "ex4-pulsing/domain.pl ex4-pulsing/narrative.pl ex4-pulsing/trigger.pl ex4-pulsing/fix-incr.pl"
TANKS5_N1 = "ex5-tanks/domain.pl ex5-tanks/switch-right.pl ex5-tanks/trigger.pl ex5-tanks/narrative1.pl"
TANKS5_SPLIT = "ex5-tanks/domain.pl ex5-tanks/switch-right.pl ex5-tanks/fix-split_holdsAt4.pl ex5-tanks/narrative2.pl"
TANKS5_NO_START = "ex5-tanks/domain.pl ex5-tanks/fix-split_no_start.pl ex5-tanks/narrative2.pl"
TANKS7_PART_INCR = ("ex7-tanks/domain.pl ex7-tanks/trigger-left.pl ex7-tanks/trigger-right.pl "
               "ex7-tanks/partfix-incr.pl ex7-tanks/narrative.pl")
TANKS7_DURATION = "ex7-tanks/domain.pl ex7-tanks/trigger-left.pl ex7-tanks/fix-holdsAt4.pl ex7-tanks/narrative.pl"
TANKS7_INCR_DURATION = "ex7-tanks/domain.pl ex7-tanks/trigger-left.pl ex7-tanks/fix-incr_holdsAt4.pl ex7-tanks/narrative.pl"
TANKS7_ZENO = "ex7-tanks/domain.pl ex7-tanks/zeno-incr_split.pl ex7-tanks/narrative.pl"
INCR_19_5 = "--incremental --incr-max-time 19.5"

TANKS7_QUERIES = [
    "T .=<. 19.5, happens(switch_left, T)",
    "T .=<. 19.5, happens(switch_right, T)",
    "holdsAt(water_left(X), 19.5)",
    "holdsAt(water_right(X), 19.5)",
]


def config(files: str, queries, flags: str = "") -> RunConfig:
    queries = [queries] if isinstance(queries, str) else queries
    argv = [str(CORPUS / f) for f in files.split()] + flags.split()
    for q in queries:
        argv += ["--query", q]
    return RunConfig.from_args(build_parser().parse_args(argv))


def timed(cfg: RunConfig):
    start = time.perf_counter()
    run = execute(cfg)
    return run, time.perf_counter() - start


def cli_output(cfg: RunConfig):
    out, err = io.StringIO(), io.StringIO()
    code = run_query_main(cfg, out, err)
    return code, out.getvalue()


def report(capsys, number: int, problems: list, detail: str = ""):
    line = f"criterion {number}: {'PASS' if not problems else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    with capsys.disabled():
        print(f"\n{line}")
        for p in problems[:10]:
            print(f"    {p}")


def certify_all(row: ManifestRow, rng: random.Random) -> list:
    cert = RowCertifier(row)
    problems = []
    for answer in cert.answers():
        for _ in range(3):
            problems += [f"line {row.line}: {p}" for p in cert.certify(answer, rng)]
    return problems


# -- 1. golden answers ---------------------------------------------------------------

GOLDEN = [
    (LIGHT, "holdsAt(light_on, T)", "", ["T ~ {T > 10, T =< 20}"]),
    (BANK_REMODEL, "holdsAt(balance(X), 5)", "", ["X = 10000"]),
    (BANK_REMODEL, "holdsAt(balance(X), 15)", "", ["X = 2000"]),
    (BANK_REMODEL, "holdsAt(balance(X), 25)", "", ["X = 490"]),
    (BANK_REMODEL, "happens(serviceFee, T)", "", ["T = 20"]),
    (BANK_EPS, "happens(serviceFee, T)", "", ["T = 20.000001"]),
    (FADING, "holdsAt(brightness(X), 25)", "", ["X = 10"]),
    (FADING, "happens(fade_in_end, T)", "", ["T = 20"]),
    (PULSING_DUR, "T .=<. 35, happens(fade_in_end, T)", "", ["T = 20"]),
    (PULSING_DUR, "T .=<. 35, happens(fade_out_end, T)", "", ["T = 30"]),
    (PULSING_INCR, "happens(fade_in_end, T)", "--incremental --incr-max-time 35", ["T = 20"]),
    (PULSING_INCR, "happens(fade_out_end, T)", "--incremental --incr-max-time 35", ["T = 30"]),
    (TANKS5_N1, "happens(switch_left, T)", "", ["T = 12.5", "T = 18.125"]),
    (TANKS5_N1, "holdsAt(water_left(X), 12.5)", "", ["X = 50"]),
    (TANKS5_N1, "holdsAt(water_left(X), 16.25)", "", ["X = 87.5"]),
]

# terminating queries whose answers are certified rather than fixed in advance
CERTIFIED = [
    (files, q, "")
    for files in (TANKS5_SPLIT, TANKS5_NO_START)
    for q in ("holdsAt(water_left(X), 13)", "happens(switch_left, T)", "holdsAt(water_left(X), 15)")
]

# (files, flags, query, times that must be among the answers)
TANKS7 = [
    (files, flags, q, must)
    for files, flags in ((TANKS7_DURATION, ""), (TANKS7_INCR_DURATION, INCR_19_5))
    for q, must in zip(TANKS7_QUERIES, (["T = 12.5"], ["T = 16.25"], [], []))
]


def test_criterion_1_golden_answers(capsys):
    problems, slowest = [], 0.0
    for files, q, flags, expected in GOLDEN:
        run, seconds = timed(config(files, q, flags))
        slowest = max(slowest, seconds)
        got = run.results[-1].answers if run.results else run.message
        if got != expected:
            problems.append(f"{q} on {files}: expected {expected}, got {got}")
        if seconds >= 60:
            problems.append(f"{q} on {files}: {seconds:.1f} s")
    # the boundary of the light answer and the epsilon fee are checked on the ground timeline
    rng = random.Random(1)
    for files, q in ((LIGHT, "holdsAt(light_on, T)"), (BANK_EPS, "happens(serviceFee, T)")):
        problems += certify_all(ManifestRow(0, files.split(), q, [], Expectation("ANSWERS")), rng)
    (fee,) = Engine(load_program([CORPUS / f for f in BANK_EPS.split()])).solve(
        parse_goal_text("happens(serviceFee, T)"))
    t = fee.values["T"]
    t = fee.store.value_of(t) if isinstance(t, Var) else t
    if t != 20 + Q(1, 1000000):
        problems.append(f"epsilon fee at {t!r}")
    for files, q, flags in CERTIFIED:
        run, seconds = timed(config(files, q, flags))
        slowest = max(slowest, seconds)
        if run.status not in (EXIT_ANSWERS, EXIT_NO_ANSWER) or seconds >= 60:
            problems.append(f"{q} on {files}: status {run.status} after {seconds:.1f} s")
            continue
        problems += certify_all(ManifestRow(0, files.split(), q, [], Expectation("ANSWERS")), rng)
    for files, flags, q, must in TANKS7:
        run, seconds = timed(config(files, q, flags))
        slowest = max(slowest, seconds)
        if run.status != EXIT_ANSWERS or seconds >= 60:
            problems.append(f"{q} on {files}: status {run.status} after {seconds:.1f} s")
            continue
        missing = [m for m in must if m not in run.results[-1].answers]
        if missing:
            problems.append(f"{q} on {files}: {missing} not among {run.results[-1].answers}")
    report(capsys, 1, problems, f"slowest query {slowest:.2f} s")
    assert problems == []


# -- 2. Zeno guard detection ---------------------------------------------------------

UNFIXED = [
    ("ex2-bank/domain.pl ex2-bank/narrative.pl ex2-bank/trigger.pl",
     "happens(serviceFee, T)", {"serviceFee"}),
    ("ex3-fading/domain.pl ex3-fading/narrative.pl ex3-fading/trigger.pl",
     "happens(fade_in_end, T)", {"fade_in_end"}),
    ("ex4-pulsing/domain.pl ex4-pulsing/narrative.pl ex4-pulsing/trigger.pl",
     "happens(fade_in_end, T)", {"fade_in_end", "fade_out_end"}),
    ("ex5-tanks/domain.pl ex5-tanks/switch-right.pl ex5-tanks/trigger.pl ex5-tanks/narrative2.pl",
     "happens(switch_left, T)", {"switch_left"}),
    ("ex7-tanks/domain.pl ex7-tanks/trigger-left.pl ex7-tanks/trigger-right.pl ex7-tanks/narrative.pl",
     "T .=<. 19.5, happens(switch_left, T)", {"switch_left", "switch_right"}),
    ("apx-blinking/domain.pl apx-blinking/narrative.pl apx-blinking/trigger.pl",
     "happens(turn_light_off, T)", {"turn_light_on", "turn_light_off"}),
]


def test_criterion_2_zeno_guard_detection(capsys):
    problems, slowest = [], 0.0
    for files, q, events in UNFIXED:
        cfg = config(files, q, "--zeno_halt --depth 2000")
        start = time.perf_counter()
        code, _ = cli_output(cfg)
        seconds = time.perf_counter() - start
        slowest = max(slowest, seconds)
        run = execute(cfg)
        reports = [r.zeno_report for r in run.results if r.zeno_report is not None]
        if code != EXIT_ZENO or not reports:
            problems.append(f"{files}: exit {code}, no Zeno report")
            continue
        event = format_term(reports[0].event)
        if event not in events:
            problems.append(f"{files}: reported {event}, expected one of {sorted(events)}")
        if max(reports[0].node_depths) > 2000:
            problems.append(f"{files}: depth {max(reports[0].node_depths)}")
        if seconds >= 10:
            problems.append(f"{files}: {seconds:.1f} s")
    report(capsys, 2, problems, f"6 configurations, slowest {slowest:.2f} s")
    assert problems == []


# -- 3. no false positives -----------------------------------------------------------

TERMINATING = [r for r in ROWS if r.expected.kind in ("ANSWERS", "NO_ANSWER")]


def test_criterion_3_guard_changes_no_answer(capsys):
    problems = []
    for row in TERMINATING:
        files = " ".join(row.files)
        flags = [f for f in row.flags if f != "--zeno_halt"]
        plain = cli_output(config(files, row.query, " ".join(flags)))
        guarded = cli_output(config(files, row.query, " ".join(flags + ["--zeno_halt"])))
        if plain != guarded:
            problems.append(f"line {row.line}: {plain!r} vs {guarded!r}")
    report(capsys, 3, problems, f"{len(TERMINATING)} terminating rows")
    assert problems == []


# -- 4. true Zeno is not caught ------------------------------------------------------


def test_criterion_4_true_zeno_exhausts_depth(capsys):
    problems = []
    cfg = config(TANKS7_ZENO, "happens(switch_left, T)", "--zeno_halt --incremental --incr-max-time 25 --depth 30")
    code, _ = cli_output(cfg)
    run = execute(cfg)
    if code != EXIT_DEPTH:
        problems.append(f"exit {code}, expected {EXIT_DEPTH}")
    if any(r.zeno_report is not None for r in run.results):
        problems.append("the guard fired")
    report(capsys, 4, problems, run.message)
    assert problems == []


# -- 5. incremental driver -----------------------------------------------------------


def test_criterion_5_incremental_fact_sets(capsys):
    problems = []
    pulsing = run_incremental(Engine(load_program([CORPUS / f for f in PULSING_INCR.split()])), Q(35))
    if pulsing.fact_set() != {("fade_in_end", Q(20)), ("fade_out_end", Q(30))}:
        problems.append(f"pulsing facts {pulsing.render()}")
    tanks = run_incremental(Engine(load_program([CORPUS / f for f in TANKS7_PART_INCR.split()])), Q(39, 2))
    times = [t for _, t in tanks.facts]
    if any(a >= b for a, b in zip(times, times[1:])):
        problems.append(f"tank fact times not strictly increasing: {times}")
    if times[:2] != [Q(25, 2), Q(65, 4)]:
        problems.append(f"tank facts start {times[:2]}")
    report(capsys, 5, problems, f"pulsing {pulsing.render()}; tanks {tanks.render()}")
    assert problems == []


# -- 6. relative performance ---------------------------------------------------------


def test_criterion_6_incremental_is_faster(capsys):
    _, duration = timed(config(TANKS7_DURATION, TANKS7_QUERIES))
    _, incr = timed(config(TANKS7_INCR_DURATION, TANKS7_QUERIES, INCR_19_5))
    problems = []
    if incr > duration / 3:
        problems.append(f"incremental run took {incr:.2f} s, more than a third of {duration:.2f} s")
    if max(duration, incr) >= 120:
        problems.append("a run took 120 s or more")
    report(capsys, 6, problems, f"duration only {duration:.2f} s, incremental with duration {incr:.2f} s")
    assert problems == []


# -- 7. constraint core --------------------------------------------------------------


def test_criterion_7_constraint_core(capsys):
    problems = [f"satisfiability mismatch on {s}" for s in satisfiability_mismatches(7, 1000)]
    problems += projection_problems(77, 500)
    report(capsys, 7, problems, "1000 systems, 500 projections")
    assert problems == []


# -- 8. engine soundness sampling ----------------------------------------------------


def test_criterion_8_answers_pass_ground_check(capsys):
    problems, checked = [], 0
    rng = random.Random(8)
    for row in ROWS:
        if row.expected.kind != "ANSWERS":
            continue
        checked += 1
        problems += certify_all(row, rng)
    report(capsys, 8, problems, f"{checked} rows, 3 instances per answer")
    assert problems == []
