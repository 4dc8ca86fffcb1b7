"""Command-line front end and golden-corpus runner.

Exit codes: 0 answers found, 1 no answer, 2 Zeno halt, 3 parse or usage
error, 4 depth limit exhausted, 5 incremental-mode error.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .engine import DEFAULT_DEPTH_LIMIT, DepthExhausted, Engine, EngineError, SolveOptions, ZenoHalt
from .incremental import IncrementalError, max_time_of, query_with_kb, run_incremental
from .surface import ParseError, format_query, load_program, parse_goal_text
from .zeno import format_interval

EXIT_ANSWERS = 0
EXIT_NO_ANSWER = 1
EXIT_ZENO = 2
EXIT_PARSE = 3
EXIT_DEPTH = 4
EXIT_INCREMENTAL = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as a Zeno halt
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zeno-ec", description="Event-calculus reasoner over rational time with Zeno detection.")
    p.add_argument("files", nargs="*", help="model and narrative files, concatenated in order")
    p.add_argument("--query", "-q", action="append", default=[], help="goal to solve (repeatable)")
    p.add_argument("--zeno_halt", "--zeno-halt", dest="zeno_halt", action="store_true",
                   help="halt when a Zeno-descending chain of events is detected")
    p.add_argument("--incremental", action="store_true",
                   help="compute incr_event occurrences forward in time before querying")
    p.add_argument("--incr-max-time", dest="incr_max_time", default=None,
                   help="horizon for --incremental (overrides !incr_max_time)")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH_LIMIT, help="derivation depth limit")
    p.add_argument("--answers", type=int, default=None, help="stop after this many answers")
    p.add_argument("--json", action="store_true", help="print one JSON object per query")
    p.add_argument("--no-ec", dest="ec_preprocess", action="store_false",
                   help="do not generate can_* facts from effect clauses")
    p.add_argument("--corpus", default=None, help="run a golden corpus manifest instead of a query")
    return p


@dataclass
class RunConfig:
    files: list
    queries: list = field(default_factory=list)
    zeno_halt: bool = False
    incremental: bool = False
    ec_preprocess: bool = True
    depth_limit: int = DEFAULT_DEPTH_LIMIT
    answer_limit: int | None = None
    json: bool = False
    incr_max_time: str | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        if args.depth < 1:
            raise UsageError("--depth must be at least 1")
        if args.answers is not None and args.answers < 1:
            raise UsageError("--answers must be at least 1")
        return cls(
            files=list(args.files),
            queries=list(args.query),
            zeno_halt=args.zeno_halt,
            incremental=args.incremental,
            ec_preprocess=args.ec_preprocess,
            depth_limit=args.depth,
            answer_limit=args.answers,
            json=args.json,
            incr_max_time=args.incr_max_time,
        )


@dataclass
class QueryResult:
    query: str
    answers: list = field(default_factory=list)
    status: int = EXIT_NO_ANSWER
    zeno_report: object = None
    message: str = ""
    nodes: int = 0
    time_ms: int = 0

    def to_json(self, facts=None) -> dict:
        out = {
            "query": self.query,
            "answers": self.answers,
            "zeno_report": _report_json(self.zeno_report),
            "stats": {"nodes": self.nodes, "time_ms": self.time_ms},
        }
        if self.message:
            out["error"] = self.message
        if facts is not None:
            out["incremental_facts"] = facts
        return out


@dataclass
class RunResult:
    status: int
    results: list = field(default_factory=list)
    facts: list | None = None
    message: str = ""
    nodes: int = 0
    time_ms: int = 0


def _report_json(report) -> dict | None:
    if report is None:
        return None
    from .terms import format_term

    lo, hi = report.shared_interval
    return {
        "event": format_term(report.event),
        "older_var": report.older_var,
        "newer_var": report.newer_var,
        "current_var": report.current_var,
        "shared_interval": format_interval(lo, hi),
        "node_depths": list(report.node_depths),
        "text": report.text,
    }


def execute(config: RunConfig, on_answer=None, on_done=None) -> RunResult:
    """Run every query of ``config``; ``on_answer(result, text)`` streams answers
    and ``on_done(result)`` follows each finished query."""
    start = time.perf_counter()
    stats: dict = {}

    def finish(result: RunResult) -> RunResult:
        result.nodes = stats.get("nodes", 0)
        result.time_ms = int((time.perf_counter() - start) * 1000)
        return result

    if not config.files:
        return finish(RunResult(EXIT_PARSE, message="no input files"))
    try:
        program = load_program(config.files)
        queries = [parse_goal_text(q) for q in config.queries] or list(program.queries)
        engine = Engine(program, ec_preprocess=config.ec_preprocess)
    except (ParseError, OSError) as exc:
        return finish(RunResult(EXIT_PARSE, message=str(exc)))
    if not queries:
        return finish(RunResult(EXIT_PARSE, message="no query given (use --query or a ?- line)"))
    options = SolveOptions(
        zeno_halt=config.zeno_halt, depth_limit=config.depth_limit, answer_limit=config.answer_limit, stats=stats
    )
    run = RunResult(EXIT_ANSWERS)
    state = None
    if config.incremental:
        try:
            max_time = max_time_of(queries[0], config.incr_max_time)
            state = run_incremental(engine, max_time, options)
        except (IncrementalError, ValueError, ArithmeticError) as exc:
            run.status, run.message = EXIT_INCREMENTAL, str(exc)
            return finish(run)
        except ZenoHalt as exc:
            run.status, run.message = EXIT_ZENO, str(exc)
            run.results.append(QueryResult("incremental loop", status=EXIT_ZENO, zeno_report=exc.report))
            finish(run)
            run.results[-1].nodes, run.results[-1].time_ms = run.nodes, run.time_ms
            return run
        except DepthExhausted as exc:
            run.status, run.message = EXIT_DEPTH, str(exc)
            return finish(run)
        run.facts = state.render()
    any_failed = False
    for query in queries:
        result = QueryResult(format_query(query).removeprefix("?- ").rstrip("."))
        run.results.append(result)
        nodes_before, query_start = stats.get("nodes", 0), time.perf_counter()
        try:
            if state is not None:
                stream = query_with_kb(engine, state, query.goals, options)
            else:
                stream = engine.solve(query, options)
            for answer in stream:
                text = answer.render()
                result.answers.append(text)
                if on_answer is not None:
                    on_answer(result, text)
            result.status = EXIT_ANSWERS if result.answers else EXIT_NO_ANSWER
        except ZenoHalt as exc:
            result.status, result.zeno_report, result.message = EXIT_ZENO, exc.report, str(exc)
        except DepthExhausted as exc:
            result.status, result.message = EXIT_DEPTH, str(exc)
        except IncrementalError as exc:
            result.status, result.message = EXIT_INCREMENTAL, str(exc)
        except EngineError as exc:
            result.status, result.message = EXIT_PARSE, str(exc)
        result.nodes = stats.get("nodes", 0) - nodes_before
        result.time_ms = int((time.perf_counter() - query_start) * 1000)
        if on_done is not None:
            on_done(result)
        if result.status not in (EXIT_ANSWERS, EXIT_NO_ANSWER):
            run.status = result.status
            return finish(run)
        any_failed = any_failed or result.status == EXIT_NO_ANSWER
    run.status = EXIT_NO_ANSWER if any_failed else EXIT_ANSWERS
    return finish(run)


def run_query_main(config: RunConfig, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    several = len(config.queries) > 1

    def stream(result, text):
        if not config.json:
            if several and len(result.answers) == 1:
                print(f"?- {result.query}.", file=out)
            print(text, file=out, flush=True)

    def done(result):
        if not config.json and result.status == EXIT_NO_ANSWER:
            if several:
                print(f"?- {result.query}.", file=out)
            print("no", file=out, flush=True)

    run = execute(config, stream, done)
    if run.facts is not None and not config.json:
        for f in run.facts:
            print(f"% {f}", file=err)
    if config.json:
        for r in run.results:
            print(json.dumps(r.to_json(run.facts)), file=out)
        if not run.results:
            payload = {"answers": [], "zeno_report": None, "stats": {"nodes": run.nodes, "time_ms": run.time_ms}}
            if run.message:
                payload["error"] = run.message
            if run.facts is not None:
                payload["incremental_facts"] = run.facts
            print(json.dumps(payload), file=out)
    if run.status == EXIT_ZENO:
        print(run.message or next(r.message for r in run.results if r.message), file=err)
    elif run.status not in (EXIT_ANSWERS, EXIT_NO_ANSWER):
        message = run.message or next((r.message for r in run.results if r.message), "")
        print(f"error: {message}", file=err)
    return run.status


# -- golden corpus -------------------------------------------------------------------


@dataclass
class Expectation:
    kind: str  # ANSWERS, NO_ANSWER, ZENO_HALT or DEPTH_EXHAUSTED
    answers: list = field(default_factory=list)
    event: str = ""

    def render(self) -> str:
        if self.kind == "ANSWERS":
            return f"ANSWERS({' ; '.join(self.answers)})"
        if self.kind == "ZENO_HALT":
            return f"ZENO_HALT({self.event})"
        return self.kind


@dataclass
class ManifestRow:
    line: int
    files: list
    query: str
    flags: list
    expected: Expectation


class ManifestError(Exception):
    pass


def parse_expectation(text: str) -> Expectation:
    text = text.strip()
    if text in ("NO_ANSWER", "DEPTH_EXHAUSTED"):
        return Expectation(text)
    for kind in ("ANSWERS", "ZENO_HALT"):
        if text.startswith(kind + "(") and text.endswith(")"):
            inner = text[len(kind) + 1:-1].strip()
            if kind == "ANSWERS":
                answers = [a.strip() for a in inner.split(";")]
                if not inner or not all(answers):
                    raise ManifestError(f"empty answer in {text!r}")
                return Expectation(kind, answers=answers)
            if not inner:
                raise ManifestError(f"ZENO_HALT needs an event: {text!r}")
            return Expectation(kind, event=inner)
    raise ManifestError(f"unknown expectation {text!r}")


def parse_manifest(text: str) -> list:
    rows = []
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise ManifestError(f"line {number}: expected 'files | query | flags | expectation'")
        files, query, flags, expected = parts
        if not files.split():
            raise ManifestError(f"line {number}: no files")
        try:
            expectation = parse_expectation(expected)
        except ManifestError as exc:
            raise ManifestError(f"line {number}: {exc}") from None
        rows.append(ManifestRow(number, files.split(), query, shlex.split(flags), expectation))
    return rows


def observe(run: RunResult) -> Expectation:
    """The outcome of a one-query run in manifest terms."""
    if run.status == EXIT_ZENO:
        report = next((r.zeno_report for r in run.results if r.zeno_report is not None), None)
        from .terms import format_term

        return Expectation("ZENO_HALT", event=format_term(report.event) if report else "?")
    if run.status == EXIT_DEPTH:
        return Expectation("DEPTH_EXHAUSTED")
    if run.status == EXIT_ANSWERS:
        return Expectation("ANSWERS", answers=list(run.results[-1].answers))
    if run.status == EXIT_NO_ANSWER:
        return Expectation("NO_ANSWER")
    return Expectation(f"ERROR({run.message})")


def row_config(row: ManifestRow, base: Path) -> RunConfig:
    args = build_parser().parse_args([str(base / f) for f in row.files] + ["--query", row.query] + row.flags)
    return RunConfig.from_args(args)


def run_corpus(manifest: str | Path, out=None) -> int:
    """Run every manifest row and print a pass/fail table; 0 iff all pass."""
    out = out or sys.stdout
    path = Path(manifest)
    try:
        rows = parse_manifest(path.read_text(encoding="utf-8"))
    except (OSError, ManifestError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_PARSE
    failed = 0
    for row in rows:
        start = time.perf_counter()
        try:
            got = observe(execute(row_config(row, path.parent)))
        except UsageError as exc:
            got = Expectation(f"ERROR({exc})")
        seconds = time.perf_counter() - start
        ok = got == row.expected
        failed += not ok
        flags = " ".join(row.flags)
        print(f"{'PASS' if ok else 'FAIL'} line {row.line:<4} {seconds:7.2f}s  {' '.join(row.files)} | {row.query} | {flags}",
              file=out, flush=True)
        if not ok:
            print(f"     expected {row.expected.render()}", file=out)
            print(f"     got      {got.render()}", file=out)
    print(f"{len(rows) - failed}/{len(rows)} rows passed", file=out)
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.corpus is not None:
            return run_corpus(args.corpus)
        config = RunConfig.from_args(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return run_query_main(config)


if __name__ == "__main__":
    sys.exit(main())
