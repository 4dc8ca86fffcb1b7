import random

import pytest

from certify import CORPUS, RowCertifier
from zeno_ec.cli import execute, observe, parse_manifest, row_config

ROWS = parse_manifest((CORPUS / "manifest.txt").read_text())
ANSWER_ROWS = [r for r in ROWS if r.expected.kind == "ANSWERS"]


def row_id(row):
    return f"line{row.line}"


@pytest.mark.parametrize("row", ROWS, ids=row_id)
def test_manifest_row(row):
    got = observe(execute(row_config(row, CORPUS)))
    assert got == row.expected


@pytest.mark.parametrize("row", ANSWER_ROWS, ids=row_id)
def test_answers_are_certified(row):
    cert = RowCertifier(row)
    answers = cert.answers()
    assert answers, "expected answers"
    rng = random.Random(row.line)
    for answer in answers:
        for _ in range(3):
            assert cert.certify(answer, rng) == [], answer.render()


def test_certifier_rejects_wrong_answers():
    # answers to not_holdsAt, checked against holdsAt, must all be refuted
    (neg,) = [r for r in ROWS if r.query == "not_holdsAt(light_on, T)"]
    (pos,) = [r for r in ROWS if r.query == "holdsAt(light_on, T)"]
    wrong = RowCertifier(neg).answers()
    cert = RowCertifier(pos)
    rng = random.Random(0)
    for answer in wrong:
        assert cert.certify(answer, rng), answer.render()
