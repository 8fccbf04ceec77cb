from __future__ import annotations

import contextlib

import pytest

from fairaudit.data_model import Dataset, DecisionRecord, FeatureDef, FeatureKind, Schema

SCHEMA = Schema(
    features=(FeatureDef("gpa", FeatureKind.NUMERIC), FeatureDef("degree", FeatureKind.BINARY)),
    sensitive_attr="gender",
    sensitive_values=("female", "male"),
    predicted_col="predicted",
    target_col="target",
)


def make_dataset(rows, schema: Schema = SCHEMA) -> Dataset:
    """rows: iterables of (sensitive, predicted, target[, gpa[, degree]])."""
    records = []
    for row in rows:
        sex, r, y, *rest = row
        gpa = rest[0] if rest else 3.0
        degree = rest[1] if len(rest) > 1 else 1
        records.append(DecisionRecord({"gpa": float(gpa), "degree": degree}, sex, r, y))
    return Dataset(schema, tuple(records))


def group_rows(sex, tp=0, fp=0, tn=0, fn=0):
    return ([(sex, 1, 1)] * tp + [(sex, 1, 0)] * fp + [(sex, 0, 0)] * tn + [(sex, 0, 1)] * fn)


@pytest.fixture
def schema():
    return SCHEMA


# --- acceptance bookkeeping -----------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    try:
        yield
    except BaseException:
        ACCEPTANCE_LINES.append(f"FAIL  criterion {number}: {title}")
        raise
    ACCEPTANCE_LINES.append(f"PASS  criterion {number}: {title}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
