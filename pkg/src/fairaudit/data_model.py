"""Decision datasets: schema, records, CSV ingestion and confusion-matrix rates.

Labels use one canonical encoding everywhere: 1 is the positive class
(accepted / qualified), 0 the negative class. Rates are exact
:class:`fractions.Fraction` values; a rate whose denominator is zero is
``None`` rather than NaN.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    BadValue, MissingColumn, MissingScore, MissingTarget, SchemaError, UnsupportedCardinality,
)


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BINARY = "binary"


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: FeatureKind

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))


@dataclass(frozen=True)
class Schema:
    """Column layout of a decision dataset.

    ``sensitive_values`` is the ordered pair (a1, a2). Group results are always
    reported in that order.
    """

    features: tuple[FeatureDef, ...]
    sensitive_attr: str
    sensitive_values: tuple[str, ...]
    predicted_col: str
    target_col: Optional[str] = None
    score_col: Optional[str] = None
    positive_label: str = "1"
    negative_label: str = "0"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(
            f if isinstance(f, FeatureDef) else FeatureDef(*f) for f in self.features
        ))
        object.__setattr__(self, "sensitive_values", tuple(str(v) for v in self.sensitive_values))
        if len(self.sensitive_values) != 2:
            raise UnsupportedCardinality(
                f"sensitive attribute {self.sensitive_attr!r} must have exactly two values, "
                f"got {len(self.sensitive_values)}"
            )
        if self.sensitive_values[0] == self.sensitive_values[1]:
            raise SchemaError("sensitive values must be distinct")
        if self.positive_label == self.negative_label:
            raise SchemaError("positive and negative labels must differ")
        names = self.columns
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in schema: {names}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def columns(self) -> tuple[str, ...]:
        cols = [*self.feature_names, self.sensitive_attr, self.predicted_col]
        if self.target_col is not None:
            cols.append(self.target_col)
        if self.score_col is not None:
            cols.append(self.score_col)
        return tuple(cols)

    def kind_of(self, name: str) -> FeatureKind:
        for f in self.features:
            if f.name == name:
                return f.kind
        raise KeyError(name)

    def sensitive_code(self, value: str) -> float:
        """Numeric encoding of a sensitive value for structural equations.

        Values that both parse as numbers keep their numeric meaning;
        otherwise a1 encodes as 0 and a2 as 1.
        """
        try:
            codes = [float(v) for v in self.sensitive_values]
        except ValueError:
            codes = [0.0, 1.0]
        return codes[self.sensitive_values.index(value)]

    def other_sensitive(self, value: str) -> str:
        a1, a2 = self.sensitive_values
        return a2 if value == a1 else a1


@dataclass(frozen=True)
class DecisionRecord:
    features: dict
    sensitive: str
    predicted: int
    target: Optional[int] = None
    score: Optional[float] = None


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    records: tuple[DecisionRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def with_records(self, records: Iterable[DecisionRecord]) -> "Dataset":
        return Dataset(self.schema, tuple(records))


# --- CSV ingestion ------------------------------------------------------------

def _parse_binary(raw: str, schema: Schema, row: int, column: str) -> int:
    v = raw.strip()
    if v in ("1", schema.positive_label):
        return 1
    if v in ("0", schema.negative_label):
        return 0
    raise BadValue(row, column, raw, "expected a binary label")


def _parse_real(raw: str, row: int, column: str) -> float:
    try:
        x = float(raw)
    except ValueError:
        raise BadValue(row, column, raw, "expected a number") from None
    if not math.isfinite(x):
        raise BadValue(row, column, raw, "non-finite number")
    return x


def parse_dataset(csv_text: str, schema: Schema) -> Dataset:
    """Parse comma-separated text with a header row into a :class:`Dataset`.

    Extra columns are ignored. Empty target/score cells become ``None``.
    Row numbers in :class:`BadValue` are 0-based data-row indices.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn(schema.columns[0]) from None
    index = {name: i for i, name in enumerate(header)}
    for col in schema.columns:
        if col not in index:
            raise MissingColumn(col)

    records = []
    for row_no, row in enumerate(reader):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))

        def cell(col):
            return row[index[col]]

        features = {}
        for f in schema.features:
            raw = cell(f.name)
            if f.kind is FeatureKind.NUMERIC:
                features[f.name] = _parse_real(raw, row_no, f.name)
            elif f.kind is FeatureKind.BINARY:
                features[f.name] = _parse_binary(raw, schema, row_no, f.name)
            else:
                if raw == "":
                    raise BadValue(row_no, f.name, raw, "empty category")
                features[f.name] = raw

        sensitive = cell(schema.sensitive_attr).strip()
        if sensitive not in schema.sensitive_values:
            raise BadValue(row_no, schema.sensitive_attr, sensitive,
                           f"expected one of {list(schema.sensitive_values)}")

        predicted = _parse_binary(cell(schema.predicted_col), schema, row_no, schema.predicted_col)
        target = None
        if schema.target_col is not None and cell(schema.target_col).strip() != "":
            target = _parse_binary(cell(schema.target_col), schema, row_no, schema.target_col)
        score = None
        if schema.score_col is not None and cell(schema.score_col).strip() != "":
            score = _parse_real(cell(schema.score_col), row_no, schema.score_col)
            if not 0.0 <= score <= 1.0:
                raise BadValue(row_no, schema.score_col, cell(schema.score_col), "score outside [0, 1]")
        records.append(DecisionRecord(features, sensitive, predicted, target, score))
    return Dataset(schema, tuple(records))


def load_dataset(path: str | Path, schema: Schema) -> Dataset:
    return parse_dataset(Path(path).read_text(encoding="utf-8"), schema)


def serialize_dataset(ds: Dataset) -> str:
    """Canonical CSV text for ``ds``; ``parse_dataset`` inverts it exactly."""
    schema = ds.schema
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema.columns)
    for r in ds.records:
        row = []
        for f in schema.features:
            v = r.features[f.name]
            row.append(repr(float(v)) if f.kind is FeatureKind.NUMERIC else str(v))
        row += [r.sensitive, str(r.predicted)]
        if schema.target_col is not None:
            row.append("" if r.target is None else str(r.target))
        if schema.score_col is not None:
            row.append("" if r.score is None else repr(float(r.score)))
        writer.writerow(row)
    return buf.getvalue()


# --- grouping and quality measures ---------------------------------------------

def partition_by_sensitive(ds: Dataset) -> tuple[list[DecisionRecord], list[DecisionRecord]]:
    a1, _ = ds.schema.sensitive_values
    first, second = [], []
    for r in ds.records:
        (first if r.sensitive == a1 else second).append(r)
    return first, second


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion-matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_matrix(records: Iterable[DecisionRecord]) -> ConfusionMatrix:
    tp = fp = tn = fn = 0
    for r in records:
        if r.target is None:
            raise MissingTarget("record without a target label in a ground-truth measure")
        if r.predicted == 1:
            if r.target == 1:
                tp += 1
            else:
                fp += 1
        elif r.target == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(num: int, den: int) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


@dataclass(frozen=True)
class QualityRates:
    accuracy: Optional[Fraction] = None
    tpr: Optional[Fraction] = None
    tnr: Optional[Fraction] = None
    fpr: Optional[Fraction] = None
    fnr: Optional[Fraction] = None
    precision: Optional[Fraction] = None
    for_rate: Optional[Fraction] = None

    def as_dict(self) -> dict[str, Optional[Fraction]]:
        return {
            "accuracy": self.accuracy, "tpr": self.tpr, "tnr": self.tnr, "fpr": self.fpr,
            "fnr": self.fnr, "precision": self.precision, "for_rate": self.for_rate,
        }


def rates(cm: ConfusionMatrix) -> QualityRates:
    return QualityRates(
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        tpr=_ratio(cm.tp, cm.tp + cm.fn),
        tnr=_ratio(cm.tn, cm.fp + cm.tn),
        fpr=_ratio(cm.fp, cm.fp + cm.tn),
        fnr=_ratio(cm.fn, cm.tp + cm.fn),
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        for_rate=_ratio(cm.fn, cm.fn + cm.tn),
    )


def record_value(schema: Schema, record: DecisionRecord, name: str) -> float:
    """Numeric value of column ``name`` in ``record`` (used by structural models)."""
    if name == schema.sensitive_attr:
        return schema.sensitive_code(record.sensitive)
    if name == schema.predicted_col:
        return float(record.predicted)
    if name == schema.target_col:
        if record.target is None:
            raise MissingTarget(f"record has no value for {name!r}")
        return float(record.target)
    if name == schema.score_col:
        if record.score is None:
            raise MissingScore(f"record has no value for {name!r}")
        return float(record.score)
    if name in record.features:
        v = record.features[name]
        try:
            return float(v)
        except (TypeError, ValueError):
            raise SchemaError(f"column {name!r} is not numeric") from None
    raise MissingColumn(name)


def schema_from_columns(
    features: Sequence[tuple[str, str]],
    sensitive: str,
    values: Sequence[str],
    predicted: str,
    target: Optional[str] = None,
    score: Optional[str] = None,
    positive_label: str = "1",
    negative_label: str = "0",
) -> Schema:
    return Schema(
        features=tuple(FeatureDef(n, FeatureKind(k)) for n, k in features),
        sensitive_attr=sensitive,
        sensitive_values=tuple(values),
        predicted_col=predicted,
        target_col=target,
        score_col=score,
        positive_label=positive_label,
        negative_label=negative_label,
    )
