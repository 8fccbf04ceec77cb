"""Group fairness measures over a two-valued sensitive attribute.

Each measure compares a small set of per-group rates and reports the absolute
difference between the two groups. The informational ratio is ``min/max``.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .data_model import (
    Dataset,
    DecisionRecord,
    FeatureKind,
    confusion_matrix,
    partition_by_sensitive,
    rates,
)
from .errors import BinningError, DegenerateBins, EmptyOutcomeClass, MissingTarget, UnknownFeature


class Measure(str, Enum):
    INDEPENDENCE = "Independence"
    CONDITIONAL_INDEPENDENCE = "ConditionalIndependence"
    SEPARATION = "Separation"
    SUFFICIENCY = "Sufficiency"


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    UNDEFINED = "Undefined"


@dataclass(frozen=True)
class Tolerance:
    epsilon: float = 0.0
    min_cell: int = 1

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.min_cell < 1:
            raise ValueError(f"min_cell must be >= 1, got {self.min_cell}")


@dataclass(frozen=True)
class Disparity:
    rate_name: str
    difference: Optional[Fraction]
    ratio: Optional[float] = None

    @property
    def defined(self) -> bool:
        return self.difference is not None


@dataclass(frozen=True)
class CellResult:
    key: tuple[str, ...]
    sizes: tuple[int, int]
    per_group_rates: dict
    disparity: Disparity
    verdict: Verdict
    skipped: bool = False


@dataclass(frozen=True)
class GroupMetricResult:
    measure: Measure
    per_group_rates: dict
    disparities: tuple[Disparity, ...]
    verdict: Verdict
    epsilon: float
    cells: Optional[tuple[CellResult, ...]] = None
    reasons: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def compare(name: str, r1: Optional[Fraction], r2: Optional[Fraction]) -> Disparity:
    if r1 is None or r2 is None:
        return Disparity(name, None, None)
    hi, lo = max(r1, r2), min(r1, r2)
    ratio = 1.0 if hi == 0 else float(lo / hi)
    return Disparity(name, abs(r1 - r2), ratio)


def verdict_of(disparities: Sequence[Disparity], epsilon: float) -> Verdict:
    if any(d.defined and d.difference > epsilon for d in disparities):
        return Verdict.FAIL
    if any(not d.defined for d in disparities):
        return Verdict.UNDEFINED
    return Verdict.PASS


def acceptance_rate(records: Sequence[DecisionRecord]) -> Optional[Fraction]:
    if not records:
        return None
    return Fraction(sum(r.predicted for r in records), len(records))


def _group_labels(ds: Dataset) -> tuple[str, str]:
    a1, a2 = ds.schema.sensitive_values
    return a1, a2


# --- Independence ---------------------------------------------------------------

def _acceptance_comparison(g1, g2, tol: Tolerance):
    reasons = []
    r1 = acceptance_rate(g1) if len(g1) >= tol.min_cell else None
    r2 = acceptance_rate(g2) if len(g2) >= tol.min_cell else None
    if r1 is None or r2 is None:
        reasons.append(f"EmptyGroup: group sizes {len(g1)}/{len(g2)} below min_cell={tol.min_cell}")
    return r1, r2, compare("acceptance_rate", r1, r2), reasons


def independence(ds: Dataset, tol: Tolerance = Tolerance()) -> GroupMetricResult:
    """Equal positive-prediction rate Pr{R=1 | A=a} across both groups."""
    a1, a2 = _group_labels(ds)
    g1, g2 = partition_by_sensitive(ds)
    r1, r2, disp, reasons = _acceptance_comparison(g1, g2, tol)
    return GroupMetricResult(
        measure=Measure.INDEPENDENCE,
        per_group_rates={a1: {"acceptance_rate": r1}, a2: {"acceptance_rate": r2}},
        disparities=(disp,),
        verdict=verdict_of([disp], tol.epsilon),
        epsilon=tol.epsilon,
        reasons=tuple(reasons),
    )


# --- Discretisation ---------------------------------------------------------------

class BinStrategy(str, Enum):
    EXPLICIT_EDGES = "explicit_edges"
    QUANTILE = "quantile"
    EQUAL_WIDTH = "equal_width"


@dataclass(frozen=True)
class BinningSpec:
    """How to cut a numeric column into intervals.

    ``edges`` are interior cut points; a value equal to an edge falls in the
    lower bin, so ``edges=[3.0]`` splits into ``<= 3.0`` and ``> 3.0``.
    """

    strategy: BinStrategy = BinStrategy.EXPLICIT_EDGES
    k: Optional[int] = None
    edges: Optional[tuple[float, ...]] = None
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", BinStrategy(self.strategy))
        if self.edges is not None:
            object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        if self.strategy is BinStrategy.EXPLICIT_EDGES:
            if self.edges is None:
                raise BinningError("explicit_edges binning needs edges")
            if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
                raise BinningError(f"edges must be strictly increasing: {self.edges}")
            n_bins = len(self.edges) + 1
        else:
            if self.k is None or self.k < 2:
                raise BinningError(f"{self.strategy.value} binning needs k >= 2")
            n_bins = self.k
        if self.labels is not None and len(self.labels) != n_bins:
            raise BinningError(f"expected {n_bins} labels, got {len(self.labels)}")


@dataclass(frozen=True)
class Binning:
    assignments: tuple[int, ...]
    edges: tuple[float, ...]
    labels: tuple[str, ...]


def _interval_labels(edges: Sequence[float]) -> tuple[str, ...]:
    bounds = ["-inf", *(repr(e) for e in edges), "inf"]
    out = []
    for i, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        out.append(f"({lo}, {hi})" if hi == "inf" else f"({lo}, {hi}]")
    return tuple(out)


def discretize(values: Sequence[float], spec: BinningSpec) -> Binning:
    if len(values) == 0:
        raise BinningError("cannot discretize an empty value list")
    arr = np.asarray(values, dtype=float)
    if spec.strategy is BinStrategy.EXPLICIT_EDGES:
        edges = spec.edges
    else:
        distinct = np.unique(arr)
        if len(distinct) == 1:
            raise DegenerateBins(f"all values equal {distinct[0]!r}; cannot form {spec.k} bins")
        if spec.k > len(distinct):
            raise BinningError(f"k={spec.k} exceeds the {len(distinct)} distinct values")
        lo, hi = float(arr.min()), float(arr.max())
        if spec.strategy is BinStrategy.EQUAL_WIDTH:
            edges = tuple(lo + (hi - lo) * i / spec.k for i in range(1, spec.k))
        else:
            qs = np.quantile(arr, [i / spec.k for i in range(1, spec.k)])
            # merged duplicate quantiles mean fewer, non-empty bins
            edges = tuple(float(q) for q in np.unique(qs) if lo <= q < hi)
    assignments = tuple(bisect.bisect_left(edges, float(v)) for v in arr)
    if spec.labels is not None and len(spec.labels) == len(edges) + 1:
        labels = spec.labels
    else:
        labels = _interval_labels(edges)
    return Binning(assignments, tuple(edges), labels)


# --- Conditional independence --------------------------------------------------------

def _condition_levels(ds: Dataset, attr: str, spec: BinningSpec) -> tuple[list[str], list[str]]:
    """Per-record level label for ``attr`` plus the ordered list of all levels."""
    try:
        kind = ds.schema.kind_of(attr)
    except KeyError:
        raise UnknownFeature(f"condition attribute {attr!r} is not a schema feature") from None
    values = [r.features[attr] for r in ds.records]
    if kind is FeatureKind.NUMERIC:
        if not values:
            return [], []
        binning = discretize(values, spec)
        return [binning.labels[i] for i in binning.assignments], list(binning.labels)
    labels = [str(v) for v in values]
    return labels, sorted(set(labels))


def conditional_independence(
    ds: Dataset,
    condition_attrs: Sequence[str],
    spec: Union[BinningSpec, Mapping[str, BinningSpec], None] = None,
    tol: Tolerance = Tolerance(),
) -> GroupMetricResult:
    """Independence inside every cell of the (discretised) conditioning attributes.

    Cells where either group has fewer than ``min_cell`` records are skipped
    with a warning. The overall disparity is the largest evaluated cell
    disparity.
    """
    a1, a2 = _group_labels(ds)
    per_record_keys = [() for _ in ds.records]
    level_lists = []
    for attr in condition_attrs:
        s = spec.get(attr) if isinstance(spec, Mapping) else spec
        if s is None and ds.schema.kind_of(attr) is FeatureKind.NUMERIC:
            raise BinningError(f"numeric condition {attr!r} needs a binning spec")
        labels, levels = _condition_levels(ds, attr, s)
        per_record_keys = [k + (f"{attr}={lab}",) for k, lab in zip(per_record_keys, labels)]
        level_lists.append([f"{attr}={lab}" for lab in levels])

    buckets: dict[tuple, tuple[list, list]] = {
        key: ([], []) for key in itertools.product(*level_lists)
    }
    for key, r in zip(per_record_keys, ds.records):
        buckets[key][0 if r.sensitive == a1 else 1].append(r)

    cells, warnings = [], []
    for key, (g1, g2) in buckets.items():
        skipped = len(g1) < tol.min_cell or len(g2) < tol.min_cell
        r1, r2 = acceptance_rate(g1), acceptance_rate(g2)
        if skipped:
            disp = Disparity("acceptance_rate", None, None)
            label = ", ".join(key) or "<all>"
            warnings.append(f"cell [{label}] skipped: sizes {len(g1)}/{len(g2)} below min_cell={tol.min_cell}")
        else:
            disp = compare("acceptance_rate", r1, r2)
        cells.append(CellResult(
            key=key,
            sizes=(len(g1), len(g2)),
            per_group_rates={a1: {"acceptance_rate": r1}, a2: {"acceptance_rate": r2}},
            disparity=disp,
            verdict=Verdict.UNDEFINED if skipped else verdict_of([disp], tol.epsilon),
            skipped=skipped,
        ))

    evaluated = [c for c in cells if not c.skipped]
    reasons = []
    if not evaluated:
        verdict = Verdict.UNDEFINED
        overall = Disparity("acceptance_rate", None, None)
        reasons.append("EmptyGroup: no condition cell has both groups above min_cell")
    else:
        worst = max(evaluated, key=lambda c: c.disparity.difference)
        overall = worst.disparity
        verdict = Verdict.FAIL if any(c.verdict is Verdict.FAIL for c in evaluated) else Verdict.PASS

    g1, g2 = partition_by_sensitive(ds)
    return GroupMetricResult(
        measure=Measure.CONDITIONAL_INDEPENDENCE,
        per_group_rates={a1: {"acceptance_rate": acceptance_rate(g1)},
                         a2: {"acceptance_rate": acceptance_rate(g2)}},
        disparities=(overall,),
        verdict=verdict,
        epsilon=tol.epsilon,
        cells=tuple(cells),
        reasons=tuple(reasons),
        warnings=tuple(warnings),
    )


# --- Separation / Sufficiency ---------------------------------------------------------

def _require_targets(ds: Dataset) -> None:
    if any(r.target is None for r in ds.records):
        raise MissingTarget("every record needs a target label for this measure")


def _stratified(ds, tol, measure, strata):
    """Shared body of separation and sufficiency.

    ``strata`` maps a rate name to (stratum predicate, rate attribute).
    """
    _require_targets(ds)
    a1, a2 = _group_labels(ds)
    groups = partition_by_sensitive(ds)
    per_group = {a1: {}, a2: {}}
    disparities, reasons = [], []
    for name, (in_stratum, attr) in strata.items():
        vals = []
        for label, records in zip((a1, a2), groups):
            stratum = [r for r in records if in_stratum(r)]
            rate = getattr(rates(confusion_matrix(records)), attr)
            if len(stratum) < tol.min_cell:
                rate = None
                reasons.append(f"EmptyStratum: {name} for group {label!r} has {len(stratum)} records")
            per_group[label][name] = rate
            vals.append(rate)
        disparities.append(compare(name, *vals))
    return GroupMetricResult(
        measure=measure,
        per_group_rates=per_group,
        disparities=tuple(disparities),
        verdict=verdict_of(disparities, tol.epsilon),
        epsilon=tol.epsilon,
        reasons=tuple(reasons),
    )


def separation(ds: Dataset, tol: Tolerance = Tolerance()) -> GroupMetricResult:
    """Equal true-positive and false-positive rates across groups."""
    return _stratified(ds, tol, Measure.SEPARATION, {
        "tpr": (lambda r: r.target == 1, "tpr"),
        "fpr": (lambda r: r.target == 0, "fpr"),
    })


def sufficiency(ds: Dataset, tol: Tolerance = Tolerance()) -> GroupMetricResult:
    """Equal precision and false omission rate across groups."""
    return _stratified(ds, tol, Measure.SUFFICIENCY, {
        "precision": (lambda r: r.predicted == 1, "precision"),
        "for_rate": (lambda r: r.predicted == 0, "for_rate"),
    })


# --- Negative dominance --------------------------------------------------------------------

@dataclass(frozen=True)
class NegativeDominanceResult:
    protected_value: str
    step1: bool
    step1_ratio: Fraction
    step2: bool
    step2_ratio: Optional[Fraction]
    established: bool
    counts: dict = field(default_factory=dict)

    @property
    def verdict(self) -> Verdict:
        return Verdict.FAIL if self.established else Verdict.PASS


def negative_dominance(ds: Dataset, protected_value: str) -> NegativeDominanceResult:
    """Two-step disadvantage test.

    Step 1: the protected class is a strict majority of the rejected (R=0).
    Step 2: strictly less than half of the protected class is accepted (R=1).
    Ties fail a step. Raw ratios are reported for human judgement.
    """
    if protected_value not in ds.schema.sensitive_values:
        raise ValueError(f"{protected_value!r} is not a declared sensitive value")
    rejected = [r for r in ds.records if r.predicted == 0]
    accepted = [r for r in ds.records if r.predicted == 1]
    if not rejected or not accepted:
        raise EmptyOutcomeClass("negative dominance needs both accepted and rejected records")
    protected = [r for r in ds.records if r.sensitive == protected_value]
    rejected_protected = sum(r.sensitive == protected_value for r in rejected)
    accepted_protected = sum(r.predicted == 1 for r in protected)

    step1_ratio = Fraction(rejected_protected, len(rejected))
    step2_ratio = Fraction(accepted_protected, len(protected)) if protected else None
    step1 = step1_ratio > Fraction(1, 2)
    step2 = step2_ratio is not None and step2_ratio < Fraction(1, 2)
    return NegativeDominanceResult(
        protected_value=protected_value,
        step1=step1,
        step1_ratio=step1_ratio,
        step2=step2,
        step2_ratio=step2_ratio,
        established=step1 and step2,
        counts={
            "rejected": len(rejected),
            "rejected_protected": rejected_protected,
            "protected": len(protected),
            "accepted_protected": accepted_protected,
        },
    )
