"""Cross-measure analyses: exclusivity witness search and proxy scanning."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Optional, Union

import numpy as np
from scipy.stats import rankdata

from .data_model import Dataset, FeatureKind
from .errors import OneGroupOnly, TooLarge

MAX_GROUP_SIZE = 14

MEASURES = ("independence", "separation", "sufficiency")
PAIRS = (
    ("independence", "separation"),
    ("independence", "sufficiency"),
    ("separation", "sufficiency"),
)

Rational = Union[Fraction, int, float, str]


def _as_fraction(q: Rational) -> Fraction:
    if isinstance(q, float):
        return Fraction(q).limit_denominator(10**6)
    return Fraction(q)


def _rate(num: int, den: int) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


def _within(x: Optional[Fraction], y: Optional[Fraction], eps: Fraction) -> bool:
    # a comparison with an undefined side cannot be violated
    return x is None or y is None or abs(x - y) <= eps


@dataclass(frozen=True)
class _GroupStats:
    acceptance: Fraction
    tpr: Optional[Fraction]
    fpr: Optional[Fraction]
    precision: Optional[Fraction]
    for_rate: Optional[Fraction]


def _group_stats(n: int, q: int, a: int, b: int) -> _GroupStats:
    """Rates for a group of n with q qualified, a qualified and b unqualified accepted."""
    u = n - q
    return _GroupStats(
        acceptance=Fraction(a + b, n),
        tpr=_rate(a, q),
        fpr=_rate(b, u),
        precision=_rate(a, a + b),
        for_rate=_rate(q - a, n - a - b),
    )


def measures_hold(s1: _GroupStats, s2: _GroupStats, eps: Fraction) -> dict[str, bool]:
    return {
        "independence": _within(s1.acceptance, s2.acceptance, eps),
        "separation": _within(s1.tpr, s2.tpr, eps) and _within(s1.fpr, s2.fpr, eps),
        "sufficiency": _within(s1.precision, s2.precision, eps) and _within(s1.for_rate, s2.for_rate, eps),
    }


@dataclass(frozen=True)
class ExclusivityWitness:
    """One concrete prediction assignment and the measures it satisfies.

    Qualified individuals come first within each group; ``predictions`` is
    the canonical representative of its count class.
    """

    group_sizes: tuple[int, int]
    base_rates: tuple[Fraction, Fraction]
    targets: tuple[tuple[int, ...], tuple[int, ...]]
    predictions: tuple[tuple[int, ...], tuple[int, ...]]
    holds: dict
    bucket: str

    def recompute(self, eps: Rational = 0) -> dict[str, bool]:
        eps = _as_fraction(eps)
        stats = []
        for y, r in zip(self.targets, self.predictions):
            tp = sum(1 for yi, ri in zip(y, r) if yi and ri)
            fp = sum(1 for yi, ri in zip(y, r) if not yi and ri)
            stats.append(_group_stats(len(y), sum(y), tp, fp))
        return measures_hold(stats[0], stats[1], eps)


@dataclass(frozen=True)
class MeasureSetOutcome:
    measures: tuple[str, ...]
    count: int
    by_bucket: dict
    classes: tuple[tuple[int, int, int, int], ...]
    witness: Optional[ExclusivityWitness] = None

    @property
    def exists(self) -> bool:
        return self.count > 0

    @property
    def nondegenerate_count(self) -> int:
        return self.by_bucket.get("non_degenerate", 0)


@dataclass(frozen=True)
class SearchOutcome:
    n1: int
    n2: int
    q1: Fraction
    q2: Fraction
    eps: Fraction
    total_assignments: int
    joint: MeasureSetOutcome
    pairs: dict = field(default_factory=dict)
    singles: dict = field(default_factory=dict)

    @property
    def joint_satisfier(self) -> Optional[ExclusivityWitness]:
        return self.joint.witness


BUCKETS = ("constant", "perfect", "equal_base_rates", "non_degenerate")


def classify(n1, qual1, n2, qual2, a1, b1, a2, b2) -> str:
    accepted = (a1 + b1, a2 + b2)
    if accepted == (0, 0) or accepted == (n1, n2):
        return "constant"
    if (a1, b1, a2, b2) == (qual1, 0, qual2, 0):
        return "perfect"
    if Fraction(qual1, n1) == Fraction(qual2, n2):
        return "equal_base_rates"
    return "non_degenerate"


def _representative(n, qual, a, b) -> tuple[tuple[int, ...], tuple[int, ...]]:
    y = (1,) * qual + (0,) * (n - qual)
    r = (1,) * a + (0,) * (qual - a) + (1,) * b + (0,) * (n - qual - b)
    return y, r


def exclusivity_witness_search(n1: int, n2: int, q1: Rational, q2: Rational, eps: Rational = 0) -> SearchOutcome:
    """Exhaustively test every prediction assignment on two groups.

    Group i has ``n_i`` members of whom ``q_i * n_i`` are qualified. Rates of an
    assignment depend only on how many qualified and unqualified members of
    each group are accepted, so enumeration runs over those count classes and
    weights each by the number of assignments it stands for; counts are exact
    totals over all ``2**(n1+n2)`` assignments.
    """
    for n in (n1, n2):
        if n > MAX_GROUP_SIZE:
            raise TooLarge(f"group size {n} exceeds {MAX_GROUP_SIZE}")
        if n < 1:
            raise ValueError("group sizes must be positive")
    q1, q2, eps = _as_fraction(q1), _as_fraction(q2), _as_fraction(eps)
    qual = []
    for n, q in ((n1, q1), (n2, q2)):
        k = q * n
        if not 0 <= q <= 1 or k.denominator != 1:
            raise ValueError(f"base rate {q} times group size {n} must be an integer in [0, n]")
        qual.append(int(k))
    Q1, Q2 = qual

    tallies = {}
    for names in [MEASURES, *PAIRS, *((m,) for m in MEASURES)]:
        tallies[names] = {"count": 0, "by_bucket": dict.fromkeys(BUCKETS, 0), "classes": [], "witness": None}

    group1 = [(a, b) for a in range(Q1 + 1) for b in range(n1 - Q1 + 1)]
    group2 = [(a, b) for a in range(Q2 + 1) for b in range(n2 - Q2 + 1)]
    stats1 = {ab: _group_stats(n1, Q1, *ab) for ab in group1}
    stats2 = {ab: _group_stats(n2, Q2, *ab) for ab in group2}

    for (a1, b1), (a2, b2) in itertools.product(group1, group2):
        holds = measures_hold(stats1[a1, b1], stats2[a2, b2], eps)
        weight = comb(Q1, a1) * comb(n1 - Q1, b1) * comb(Q2, a2) * comb(n2 - Q2, b2)
        bucket = classify(n1, Q1, n2, Q2, a1, b1, a2, b2)
        for names, t in tallies.items():
            if not all(holds[m] for m in names):
                continue
            t["count"] += weight
            t["by_bucket"][bucket] += weight
            t["classes"].append((a1, b1, a2, b2))
            current = t["witness"]
            if current is None or (current.bucket != "non_degenerate" and bucket == "non_degenerate"):
                y1, r1 = _representative(n1, Q1, a1, b1)
                y2, r2 = _representative(n2, Q2, a2, b2)
                t["witness"] = ExclusivityWitness(
                    group_sizes=(n1, n2),
                    base_rates=(q1, q2),
                    targets=(y1, y2),
                    predictions=(r1, r2),
                    holds=holds,
                    bucket=bucket,
                )

    def outcome(names):
        t = tallies[names]
        return MeasureSetOutcome(names, t["count"], t["by_bucket"], tuple(t["classes"]), t["witness"])

    return SearchOutcome(
        n1=n1, n2=n2, q1=q1, q2=q2, eps=eps,
        total_assignments=2 ** (n1 + n2),
        joint=outcome(MEASURES),
        pairs={"+".join(p): outcome(p) for p in PAIRS},
        singles={m: outcome((m,)) for m in MEASURES},
    )


# --- proxy scan ----------------------------------------------------------------------

@dataclass(frozen=True)
class ProxyAssociation:
    feature: str
    association: float
    flagged: bool
    method: str


@dataclass(frozen=True)
class ProxyScanResult:
    threshold: float
    entries: tuple[ProxyAssociation, ...]

    @property
    def flagged(self) -> tuple[str, ...]:
        return tuple(e.feature for e in self.entries if e.flagged)


def cramers_v(groups: np.ndarray, values: list) -> float:
    """Cramér's V of the contingency table between group membership and a category."""
    cats = sorted(set(values), key=str)
    if len(cats) < 2:
        return 0.0
    col = {c: i for i, c in enumerate(cats)}
    table = np.zeros((2, len(cats)))
    for g, v in zip(groups, values):
        table[int(g), col[v]] += 1
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    chi2 = float(((table - expected) ** 2 / expected).sum())
    return float(min(1.0, np.sqrt(chi2 / n)))  # min(rows, cols) - 1 == 1 here


def rank_association(groups: np.ndarray, values: np.ndarray) -> float:
    """Absolute Spearman correlation between a numeric column and group membership."""
    rx, ry = rankdata(values), rankdata(groups)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    den = np.sqrt((rx @ rx) * (ry @ ry))
    if den == 0:
        return 0.0
    return float(min(1.0, abs(rx @ ry) / den))


def proxy_scan(ds: Dataset, threshold: float = 0.3) -> ProxyScanResult:
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    a1, _ = ds.schema.sensitive_values
    groups = np.array([0 if r.sensitive == a1 else 1 for r in ds.records])
    if len(ds) < 2 or len(set(groups.tolist())) < 2:
        raise OneGroupOnly("proxy scan needs records from both sensitive groups")
    entries = []
    for f in ds.schema.features:
        values = [r.features[f.name] for r in ds.records]
        if f.kind is FeatureKind.NUMERIC:
            assoc, method = rank_association(groups, np.asarray(values, dtype=float)), "spearman"
        else:
            assoc, method = cramers_v(groups, values), "cramers_v"
        entries.append(ProxyAssociation(f.name, assoc, assoc >= threshold, method))
    return ProxyScanResult(threshold, tuple(entries))
