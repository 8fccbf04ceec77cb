"""Individual fairness: similar individuals should receive similar outputs.

A pair (i, j) violates the condition when ``D(i, j) > L * d(i, j)``, where ``d``
is the input distance and ``D`` the output distance. At ``d = 0`` this demands
identical outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .data_model import Dataset, DecisionRecord, FeatureKind
from .errors import MissingScore, UnknownFeature
from .group_metrics import Verdict

# absorbs float rounding in the weighted mean; real violations are far larger
_SLACK = 1e-12


class Scaling(str, Enum):
    MINMAX = "minmax"
    ZSCORE = "zscore"


class OutputMode(str, Enum):
    LABEL = "label"
    SCORE = "score"


@dataclass(frozen=True)
class DistanceConfig:
    numeric_scaling: Scaling = Scaling.MINMAX
    feature_weights: Mapping[str, float] = field(default_factory=dict)
    lipschitz: float = 1.0
    output_mode: OutputMode = OutputMode.LABEL
    include_sensitive: bool = False

    def __post_init__(self):
        object.__setattr__(self, "numeric_scaling", Scaling(self.numeric_scaling))
        object.__setattr__(self, "output_mode", OutputMode(self.output_mode))
        object.__setattr__(self, "feature_weights", dict(self.feature_weights))
        for name, w in self.feature_weights.items():
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"weight for {name!r} must be finite and >= 0, got {w}")
        if not self.lipschitz > 0:
            raise ValueError(f"lipschitz constant must be > 0, got {self.lipschitz}")


class PairwiseDistance:
    """Input distance with scaling statistics frozen from one dataset.

    The distance is the weighted mean of per-feature distances in [0, 1]:
    scaled absolute difference for numeric features, 0/1 mismatch otherwise.
    Under z-score scaling the numeric term is capped at 1.
    """

    def __init__(self, ds: Dataset, cfg: DistanceConfig):
        schema = ds.schema
        self.cfg = cfg
        kinds = {f.name: f.kind for f in schema.features}
        if cfg.include_sensitive:
            kinds[schema.sensitive_attr] = FeatureKind.CATEGORICAL
        unknown = sorted(set(cfg.feature_weights) - set(kinds))
        if unknown:
            raise UnknownFeature(f"weights refer to unknown features: {unknown}")
        self.weights = {n: float(cfg.feature_weights.get(n, 1.0)) for n in kinds}
        self.total_weight = sum(self.weights.values())
        if self.total_weight <= 0:
            raise ValueError("at least one feature weight must be positive")
        self.kinds = kinds
        self._sensitive = schema.sensitive_attr

        self.scale: dict[str, float] = {}
        for name, kind in kinds.items():
            if kind is not FeatureKind.NUMERIC:
                continue
            col = np.array([r.features[name] for r in ds.records], dtype=float)
            if col.size == 0:
                self.scale[name] = 0.0
            elif cfg.numeric_scaling is Scaling.MINMAX:
                self.scale[name] = float(col.max() - col.min())
            else:
                self.scale[name] = float(col.std())

    def _value(self, r: DecisionRecord, name: str):
        return r.sensitive if name == self._sensitive and name not in r.features else r.features[name]

    def feature_term(self, name: str, x, y) -> float:
        if self.kinds[name] is FeatureKind.NUMERIC:
            span = self.scale[name]
            if span == 0:
                return 0.0
            term = abs(float(x) - float(y)) / span
            return min(term, 1.0) if self.cfg.numeric_scaling is Scaling.ZSCORE else term
        return 0.0 if x == y else 1.0

    def __call__(self, r1: DecisionRecord, r2: DecisionRecord) -> float:
        acc = 0.0
        for name, w in self.weights.items():
            if w:
                acc += w * self.feature_term(name, self._value(r1, name), self._value(r2, name))
        return acc / self.total_weight


def feature_distance(r1: DecisionRecord, r2: DecisionRecord, cfg: DistanceConfig, ds: Dataset) -> float:
    return PairwiseDistance(ds, cfg)(r1, r2)


def output_distance(r1: DecisionRecord, r2: DecisionRecord, cfg: DistanceConfig) -> float:
    if cfg.output_mode is OutputMode.LABEL:
        return float(abs(r1.predicted - r2.predicted))
    if r1.score is None or r2.score is None:
        raise MissingScore("score output mode needs a score on every record")
    return abs(r1.score - r2.score)


@dataclass(frozen=True)
class PairViolation:
    i: int
    j: int
    d: float
    D: float

    def excess(self, lipschitz: float) -> float:
        return self.D - lipschitz * self.d


@dataclass(frozen=True)
class ViolationList:
    pairs: tuple[PairViolation, ...]
    verdict: Verdict
    n_pairs: int
    lipschitz: float
    config: Optional[DistanceConfig] = field(default=None, compare=False)


def is_violation(d: float, D: float, lipschitz: float) -> bool:
    return D - lipschitz * d > _SLACK


def individual_fairness_audit(ds: Dataset, cfg: DistanceConfig = DistanceConfig()) -> ViolationList:
    """Check every unordered pair; violations sorted by descending ``D - L*d``."""
    if len(ds) < 2:
        raise ValueError("individual fairness needs at least two records")
    dist = PairwiseDistance(ds, cfg)
    L = cfg.lipschitz
    found = []
    n_pairs = 0
    for (i, r1), (j, r2) in itertools.combinations(enumerate(ds.records), 2):
        n_pairs += 1
        D = output_distance(r1, r2, cfg)
        if D == 0:
            continue
        d = dist(r1, r2)
        if is_violation(d, D, L):
            found.append(PairViolation(i, j, d, D))
    found.sort(key=lambda p: (-p.excess(L), p.i, p.j))
    return ViolationList(
        pairs=tuple(found),
        verdict=Verdict.PASS if not found else Verdict.FAIL,
        n_pairs=n_pairs,
        lipschitz=L,
        config=cfg,
    )
