from dataclasses import replace
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from fairaudit.data_model import Dataset, DecisionRecord, FeatureDef, FeatureKind, Schema
from fairaudit.errors import MissingScore, UnknownFeature
from fairaudit.group_metrics import Verdict
from fairaudit.individual_metrics import (
    DistanceConfig,
    PairwiseDistance,
    feature_distance,
    individual_fairness_audit,
    output_distance,
)

FOUR = Schema(
    features=(FeatureDef("gpa", FeatureKind.NUMERIC), FeatureDef("degree", FeatureKind.BINARY),
              FeatureDef("city", FeatureKind.CATEGORICAL), FeatureDef("years", FeatureKind.NUMERIC)),
    sensitive_attr="gender",
    sensitive_values=("female", "male"),
    predicted_col="r",
    score_col="s",
)


def rec(gpa, degree=0, city="a", years=1.0, sex="female", r=0, s=None):
    return DecisionRecord({"gpa": float(gpa), "degree": degree, "city": city, "years": float(years)},
                          sex, r, None, s)


def ds_of(*records):
    return Dataset(FOUR, tuple(records))


def test_identical_records_distance_zero():
    a = rec(3.0)
    ds = ds_of(a, rec(1.0), rec(4.0))
    assert feature_distance(a, a, DistanceConfig(), ds) == 0


def test_one_binary_mismatch_of_four_features():
    a, b = rec(3.0, degree=0), rec(3.0, degree=1)
    assert feature_distance(a, b, DistanceConfig(), ds_of(a, b)) == 0.25


def test_minmax_extremes_single_feature():
    a, b = rec(1.0), rec(5.0)
    ds = ds_of(a, b, rec(3.0))
    cfg = DistanceConfig(feature_weights={"degree": 0, "city": 0, "years": 0})
    assert feature_distance(a, b, cfg, ds) == 1.0


def test_sensitive_excluded_unless_requested():
    a, b = rec(2.0, sex="female"), rec(2.0, sex="male")
    ds = ds_of(a, b)
    assert feature_distance(a, b, DistanceConfig(), ds) == 0
    assert feature_distance(a, b, DistanceConfig(include_sensitive=True), ds) == pytest.approx(0.2)


def test_unknown_weight_and_bad_config():
    a = rec(1.0)
    with pytest.raises(UnknownFeature):
        feature_distance(a, a, DistanceConfig(feature_weights={"height": 1.0}), ds_of(a))
    with pytest.raises(ValueError):
        DistanceConfig(lipschitz=0)
    with pytest.raises(ValueError):
        DistanceConfig(feature_weights={"gpa": -1})
    with pytest.raises(ValueError):
        PairwiseDistance(ds_of(a), DistanceConfig(feature_weights={n: 0 for n in FOUR.feature_names}))


def test_output_distance_label_and_score():
    cfg = DistanceConfig()
    assert output_distance(rec(1, r=1), rec(2, r=1), cfg) == 0
    assert output_distance(rec(1, r=1), rec(2, r=0), cfg) == 1
    score = DistanceConfig(output_mode="score")
    assert output_distance(rec(1, s=0.7), rec(1, s=0.62), score) == pytest.approx(0.08, abs=1e-12)
    with pytest.raises(MissingScore):
        output_distance(rec(1, s=0.7), rec(1), score)


def test_constant_output_no_violations():
    res = individual_fairness_audit(ds_of(rec(1.0, r=1), rec(2.0, r=1), rec(4.0, r=1)))
    assert res.pairs == () and res.verdict is Verdict.PASS and res.n_pairs == 3


def test_identical_features_opposite_labels():
    res = individual_fairness_audit(ds_of(rec(2.0, r=1), rec(2.0, r=0)))
    assert len(res.pairs) == 1
    p = res.pairs[0]
    assert (p.i, p.j, p.d, p.D) == (0, 1, 0.0, 1.0)
    assert res.verdict is Verdict.FAIL


def test_five_records_one_near_pair():
    # records 1 and 2 differ only by 0.4 in gpa (d = 0.1); every other
    # opposite-label pair differs maximally in all four features (d = 1)
    far = dict(degree=1, years=1.0, r=1)
    ds = ds_of(rec(1.0, city="b", **far), rec(0.0, years=0.0, r=0), rec(0.4, years=0.0, r=1),
               rec(1.0, city="c", **far), rec(1.0, city="b", **far))
    res = individual_fairness_audit(ds, DistanceConfig(lipschitz=1))
    assert [(p.i, p.j) for p in res.pairs] == [(1, 2)]
    assert res.pairs[0].d == pytest.approx(0.1)
    assert res.n_pairs == 10


def test_too_few_records():
    with pytest.raises(ValueError):
        individual_fairness_audit(ds_of(rec(1.0)))


def test_violations_sorted_by_excess():
    ds = ds_of(rec(0.0, r=0), rec(0.0, r=1), rec(0.5, r=0), rec(1.0, r=1))
    cfg = DistanceConfig(feature_weights={"degree": 0, "city": 0, "years": 0}, lipschitz=1)
    excess = [p.excess(1) for p in individual_fairness_audit(ds, cfg).pairs]
    assert excess == sorted(excess, reverse=True)


def test_outlier_changes_distances():
    a, b = rec(1.0), rec(2.0)
    cfg = DistanceConfig(feature_weights={"degree": 0, "city": 0, "years": 0})
    before = feature_distance(a, b, cfg, ds_of(a, b, rec(3.0)))
    after = feature_distance(a, b, cfg, ds_of(a, b, rec(3.0), rec(11.0)))
    assert before == 0.5 and after == 0.1


def test_zscore_terms_capped():
    a, b = rec(0.0), rec(100.0)
    cfg = DistanceConfig(numeric_scaling="zscore", feature_weights={"degree": 0, "city": 0, "years": 0})
    assert feature_distance(a, b, cfg, ds_of(a, b)) == 1.0


# --- properties and brute-force oracle ---------------------------------------------------

records = st.builds(
    rec,
    gpa=st.sampled_from([0.0, 1.0, 2.5, 3.0, 3.7, 4.0]),
    degree=st.integers(0, 1),
    city=st.sampled_from(["a", "b", "c"]),
    years=st.integers(0, 20),
    sex=st.sampled_from(["female", "male"]),
    r=st.integers(0, 1),
)
weights = st.fixed_dictionaries({n: st.integers(0, 3) for n in FOUR.feature_names}).filter(
    lambda w: sum(w.values()) > 0)


def oracle_violations(ds, w, L):
    """Exact-rational pair check with minmax scaling, written from scratch."""
    cols = {n: [Fraction(r.features[n]) for r in ds.records] for n in ("gpa", "years")}
    span = {n: max(v) - min(v) for n, v in cols.items()}
    total = sum(w.values())
    out = set()
    for i, j in combinations(range(len(ds)), 2):
        a, b = ds.records[i], ds.records[j]
        d = Fraction(0)
        for n in FOUR.feature_names:
            if n in span:
                term = abs(cols[n][i] - cols[n][j]) / span[n] if span[n] else 0
            else:
                term = a.features[n] != b.features[n]
            d += w[n] * term
        d /= total
        if abs(a.predicted - b.predicted) > Fraction(L) * d:
            out.add((i, j))
    return out


@settings(max_examples=200, deadline=None)
@given(st.lists(records, min_size=2, max_size=30), weights, st.sampled_from([0.5, 1.0, 2.0]))
def test_audit_matches_all_pairs_oracle(recs, w, L):
    ds = ds_of(*recs)
    res = individual_fairness_audit(ds, DistanceConfig(feature_weights=w, lipschitz=L))
    assert {(p.i, p.j) for p in res.pairs} == oracle_violations(ds, w, L)


@settings(max_examples=100)
@given(st.lists(records, min_size=3, max_size=12), weights, st.data())
def test_metric_axioms(recs, w, data):
    ds = ds_of(*recs)
    dist = PairwiseDistance(ds, DistanceConfig(feature_weights=w))
    i, j, k = (data.draw(st.integers(0, len(recs) - 1)) for _ in range(3))
    x, y, z = recs[i], recs[j], recs[k]
    assert dist(x, x) == 0
    assert dist(x, y) == dist(y, x) >= 0
    assert 0 <= dist(x, y) <= 1 + 1e-12
    assert dist(x, z) <= dist(x, y) + dist(y, z) + 1e-12


@settings(max_examples=100)
@given(st.lists(records, min_size=2, max_size=15), st.randoms())
def test_reordering_invariance(recs, rnd):
    perm = list(range(len(recs)))
    rnd.shuffle(perm)
    a = individual_fairness_audit(ds_of(*recs))
    b = individual_fairness_audit(ds_of(*(recs[p] for p in perm)))

    def as_set(res, index):
        return {frozenset((index[p.i], index[p.j])) for p in res.pairs}

    assert as_set(a, list(range(len(recs)))) == as_set(b, perm)


@given(st.lists(records, min_size=2, max_size=10))
def test_constant_relabel_has_no_violations(recs):
    ds = ds_of(*(replace(r, predicted=1) for r in recs))
    assert individual_fairness_audit(ds).verdict is Verdict.PASS
