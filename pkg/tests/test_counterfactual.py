import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from fairaudit.counterfactual import (
    CausalGraph,
    abduct,
    counterfactual_fairness_audit,
    dump_graph,
    fit_scm,
    intervene_predict,
    load_graph,
    observed_values,
    scm_from_coefficients,
    validate_graph,
)
from fairaudit.data_model import Dataset, DecisionRecord
from fairaudit.errors import (
    CycleDetected,
    GraphError,
    LatentWithParents,
    OneGroupOnly,
    RankDeficient,
    Unidentifiable,
    ZeroLatentCoefficient,
)
from fairaudit.group_metrics import Verdict
from fairaudit.synth import BOB_COEFFICIENTS, BOB_GRAPH, BOB_SCHEMA, bob_record

from oracles import normal_equations

BOB = {"gender": 1.0, "gpa": 0.75, "qualification": 0.7}


def bob_scm(coefficients=BOB_COEFFICIENTS):
    return scm_from_coefficients(BOB_GRAPH, coefficients, BOB_SCHEMA)


def graph(edges, latents=("K", "D"), observed=("gender", "gpa", "qualification")):
    nodes = [(n, "observed") for n in observed] + [(n, "latent") for n in latents]
    return CausalGraph(tuple(nodes), tuple(edges), "gender", "qualification")


# --- graph validation ------------------------------------------------------------

def test_hiring_graph_is_valid():
    validate_graph(BOB_GRAPH)


def test_back_edge_without_cycle_is_fine_and_cycle_is_caught():
    validate_graph(graph([("gender", "qualification"), ("K", "qualification")], latents=("K",)))
    with pytest.raises(CycleDetected):
        validate_graph(graph([("gender", "gpa"), ("K", "gpa"), ("gpa", "qualification"),
                              ("D", "qualification"), ("qualification", "gender")]))


def test_two_latent_parents_unidentifiable():
    g = graph([("gender", "gpa"), ("K", "gpa"), ("D", "gpa"), ("gpa", "qualification")])
    with pytest.raises(Unidentifiable):
        validate_graph(g)


def test_shared_latent_and_latent_parents():
    with pytest.raises(Unidentifiable):
        validate_graph(graph([("gender", "gpa"), ("K", "gpa"), ("gpa", "qualification"),
                              ("K", "qualification")], latents=("K",)))
    with pytest.raises(LatentWithParents):
        validate_graph(graph([("gender", "K"), ("K", "gpa"), ("gpa", "qualification"),
                              ("D", "qualification")]))


def test_bad_roles_and_undeclared_nodes():
    with pytest.raises(GraphError):
        validate_graph(CausalGraph((("a", "observed"),), (("a", "b"),), "a", "a"))
    with pytest.raises(GraphError):
        validate_graph(CausalGraph((("a", "latent"), ("y", "observed")), (), "a", "y"))


# --- Bob ---------------------------------------------------------------------------

def test_bob_abduction():
    lat = abduct(bob_scm(), BOB).values
    assert lat["K"] == pytest.approx(0.6875, abs=1e-12)
    assert lat["D"] == pytest.approx(2 / 3, abs=1e-12)
    assert round(lat["K"], 2) == 0.69 and round(lat["D"], 2) == 0.67


def test_bob_intervention():
    scm = bob_scm()
    cf = intervene_predict(scm, abduct(scm, BOB), BOB, 0.0)
    assert cf.values["gpa"] == pytest.approx(0.55, abs=1e-12)
    assert cf.output == pytest.approx(0.62, abs=1e-12)


def test_bob_as_record_uses_schema_encoding():
    scm = bob_scm()
    r = bob_record()
    cf = intervene_predict(scm, abduct(scm, r), r, "female")
    assert cf.record.sensitive == "female"
    assert cf.record.features["gpa"] == pytest.approx(0.55, abs=1e-12)
    assert cf.record.score == pytest.approx(0.62, abs=1e-12)


def test_bob_audit_thresholds():
    ds = Dataset(BOB_SCHEMA, (bob_record(),))
    fail = counterfactual_fairness_audit(bob_scm(), ds, tau=0.05)
    assert fail.per_record[0].delta == pytest.approx(0.08, abs=1e-12)
    assert fail.verdict is Verdict.FAIL
    assert counterfactual_fairness_audit(bob_scm(), ds, tau=0.1).verdict is Verdict.PASS


def test_copies_of_bob_mean_delta():
    ds = Dataset(BOB_SCHEMA, (bob_record(),) * 7)
    res = counterfactual_fairness_audit(bob_scm(), ds, tau=0.1, aggregate="mean")
    assert res.mean_delta == pytest.approx(0.08, abs=1e-12)
    assert res.max_delta == pytest.approx(0.08, abs=1e-12)


def test_zero_latent_coefficient():
    coefs = {"gpa": {"gender": 0.2, "K": 0.0}, "qualification": {"gpa": 0.4, "D": 0.6}}
    with pytest.raises(ZeroLatentCoefficient):
        abduct(bob_scm(coefs), BOB)


def test_coefficients_must_match_parents():
    with pytest.raises(GraphError):
        scm_from_coefficients(BOB_GRAPH, {"gpa": {"gender": 0.2}, "qualification": {"gpa": 0.4, "D": 0.6}})


def test_no_path_from_sensitive_means_zero_deltas():
    g = CausalGraph(
        (("gender", "observed"), ("gpa", "observed"), ("qualification", "observed"),
         ("K", "latent"), ("D", "latent")),
        (("K", "gpa"), ("gpa", "qualification"), ("D", "qualification")),
        "gender", "qualification",
    )
    scm = scm_from_coefficients(g, {"gpa": {"K": 0.9}, "qualification": {"gpa": 0.5, "D": 0.5}}, BOB_SCHEMA)
    ds = Dataset(BOB_SCHEMA, tuple(random_bob_records(random.Random(3), 10)))
    res = counterfactual_fairness_audit(scm, ds, tau=0.0)
    assert all(e.delta == 0 for e in res.per_record)
    assert res.verdict is Verdict.PASS


# --- fitting -----------------------------------------------------------------------

def random_bob_records(rng, n):
    out = []
    for i in range(n):
        sex = "male" if i % 2 else "female"
        gpa = rng.uniform(0, 1)
        score = rng.uniform(0, 1)
        out.append(DecisionRecord({"gpa": gpa}, sex, int(score >= 0.5), None, score))
    return out


def orthogonal_to(v, *basis):
    # Gram-Schmidt in plain floats
    for b in basis:
        bb = sum(x * x for x in b)
        c = sum(x * y for x, y in zip(v, b)) / bb
        v = [x - c * y for x, y in zip(v, b)]
    return v


def test_noiseless_fit_recovers_coefficients():
    rng = random.Random(11)
    n = 40
    A = [float(i % 2) for i in range(n)]
    K = orthogonal_to([rng.uniform(-1, 1) for _ in range(n)], A)
    gpa = [0.2 * a + 0.8 * k for a, k in zip(A, K)]
    D = orthogonal_to([rng.uniform(-1, 1) for _ in range(n)], gpa)
    y = [0.4 * g + 0.6 * d for g, d in zip(gpa, D)]
    ds = unbounded_dataset(A, gpa, y)
    scm = fit_scm(BOB_GRAPH, ds, {"gpa": 0.8, "qualification": 0.6})
    coefs = scm.coefficients()
    assert coefs["gpa"]["gender"] == pytest.approx(0.2, abs=1e-6)
    assert coefs["qualification"]["gpa"] == pytest.approx(0.4, abs=1e-6)
    assert (coefs["gpa"]["K"], coefs["qualification"]["D"]) == (0.8, 0.6)
    lat = abduct(scm, observed_values(scm, ds.records[5]))
    assert lat.values["K"] == pytest.approx(K[5], abs=1e-9)
    assert lat.values["D"] == pytest.approx(D[5], abs=1e-9)


def unbounded_dataset(A, gpa, y):
    """Records whose score column may leave [0, 1]; built directly, not parsed."""
    recs = tuple(DecisionRecord({"gpa": g}, "male" if a else "female", 0, None, v)
                 for a, g, v in zip(A, gpa, y))
    return Dataset(BOB_SCHEMA, recs)


def test_noisy_fit_matches_normal_equations():
    rng = random.Random(5)
    n = 40
    A = [float(i % 2) for i in range(n)]
    gpa = [0.2 * a + 0.8 * rng.gauss(0.5, 0.2) for a in A]
    y = [0.4 * g + 0.6 * rng.gauss(0.5, 0.2) for g in gpa]
    scm = fit_scm(BOB_GRAPH, unbounded_dataset(A, gpa, y))
    for child, cols, target in (("gpa", [A], gpa), ("qualification", [gpa], y)):
        beta, rss = normal_equations(cols, target)
        parent = "gender" if child == "gpa" else "gpa"
        assert scm.coefficients()[child][parent] == pytest.approx(beta[0], abs=1e-9)
        assert scm.fit_stats[child].rss == pytest.approx(rss, abs=1e-9)


def test_constant_parent_rank_deficient():
    n = 10
    A = [float(i % 2) for i in range(n)]
    gpa = [0.5] * n
    y = [0.3 + 0.01 * i for i in range(n)]
    with pytest.raises(RankDeficient):
        fit_scm(BOB_GRAPH, unbounded_dataset(A, gpa, y))


def test_one_group_only():
    ds = unbounded_dataset([1.0] * 5, [0.1, 0.2, 0.3, 0.4, 0.5], [0.5] * 5)
    with pytest.raises(OneGroupOnly):
        fit_scm(BOB_GRAPH, ds)


# --- properties ------------------------------------------------------------------------

unit = st.floats(0, 1, allow_nan=False)
coef = st.floats(0.05, 2.0)


@settings(max_examples=200)
@given(st.sampled_from([0.0, 1.0]), unit, unit, coef, coef, coef, coef)
def test_round_trip_and_double_flip(a, g, y, a1, a2, b1, b2):
    scm = bob_scm({"gpa": {"gender": a1, "K": a2}, "qualification": {"gpa": b1, "D": b2}})
    obs = {"gender": a, "gpa": g, "qualification": y}
    lat = abduct(scm, obs)
    same = intervene_predict(scm, lat, obs, a)
    assert same.values == pytest.approx(obs, abs=1e-12)
    flipped = intervene_predict(scm, lat, obs, 1.0 - a)
    back = intervene_predict(scm, abduct(scm, flipped.values), flipped.values, a)
    assert back.values == pytest.approx(obs, abs=1e-9)


@settings(max_examples=200)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([0.0, 1.0]), coef, coef, coef, coef)
def test_abduction_soundness(k, d, a, a1, a2, b1, b2):
    scm = bob_scm({"gpa": {"gender": a1, "K": a2}, "qualification": {"gpa": b1, "D": b2}})
    gpa = a1 * a + a2 * k
    obs = {"gender": a, "gpa": gpa, "qualification": b1 * gpa + b2 * d}
    lat = abduct(scm, obs).values
    assert lat["K"] == pytest.approx(k, abs=1e-9)
    assert lat["D"] == pytest.approx(d, abs=1e-9)


@given(st.lists(st.tuples(unit, unit), min_size=1, max_size=10))
def test_linear_model_delta_is_product_of_path_coefficients(rows):
    recs = tuple(DecisionRecord({"gpa": g}, "male" if i % 2 else "female", 0, None, y)
                 for i, (g, y) in enumerate(rows))
    res = counterfactual_fairness_audit(bob_scm(), Dataset(BOB_SCHEMA, recs), tau=0.1)
    for e in res.per_record:
        assert e.delta == pytest.approx(0.2 * 0.4, abs=1e-12)
        assert e.delta == pytest.approx(abs(e.actual - e.counterfactual), abs=1e-15)


# --- graph files -----------------------------------------------------------------------

def test_graph_file_round_trip(tmp_path):
    text = dump_graph(BOB_GRAPH, BOB_COEFFICIENTS)
    path = tmp_path / "g.yaml"
    path.write_text(text)
    g, coefs = load_graph(path)
    assert g == BOB_GRAPH and coefs == BOB_COEFFICIENTS
    g2, none = load_graph(dump_graph(BOB_GRAPH))
    assert g2 == BOB_GRAPH and none is None


def test_malformed_graph_file():
    with pytest.raises(GraphError):
        load_graph("sensitive: a\nnodes: [1, 2]\n")
    with pytest.raises(GraphError):
        load_graph("- just\n- a list\n")


def test_fitted_coefficients_export_and_reload():
    rng = random.Random(2)
    ds = Dataset(BOB_SCHEMA, tuple(random_bob_records(rng, 30)))
    scm = fit_scm(BOB_GRAPH, ds)
    g, coefs = load_graph(dump_graph(scm.graph, scm.coefficients()))
    reloaded = scm_from_coefficients(g, coefs, BOB_SCHEMA)
    assert reloaded.coefficients() == scm.coefficients()
    r = replace(ds.records[0])
    assert abduct(reloaded, r) == abduct(scm, r)
