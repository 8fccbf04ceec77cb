"""Deterministic fixtures reproducing the worked hiring examples.

Counts that the examples fix are independent of the seed; the seed only
drives GPA padding values. Within each group qualified applicants take the
lowest indices, and accepted applicants are assigned from the lowest indices
of each stratum, so fixtures are byte-stable.

Reconstruction notes, where only the target rates are fixed:

* fig3 keeps the 10 women / 30 men, 3 / 15 qualified composition: women
  accept 2 of 3 qualified, men 10 of 15, nobody unqualified.
* fig4 uses 3 of 10 women and 9 of 30 men qualified; all qualified are
  accepted plus 1 (women) and 3 (men) unqualified. Precision is 3/4 and 9/12.
  This is one of several valid reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .counterfactual import CausalGraph, NodeKind
from .data_model import Dataset, DecisionRecord, FeatureDef, FeatureKind, Schema
from .errors import UnknownScenario

GRADES_GOOD = (3.3, 3.7, 4.0)
GRADES_BAD = (1.0, 1.3, 1.7, 2.0, 2.3, 2.7, 3.0)
GPA_THRESHOLD = 3.0

BOB_ALPHA = (0.2, 0.8)
BOB_BETA = (0.4, 0.6)


class ScenarioName(str, Enum):
    FIG2_INDEPENDENCE = "fig2_independence"
    FIG3_SEPARATION = "fig3_separation"
    FIG4_SUFFICIENCY = "fig4_sufficiency"
    GPA_CONDITIONAL = "gpa_conditional"
    BOB_COUNTERFACTUAL = "bob_counterfactual"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    dataset: Dataset
    config: dict
    graph: Optional[CausalGraph] = None
    coefficients: Optional[dict] = None
    notes: tuple[str, ...] = field(default_factory=tuple)


HIRING_SCHEMA = Schema(
    features=(FeatureDef("gpa", FeatureKind.NUMERIC),),
    sensitive_attr="gender",
    sensitive_values=("female", "male"),
    predicted_col="accepted",
    target_col="qualified",
)

CONDITIONAL_SCHEMA = Schema(
    features=(FeatureDef("gpa", FeatureKind.NUMERIC),),
    sensitive_attr="gender",
    sensitive_values=("female", "male"),
    predicted_col="accepted",
)

BOB_SCHEMA = Schema(
    features=(FeatureDef("gpa", FeatureKind.NUMERIC),),
    sensitive_attr="gender",
    sensitive_values=("female", "male"),
    predicted_col="accepted",
    score_col="qualification",
)

BOB_GRAPH = CausalGraph(
    nodes=(
        ("gender", NodeKind.OBSERVED),
        ("K", NodeKind.LATENT),
        ("gpa", NodeKind.OBSERVED),
        ("D", NodeKind.LATENT),
        ("qualification", NodeKind.OBSERVED),
    ),
    edges=(("gender", "gpa"), ("K", "gpa"), ("gpa", "qualification"), ("D", "qualification")),
    sensitive_node="gender",
    output_node="qualification",
)

BOB_COEFFICIENTS = {
    "gpa": {"gender": BOB_ALPHA[0], "K": BOB_ALPHA[1]},
    "qualification": {"gpa": BOB_BETA[0], "D": BOB_BETA[1]},
}


def _group(rng, sex: str, n: int, n_qualified: int, accept_qualified: int, accept_unqualified: int):
    records = []
    for i in range(n):
        qualified = i < n_qualified
        if qualified:
            accepted = i < accept_qualified
            gpa = float(rng.choice(GRADES_GOOD))
        else:
            accepted = i - n_qualified < accept_unqualified
            gpa = float(rng.choice(GRADES_BAD))
        records.append(DecisionRecord({"gpa": gpa}, sex, int(accepted), int(qualified)))
    return records


def _figure(rng, women: tuple[int, int, int, int], men: tuple[int, int, int, int]) -> Dataset:
    return Dataset(HIRING_SCHEMA, tuple(_group(rng, "female", *women) + _group(rng, "male", *men)))


def _gpa_conditional(rng) -> Dataset:
    records = []
    for sex, n, n_good, n_accepted in (("female", 400, 160, 32), ("male", 600, 360, 72)):
        for i in range(n):
            good = i < n_good
            gpa = float(rng.choice(GRADES_GOOD if good else GRADES_BAD))
            records.append(DecisionRecord({"gpa": gpa}, sex, int(good and i < n_accepted)))
    return Dataset(CONDITIONAL_SCHEMA, tuple(records))


def bob_record() -> DecisionRecord:
    return DecisionRecord({"gpa": 0.75}, "male", 1, None, 0.7)


def _bob(rng, n: int = 20) -> Dataset:
    a1, a2 = BOB_ALPHA
    b1, b2 = BOB_BETA
    records = [bob_record()]
    for i in range(1, n):
        sex = "female" if i % 2 else "male"
        a = BOB_SCHEMA.sensitive_code(sex)
        k, d = (round(float(x), 4) for x in rng.uniform(0.0, 1.0, size=2))
        gpa = a1 * a + a2 * k
        y = b1 * gpa + b2 * d
        records.append(DecisionRecord({"gpa": gpa}, sex, int(y >= 0.5), None, y))
    return Dataset(BOB_SCHEMA, tuple(records))


def _measures(**enabled) -> dict:
    return {name: {"enabled": True, **params} for name, params in enabled.items()}


def schema_config(schema: Schema) -> dict:
    return {
        "features": [{"name": f.name, "kind": f.kind.value} for f in schema.features],
        "sensitive": {"name": schema.sensitive_attr, "values": list(schema.sensitive_values)},
        "predicted": schema.predicted_col,
        "target": schema.target_col,
        "score": schema.score_col,
        "positive_label": schema.positive_label,
        "negative_label": schema.negative_label,
    }


def default_config(name: str, graph_path: str = "graph.yaml") -> dict:
    """Audit configuration matching the measure each scenario illustrates."""
    name = _resolve(name)
    if name is ScenarioName.FIG2_INDEPENDENCE:
        schema = HIRING_SCHEMA
        measures = _measures(
            independence={"epsilon": 0.0, "min_cell": 1},
            separation={"epsilon": 0.0, "min_cell": 1},
            sufficiency={"epsilon": 0.0, "min_cell": 1},
            negative_dominance={"protected": "female"},
            individual_fairness={"scaling": "minmax", "lipschitz": 1.0, "output_mode": "label"},
            proxy_scan={"threshold": 0.3},
        )
    elif name is ScenarioName.FIG3_SEPARATION:
        schema = HIRING_SCHEMA
        measures = _measures(
            independence={"epsilon": 0.0, "min_cell": 1},
            separation={"epsilon": 0.0, "min_cell": 1},
        )
    elif name is ScenarioName.FIG4_SUFFICIENCY:
        schema = HIRING_SCHEMA
        measures = _measures(sufficiency={"epsilon": 0.0, "min_cell": 1})
    elif name is ScenarioName.GPA_CONDITIONAL:
        schema = CONDITIONAL_SCHEMA
        measures = _measures(
            independence={"epsilon": 0.0, "min_cell": 1},
            conditional_independence={
                "epsilon": 0.0,
                "min_cell": 1,
                "conditions": ["gpa"],
                "binning": {"strategy": "explicit_edges", "edges": [GPA_THRESHOLD], "labels": ["bad", "good"]},
            },
        )
    else:
        schema = BOB_SCHEMA
        measures = _measures(counterfactual_fairness={
            "graph": graph_path, "tau": 0.05, "aggregate": "max", "fit": False,
        })
    return {"schema": schema_config(schema), "measures": measures}


ALIASES = {
    "fig2": ScenarioName.FIG2_INDEPENDENCE,
    "fig3": ScenarioName.FIG3_SEPARATION,
    "fig4": ScenarioName.FIG4_SUFFICIENCY,
    "gpa": ScenarioName.GPA_CONDITIONAL,
    "bob": ScenarioName.BOB_COUNTERFACTUAL,
}


def _resolve(name) -> ScenarioName:
    if name in ALIASES:
        return ALIASES[name]
    try:
        return ScenarioName(name)
    except ValueError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {[s.value for s in ScenarioName]}") from None


def generate(spec: ScenarioSpec) -> Scenario:
    name = _resolve(spec.name)
    rng = np.random.default_rng(spec.seed)
    if name is ScenarioName.FIG2_INDEPENDENCE:
        # (n, qualified, accepted qualified, accepted unqualified)
        ds = _figure(rng, women=(10, 3, 3, 1), men=(30, 15, 12, 0))
        notes = ("40% accepted in both groups; TPR differs (3/3 vs 12/15)",)
    elif name is ScenarioName.FIG3_SEPARATION:
        ds = _figure(rng, women=(10, 3, 2, 0), men=(30, 15, 10, 0))
        notes = ("TPR 2/3 and FPR 0 in both groups",)
    elif name is ScenarioName.FIG4_SUFFICIENCY:
        ds = _figure(rng, women=(10, 3, 3, 1), men=(30, 9, 9, 3))
        notes = ("precision 3/4 and FOR 0 in both groups; minimal-count reconstruction",)
    elif name is ScenarioName.GPA_CONDITIONAL:
        ds = _gpa_conditional(rng)
        notes = ("good-GPA acceptance 32/160 and 72/360; nobody below the threshold accepted",)
    else:
        ds = _bob(rng)
        return Scenario(name.value, ds, default_config(name), BOB_GRAPH, BOB_COEFFICIENTS,
                        ("row 0 is Bob: male, GPA 0.75, qualification 0.7",))
    return Scenario(name.value, ds, default_config(name), notes=notes)
