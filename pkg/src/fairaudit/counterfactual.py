"""Linear structural causal models and counterfactual fairness.

Every observed non-root node ``v`` has exactly one latent parent ``U_v`` and a
linear equation without intercept::

    v = sum(c_p * p for p in observed_parents(v)) + c_U * U_v

so abduction is an exact solve: ``U_v = (v - observed part) / c_U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import yaml
from scipy.linalg import solve_triangular

from .data_model import Dataset, DecisionRecord, FeatureKind, Schema, record_value
from .errors import (
    CycleDetected,
    GraphError,
    InsufficientData,
    LatentWithParents,
    OneGroupOnly,
    RankDeficient,
    Unidentifiable,
    ZeroLatentCoefficient,
)
from .group_metrics import Verdict


class NodeKind(str, Enum):
    OBSERVED = "observed"
    LATENT = "latent"


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[tuple[str, NodeKind], ...]
    edges: tuple[tuple[str, str], ...]
    sensitive_node: str
    output_node: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple((n, NodeKind(k)) for n, k in self.nodes))
        object.__setattr__(self, "edges", tuple((p, c) for p, c in self.edges))

    @property
    def kinds(self) -> dict[str, NodeKind]:
        return dict(self.nodes)

    def parents(self, node: str) -> list[str]:
        return [p for p, c in self.edges if c == node]

    def children(self, node: str) -> list[str]:
        return [c for p, c in self.edges if p == node]

    def is_latent(self, node: str) -> bool:
        return self.kinds[node] is NodeKind.LATENT

    def observed_parents(self, node: str) -> list[str]:
        return [p for p in self.parents(node) if not self.is_latent(p)]

    def latent_parents(self, node: str) -> list[str]:
        return [p for p in self.parents(node) if self.is_latent(p)]

    def observed(self) -> list[str]:
        return [n for n, k in self.nodes if k is NodeKind.OBSERVED]

    def endogenous(self) -> list[str]:
        """Observed nodes with at least one parent, in topological order."""
        return [n for n in self.topological_order() if not self.is_latent(n) and self.parents(n)]

    def topological_order(self) -> list[str]:
        ts = TopologicalSorter({n: self.parents(n) for n, _ in self.nodes})
        try:
            order = list(ts.static_order())
        except CycleError as exc:
            raise CycleDetected(f"causal graph has a cycle through {exc.args[1]}") from None
        # static_order is deterministic, but re-rank by declaration order within ties
        position = {n: i for i, (n, _) in enumerate(self.nodes)}
        depth: dict[str, int] = {}
        for n in order:
            depth[n] = 1 + max((depth[p] for p in self.parents(n)), default=-1)
        return sorted(order, key=lambda n: (depth[n], position[n]))

    def descendants(self, node: str) -> set[str]:
        seen, stack = set(), [node]
        while stack:
            for c in self.children(stack.pop()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen


def validate_graph(g: CausalGraph) -> None:
    """Raise a :class:`GraphError` subclass if ``g`` is not usable; else return None."""
    names = [n for n, _ in g.nodes]
    if len(set(names)) != len(names):
        raise GraphError(f"duplicate node names: {names}")
    known = set(names)
    for p, c in g.edges:
        if p not in known or c not in known:
            raise GraphError(f"edge {p}->{c} references an undeclared node")
        if p == c:
            raise CycleDetected(f"self-loop on {p!r}")
    if len(set(g.edges)) != len(g.edges):
        raise GraphError("duplicate edges")
    for role, node in (("sensitive", g.sensitive_node), ("output", g.output_node)):
        if node not in known:
            raise GraphError(f"{role} node {node!r} is not declared")
        if g.is_latent(node):
            raise GraphError(f"{role} node {node!r} must be observed")
    g.topological_order()
    for n, kind in g.nodes:
        if kind is NodeKind.LATENT and g.parents(n):
            raise LatentWithParents(f"latent node {n!r} has parents {g.parents(n)}")
    claimed: dict[str, str] = {}
    for n in g.observed():
        if not g.parents(n):
            continue
        latents = g.latent_parents(n)
        if len(latents) != 1:
            raise Unidentifiable(f"observed node {n!r} has {len(latents)} latent parents; exactly one required")
        u = latents[0]
        if u in claimed:
            raise Unidentifiable(f"latent {u!r} is shared by {claimed[u]!r} and {n!r}")
        claimed[u] = n


@dataclass(frozen=True)
class StructuralEquation:
    child: str
    terms: tuple[tuple[str, float], ...]

    def coefficient(self, parent: str) -> float:
        return dict(self.terms)[parent]


@dataclass(frozen=True)
class FitStat:
    n_records: int
    rss: float
    max_abs_residual: float


@dataclass(frozen=True)
class FittedSCM:
    graph: CausalGraph
    equations: tuple[StructuralEquation, ...]
    fit_stats: Mapping[str, FitStat] = field(default_factory=dict)
    schema: Optional[Schema] = None

    def equation(self, child: str) -> StructuralEquation:
        for eq in self.equations:
            if eq.child == child:
                return eq
        raise KeyError(child)

    def coefficients(self) -> dict[str, dict[str, float]]:
        return {eq.child: dict(eq.terms) for eq in self.equations}


def scm_from_coefficients(
    g: CausalGraph,
    coefficients: Mapping[str, Mapping[str, float]],
    schema: Optional[Schema] = None,
) -> FittedSCM:
    """Build an SCM from declared coefficients (no fitting)."""
    validate_graph(g)
    equations = []
    for child in g.endogenous():
        given = dict(coefficients.get(child, {}))
        parents = g.parents(child)
        if set(given) != set(parents):
            raise GraphError(
                f"coefficients for {child!r} must name exactly its parents {sorted(parents)}, got {sorted(given)}"
            )
        terms = tuple((p, float(given[p])) for p in parents)
        if not all(math.isfinite(c) for _, c in terms):
            raise GraphError(f"non-finite coefficient in equation for {child!r}")
        equations.append(StructuralEquation(child, terms))
    return FittedSCM(g, tuple(equations), {}, schema)


def least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares through the origin via Householder QR."""
    if X.shape[1] == 0:
        return np.zeros(0)
    Q, R = np.linalg.qr(X, mode="reduced")
    return solve_triangular(R, Q.T @ y, lower=False)


def _check_rank(child: str, parents: Sequence[str], X: np.ndarray) -> None:
    # a parent that is constant (or collinear with others) is confounded with the latent's mean
    if X.shape[1] == 0:
        return
    M = np.column_stack([np.ones(X.shape[0]), X])
    if np.linalg.matrix_rank(M) < M.shape[1]:
        raise RankDeficient(f"parents {list(parents)} of {child!r} are constant or collinear")


def fit_scm(
    g: CausalGraph,
    ds: Dataset,
    latent_coefficients: Optional[Mapping[str, float]] = None,
) -> FittedSCM:
    """Fit observed-parent coefficients of every equation by least squares.

    The latent term absorbs the residual. Its coefficient defaults to 1; a
    declared value in ``latent_coefficients`` (keyed by child) is reported
    instead, which rescales the abducted latent values accordingly.
    """
    validate_graph(g)
    schema = ds.schema
    present = {r.sensitive for r in ds.records}
    if len(present) < 2:
        raise OneGroupOnly("fitting needs records from both sensitive groups")
    latent_coefficients = dict(latent_coefficients or {})

    columns = {n: np.array([record_value(schema, r, n) for r in ds.records], dtype=float)
               for n in g.observed()}
    equations, stats = [], {}
    for child in g.endogenous():
        parents = g.observed_parents(child)
        latent = g.latent_parents(child)[0]
        if len(ds) < len(parents) + 1:
            raise InsufficientData(f"equation for {child!r} needs at least {len(parents) + 1} records")
        X = np.column_stack([columns[p] for p in parents]) if parents else np.zeros((len(ds), 0))
        y = columns[child]
        _check_rank(child, parents, X)
        beta = least_squares(X, y)
        residual = y - X @ beta
        scale = float(latent_coefficients.get(child, 1.0))
        if scale == 0:
            raise ZeroLatentCoefficient(f"latent coefficient for {child!r} cannot be zero")
        terms = []
        coef = dict(zip(parents, beta.tolist()))
        for p in g.parents(child):
            terms.append((p, scale if p == latent else float(coef[p])))
        equations.append(StructuralEquation(child, tuple(terms)))
        stats[child] = FitStat(len(ds), float(residual @ residual), float(np.abs(residual).max()))
    return FittedSCM(g, tuple(equations), stats, schema)


# --- abduction / intervention --------------------------------------------------------

@dataclass(frozen=True)
class LatentAssignment:
    values: dict[str, float]


Observation = Union[DecisionRecord, Mapping[str, float]]


def observed_values(scm: FittedSCM, r: Observation) -> dict[str, float]:
    if isinstance(r, Mapping):
        return {n: float(r[n]) for n in scm.graph.observed()}
    if scm.schema is None:
        raise GraphError("SCM has no schema to read a DecisionRecord; pass a mapping of node values")
    return {n: record_value(scm.schema, r, n) for n in scm.graph.observed()}


def _observed_part(scm: FittedSCM, eq: StructuralEquation, values: Mapping[str, float]) -> float:
    g = scm.graph
    return sum(c * values[p] for p, c in eq.terms if not g.is_latent(p))


def abduct(scm: FittedSCM, r: Observation) -> LatentAssignment:
    """Solve every latent exactly from one record's observed values."""
    g = scm.graph
    values = observed_values(scm, r)
    latents = {}
    for child in g.endogenous():
        eq = scm.equation(child)
        u = g.latent_parents(child)[0]
        c = eq.coefficient(u)
        if c == 0:
            raise ZeroLatentCoefficient(f"latent {u!r} has coefficient 0 in the equation for {child!r}")
        latents[u] = (values[child] - _observed_part(scm, eq, values)) / c
    return LatentAssignment(latents)


@dataclass(frozen=True)
class CounterfactualOutcome:
    values: dict[str, float]
    output: float
    record: Optional[DecisionRecord] = None


def _sensitive_code(scm: FittedSCM, value) -> float:
    if isinstance(value, str) and scm.schema is not None:
        return scm.schema.sensitive_code(value)
    return float(value)


def intervene_predict(
    scm: FittedSCM,
    latents: LatentAssignment,
    r: Observation,
    new_sensitive,
) -> CounterfactualOutcome:
    """Set the sensitive node and recompute its descendants with latents held fixed.

    Only numeric features and the score are rewritten in the returned record;
    binary labels are left as observed.
    """
    g = scm.graph
    values = observed_values(scm, r)
    values[g.sensitive_node] = _sensitive_code(scm, new_sensitive)
    affected = g.descendants(g.sensitive_node)
    env = {**values, **latents.values}
    for child in g.endogenous():
        if child not in affected:
            continue
        eq = scm.equation(child)
        env[child] = sum(c * env[p] for p, c in eq.terms)
        values[child] = env[child]

    record = None
    if isinstance(r, DecisionRecord) and scm.schema is not None:
        schema = scm.schema
        features = dict(r.features)
        for f in schema.features:
            if f.kind is FeatureKind.NUMERIC and f.name in values:
                features[f.name] = values[f.name]
        score = values.get(schema.score_col, r.score) if schema.score_col else r.score
        sensitive = new_sensitive if isinstance(new_sensitive, str) else r.sensitive
        record = replace(r, features=features, sensitive=sensitive, score=score)
    return CounterfactualOutcome(values, values[g.output_node], record)


# --- audit --------------------------------------------------------------------------------

class Aggregate(str, Enum):
    MEAN = "mean"
    MAX = "max"


@dataclass(frozen=True)
class CFEntry:
    actual: float
    counterfactual: float
    delta: float


@dataclass(frozen=True)
class CFResult:
    per_record: tuple[CFEntry, ...]
    mean_delta: float
    max_delta: float
    tau: float
    aggregate: Aggregate
    verdict: Verdict
    fit_stats: Mapping[str, FitStat] = field(default_factory=dict)
    coefficients: Mapping[str, Mapping[str, float]] = field(default_factory=dict)


def counterfactual_fairness_audit(
    scm: FittedSCM,
    ds: Dataset,
    tau: float,
    aggregate: Union[Aggregate, str] = Aggregate.MAX,
) -> CFResult:
    """Approximate counterfactual fairness: aggregate |actual - counterfactual| must be <= tau."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    aggregate = Aggregate(aggregate)
    if scm.schema is None:
        scm = replace(scm, schema=ds.schema)
    out = scm.graph.output_node
    entries = []
    for r in ds.records:
        latents = abduct(scm, r)
        actual = observed_values(scm, r)[out]
        cf = intervene_predict(scm, latents, r, ds.schema.other_sensitive(r.sensitive)).output
        entries.append(CFEntry(actual, cf, abs(actual - cf)))
    deltas = [e.delta for e in entries]
    mean = math.fsum(deltas) / len(deltas) if deltas else 0.0
    worst = max(deltas, default=0.0)
    chosen = worst if aggregate is Aggregate.MAX else mean
    return CFResult(
        per_record=tuple(entries),
        mean_delta=mean,
        max_delta=worst,
        tau=tau,
        aggregate=aggregate,
        verdict=Verdict.PASS if chosen <= tau else Verdict.FAIL,
        fit_stats=dict(scm.fit_stats),
        coefficients=scm.coefficients(),
    )


# --- graph file format ----------------------------------------------------------------------

def graph_from_dict(doc: Mapping) -> tuple[CausalGraph, Optional[dict[str, dict[str, float]]]]:
    try:
        nodes = tuple((str(n), NodeKind(k)) for n, k in doc["nodes"].items())
        edges = tuple((str(p), str(c)) for p, c in doc["edges"])
        g = CausalGraph(nodes, edges, str(doc["sensitive"]), str(doc["output"]))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise GraphError(f"malformed graph document: {exc}") from None
    coefs = doc.get("coefficients")
    if coefs is not None:
        coefs = {str(c): {str(p): float(v) for p, v in terms.items()} for c, terms in coefs.items()}
    validate_graph(g)
    return g, coefs


def graph_to_dict(g: CausalGraph, coefficients: Optional[Mapping[str, Mapping[str, float]]] = None) -> dict:
    doc = {
        "sensitive": g.sensitive_node,
        "output": g.output_node,
        "nodes": {n: k.value for n, k in g.nodes},
        "edges": [[p, c] for p, c in g.edges],
    }
    if coefficients is not None:
        doc["coefficients"] = {
            child: {p: float(coefficients[child][p]) for p in g.parents(child)}
            for child in g.endogenous()
        }
    return doc


def load_graph(source: Union[str, Path]) -> tuple[CausalGraph, Optional[dict[str, dict[str, float]]]]:
    """Read a graph file (path) or graph text (YAML string containing a newline)."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text(encoding="utf-8")
    doc = yaml.safe_load(text)
    if not isinstance(doc, Mapping):
        raise GraphError("graph file must hold a mapping")
    return graph_from_dict(doc)


def dump_graph(g: CausalGraph, coefficients: Optional[Mapping[str, Mapping[str, float]]] = None) -> str:
    return yaml.safe_dump(graph_to_dict(g, coefficients), sort_keys=False, default_flow_style=None)
