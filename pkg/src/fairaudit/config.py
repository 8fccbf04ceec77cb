"""Audit configuration files (YAML).

See ``docs/config.md`` for the grammar. Parsing fills every default so the
normalised mapping doubles as the report's configuration snapshot.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .data_model import FeatureDef, FeatureKind, Schema
from .errors import ConfigError, FairAuditError

MEASURE_DEFAULTS: dict[str, dict[str, Any]] = {
    "independence": {"epsilon": 0.0, "min_cell": 1},
    "conditional_independence": {"epsilon": 0.0, "min_cell": 1, "conditions": [], "binning": None},
    "separation": {"epsilon": 0.0, "min_cell": 1},
    "sufficiency": {"epsilon": 0.0, "min_cell": 1},
    "negative_dominance": {"protected": None},
    "individual_fairness": {
        "scaling": "minmax", "weights": {}, "lipschitz": 1.0,
        "output_mode": "label", "include_sensitive": False,
    },
    "counterfactual_fairness": {"graph": None, "tau": 0.0, "aggregate": "max", "fit": False},
    "proxy_scan": {"threshold": 0.3},
}

REQUIRED = {
    "negative_dominance": ("protected",),
    "counterfactual_fairness": ("graph",),
}


@dataclass(frozen=True)
class AuditConfig:
    schema: Schema
    measures: dict[str, dict[str, Any]]
    output: dict[str, Any]
    base_dir: Path
    raw_schema: dict

    def enabled(self) -> list[str]:
        return [m for m in MEASURE_DEFAULTS if m in self.measures]

    def snapshot(self) -> dict:
        return {
            "schema": copy.deepcopy(self.raw_schema),
            "measures": copy.deepcopy(self.measures),
            "output": copy.deepcopy(self.output),
        }

    def with_overrides(self, epsilon: Optional[float] = None, tau: Optional[float] = None) -> "AuditConfig":
        measures = copy.deepcopy(self.measures)
        for name, params in measures.items():
            if epsilon is not None and "epsilon" in params:
                params["epsilon"] = float(epsilon)
            if tau is not None and name == "counterfactual_fairness":
                params["tau"] = float(tau)
        return AuditConfig(self.schema, measures, dict(self.output), self.base_dir, self.raw_schema)


def _schema(doc: Mapping) -> tuple[Schema, dict]:
    try:
        sens = doc["sensitive"]
        raw = {
            "features": [{"name": str(f["name"]), "kind": str(f["kind"])} for f in doc.get("features", [])],
            "sensitive": {"name": str(sens["name"]), "values": [str(v) for v in sens["values"]]},
            "predicted": str(doc["predicted"]),
            "target": None if doc.get("target") is None else str(doc["target"]),
            "score": None if doc.get("score") is None else str(doc["score"]),
            "positive_label": str(doc.get("positive_label", "1")),
            "negative_label": str(doc.get("negative_label", "0")),
        }
        schema = Schema(
            features=tuple(FeatureDef(f["name"], FeatureKind(f["kind"])) for f in raw["features"]),
            sensitive_attr=raw["sensitive"]["name"],
            sensitive_values=tuple(raw["sensitive"]["values"]),
            predicted_col=raw["predicted"],
            target_col=raw["target"],
            score_col=raw["score"],
            positive_label=raw["positive_label"],
            negative_label=raw["negative_label"],
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"schema section is missing or malformed: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"schema section: {exc}") from None
    return schema, raw


def config_from_dict(doc: Mapping, base_dir: Path | str = ".") -> AuditConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("configuration must be a mapping")
    unknown = set(doc) - {"schema", "measures", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "schema" not in doc:
        raise ConfigError("configuration needs a schema section")
    try:
        schema, raw_schema = _schema(doc["schema"])
    except FairAuditError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"schema section: {exc}") from None

    measures = {}
    for name, params in (doc.get("measures") or {}).items():
        if name not in MEASURE_DEFAULTS:
            raise ConfigError(f"unknown measure {name!r}")
        params = dict(params or {})
        if not params.pop("enabled", True):
            continue
        extra = set(params) - set(MEASURE_DEFAULTS[name])
        if extra:
            raise ConfigError(f"measure {name!r}: unknown parameters {sorted(extra)}")
        merged = {**copy.deepcopy(MEASURE_DEFAULTS[name]), **params}
        for key in REQUIRED.get(name, ()):
            if merged.get(key) is None:
                raise ConfigError(f"measure {name!r} requires {key!r}")
        measures[name] = merged
    if not measures:
        raise ConfigError("no measure is enabled")

    base_dir = Path(base_dir)
    cf = measures.get("counterfactual_fairness")
    if cf is not None and not (base_dir / cf["graph"]).is_file():
        raise ConfigError(f"causal graph file not found: {base_dir / cf['graph']}")

    output = {"format": "json", "path": None, **dict(doc.get("output") or {})}
    return AuditConfig(schema, measures, output, base_dir, raw_schema)


def load_config(path: Path | str) -> AuditConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(doc, path.parent)


def dump_config(doc: Mapping, header: str = "") -> str:
    body = yaml.safe_dump(dict(doc), sort_keys=False, default_flow_style=False)
    if header:
        body = "".join(f"# {line}\n" if line else "#\n" for line in header.splitlines()) + body
    return body
