"""Audit report assembly and its JSON document format.

Document layout::

    {"format": "fairaudit-report/1",
     "header": {"generated_at": <str | null>},
     "body": {...},
     "body_digest": "<sha256 of the canonical body>"}

Only ``header`` may vary between runs on identical inputs. Exact rates are
written as ``{"exact": "2/3", "value": 0.666...}`` so decoding is lossless.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence, Union

from . import __version__
from .analysis import ProxyAssociation, ProxyScanResult
from .counterfactual import Aggregate, CFEntry, CFResult, FitStat
from .data_model import Dataset, serialize_dataset
from .errors import DuplicateMeasure, FairAuditError
from .group_metrics import (
    CellResult,
    Disparity,
    GroupMetricResult,
    Measure,
    NegativeDominanceResult,
    Verdict,
)
from .individual_metrics import PairViolation, ViolationList

FORMAT = "fairaudit-report/1"

MEASURE_ORDER = (
    "independence",
    "conditional_independence",
    "separation",
    "sufficiency",
    "negative_dominance",
    "individual_fairness",
    "counterfactual_fairness",
    "proxy_scan",
)

_GROUP_KEYS = {
    Measure.INDEPENDENCE: "independence",
    Measure.CONDITIONAL_INDEPENDENCE: "conditional_independence",
    Measure.SEPARATION: "separation",
    Measure.SUFFICIENCY: "sufficiency",
}

Result = Union[GroupMetricResult, NegativeDominanceResult, ViolationList, CFResult, ProxyScanResult]


@dataclass(frozen=True)
class DatasetDigest:
    sha256: str
    n_records: int


def dataset_digest(ds: Dataset) -> DatasetDigest:
    text = serialize_dataset(ds)
    return DatasetDigest(hashlib.sha256(text.encode("utf-8")).hexdigest(), len(ds))


@dataclass(frozen=True)
class AuditReport:
    dataset_digest: DatasetDigest
    config_snapshot: dict
    results: tuple[tuple[str, Result], ...]
    warnings: tuple[str, ...] = ()
    tool_version: str = __version__

    def result(self, key: str) -> Result:
        return dict(self.results)[key]

    def verdicts(self) -> dict[str, Verdict]:
        out = {}
        for key, res in self.results:
            v = getattr(res, "verdict", None)
            if v is not None:
                out[key] = v
        return out


def measure_key(result: Result) -> str:
    if isinstance(result, GroupMetricResult):
        return _GROUP_KEYS[result.measure]
    if isinstance(result, NegativeDominanceResult):
        return "negative_dominance"
    if isinstance(result, ViolationList):
        return "individual_fairness"
    if isinstance(result, CFResult):
        return "counterfactual_fairness"
    if isinstance(result, ProxyScanResult):
        return "proxy_scan"
    raise TypeError(f"not a report part: {type(result).__name__}")


def assemble_report(
    parts: Sequence[Result],
    dataset: Optional[Dataset] = None,
    config: Optional[Mapping[str, Any]] = None,
    digest: Optional[DatasetDigest] = None,
    extra_warnings: Sequence[str] = (),
) -> AuditReport:
    if not parts:
        raise ValueError("a report needs at least one result")
    keyed = {}
    for part in parts:
        key = measure_key(part)
        if key in keyed:
            raise DuplicateMeasure(f"measure {key!r} appears more than once")
        keyed[key] = part
    if digest is None:
        digest = dataset_digest(dataset) if dataset is not None else DatasetDigest("", 0)
    ordered = tuple((k, keyed[k]) for k in MEASURE_ORDER if k in keyed)
    warnings = list(extra_warnings)
    for key, res in ordered:
        if isinstance(res, GroupMetricResult):
            warnings += [f"{key}: {w}" for w in res.warnings]
            if res.verdict is Verdict.UNDEFINED:
                warnings += [f"{key}: {r}" for r in res.reasons]
    return AuditReport(digest, dict(config or {}), ordered, tuple(warnings))


# --- encoding -------------------------------------------------------------------------

def _frac(x: Optional[Fraction]):
    if x is None:
        return None
    x = Fraction(x)
    return {"exact": f"{x.numerator}/{x.denominator}", "value": float(x)}


def _unfrac(d) -> Optional[Fraction]:
    return None if d is None else Fraction(d["exact"])


def _rates(m: Mapping) -> dict:
    return {g: {k: _frac(v) for k, v in rates.items()} for g, rates in m.items()}


def _unrates(m: Mapping) -> dict:
    return {g: {k: _unfrac(v) for k, v in rates.items()} for g, rates in m.items()}


def _disp(d: Disparity) -> dict:
    return {"rate": d.rate_name, "difference": _frac(d.difference), "ratio": d.ratio}


def _undisp(d) -> Disparity:
    return Disparity(d["rate"], _unfrac(d["difference"]), d["ratio"])


def encode_result(res: Result) -> dict:
    if isinstance(res, GroupMetricResult):
        doc = {
            "measure": res.measure.value,
            "verdict": res.verdict.value,
            "epsilon": res.epsilon,
            "per_group_rates": _rates(res.per_group_rates),
            "disparities": [_disp(d) for d in res.disparities],
            "reasons": list(res.reasons),
            "warnings": list(res.warnings),
            "cells": None,
        }
        if res.cells is not None:
            doc["cells"] = [{
                "key": list(c.key),
                "sizes": list(c.sizes),
                "per_group_rates": _rates(c.per_group_rates),
                "disparity": _disp(c.disparity),
                "verdict": c.verdict.value,
                "skipped": c.skipped,
            } for c in res.cells]
        return doc
    if isinstance(res, NegativeDominanceResult):
        return {
            "verdict": res.verdict.value,
            "protected_value": res.protected_value,
            "step1": res.step1,
            "step1_ratio": _frac(res.step1_ratio),
            "step2": res.step2,
            "step2_ratio": _frac(res.step2_ratio),
            "established": res.established,
            "counts": dict(res.counts),
        }
    if isinstance(res, ViolationList):
        return {
            "verdict": res.verdict.value,
            "lipschitz": res.lipschitz,
            "n_pairs": res.n_pairs,
            "n_violations": len(res.pairs),
            "violations": [[p.i, p.j, p.d, p.D] for p in res.pairs],
        }
    if isinstance(res, CFResult):
        return {
            "verdict": res.verdict.value,
            "tau": res.tau,
            "aggregate": res.aggregate.value,
            "mean_delta": res.mean_delta,
            "max_delta": res.max_delta,
            "coefficients": {c: dict(t) for c, t in res.coefficients.items()},
            "fit_stats": {c: {"n_records": s.n_records, "rss": s.rss, "max_abs_residual": s.max_abs_residual}
                          for c, s in res.fit_stats.items()},
            "per_record": [[e.actual, e.counterfactual, e.delta] for e in res.per_record],
        }
    if isinstance(res, ProxyScanResult):
        return {
            "threshold": res.threshold,
            "features": [{"feature": e.feature, "association": e.association,
                          "flagged": e.flagged, "method": e.method} for e in res.entries],
        }
    raise TypeError(type(res).__name__)


def decode_result(key: str, doc: Mapping) -> Result:
    if key in ("independence", "conditional_independence", "separation", "sufficiency"):
        cells = None
        if doc["cells"] is not None:
            cells = tuple(CellResult(
                key=tuple(c["key"]),
                sizes=tuple(c["sizes"]),
                per_group_rates=_unrates(c["per_group_rates"]),
                disparity=_undisp(c["disparity"]),
                verdict=Verdict(c["verdict"]),
                skipped=c["skipped"],
            ) for c in doc["cells"])
        return GroupMetricResult(
            measure=Measure(doc["measure"]),
            per_group_rates=_unrates(doc["per_group_rates"]),
            disparities=tuple(_undisp(d) for d in doc["disparities"]),
            verdict=Verdict(doc["verdict"]),
            epsilon=doc["epsilon"],
            cells=cells,
            reasons=tuple(doc["reasons"]),
            warnings=tuple(doc["warnings"]),
        )
    if key == "negative_dominance":
        return NegativeDominanceResult(
            protected_value=doc["protected_value"],
            step1=doc["step1"],
            step1_ratio=_unfrac(doc["step1_ratio"]),
            step2=doc["step2"],
            step2_ratio=_unfrac(doc["step2_ratio"]),
            established=doc["established"],
            counts=dict(doc["counts"]),
        )
    if key == "individual_fairness":
        return ViolationList(
            pairs=tuple(PairViolation(i, j, d, D) for i, j, d, D in doc["violations"]),
            verdict=Verdict(doc["verdict"]),
            n_pairs=doc["n_pairs"],
            lipschitz=doc["lipschitz"],
        )
    if key == "counterfactual_fairness":
        return CFResult(
            per_record=tuple(CFEntry(*e) for e in doc["per_record"]),
            mean_delta=doc["mean_delta"],
            max_delta=doc["max_delta"],
            tau=doc["tau"],
            aggregate=Aggregate(doc["aggregate"]),
            verdict=Verdict(doc["verdict"]),
            fit_stats={c: FitStat(**s) for c, s in doc["fit_stats"].items()},
            coefficients={c: dict(t) for c, t in doc["coefficients"].items()},
        )
    if key == "proxy_scan":
        return ProxyScanResult(
            doc["threshold"],
            tuple(ProxyAssociation(e["feature"], e["association"], e["flagged"], e["method"])
                  for e in doc["features"]),
        )
    raise FairAuditError(f"unknown report section {key!r}")


def report_body(report: AuditReport) -> dict:
    return {
        "tool_version": report.tool_version,
        "dataset": {"sha256": report.dataset_digest.sha256, "n_records": report.dataset_digest.n_records},
        "config": report.config_snapshot,
        "results": {key: encode_result(res) for key, res in report.results},
        "warnings": list(report.warnings),
    }


def _canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def body_digest(body: Mapping) -> str:
    return hashlib.sha256(_canonical(body).encode("utf-8")).hexdigest()


def report_to_json(report: AuditReport, generated_at: Optional[str] = None) -> str:
    body = report_body(report)
    doc = {
        "format": FORMAT,
        "header": {"generated_at": generated_at},
        "body": body,
        "body_digest": body_digest(body),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def report_from_json(text: str) -> AuditReport:
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise FairAuditError(f"unsupported report format {doc.get('format')!r}")
    body = doc["body"]
    if body_digest(body) != doc["body_digest"]:
        raise FairAuditError("report body digest mismatch")
    return AuditReport(
        dataset_digest=DatasetDigest(body["dataset"]["sha256"], body["dataset"]["n_records"]),
        config_snapshot=body["config"],
        results=tuple((k, decode_result(k, v)) for k, v in body["results"].items()),
        warnings=tuple(body["warnings"]),
        tool_version=body["tool_version"],
    )


# --- plaintext summary -------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "undefined"
    if isinstance(x, Fraction):
        return f"{float(x):.4f} ({x.numerator}/{x.denominator})"
    return f"{x:.4f}"


def format_summary(report: AuditReport) -> str:
    lines = [
        f"fairaudit {report.tool_version}",
        f"dataset sha256={report.dataset_digest.sha256[:16]}... records={report.dataset_digest.n_records}",
        "",
    ]
    for key, res in report.results:
        if isinstance(res, GroupMetricResult):
            lines.append(f"[{res.verdict.value:9}] {key} (epsilon={res.epsilon})")
            for group, r in res.per_group_rates.items():
                lines.append("    " + group + ": " + ", ".join(f"{k}={_fmt(v)}" for k, v in r.items()))
            for d in res.disparities:
                lines.append(f"    |diff| {d.rate_name} = {_fmt(d.difference)}")
            for c in res.cells or ():
                tag = "skipped" if c.skipped else c.verdict.value
                lines.append(f"    cell {', '.join(c.key) or '<all>'}: sizes={c.sizes} "
                             f"|diff|={_fmt(c.disparity.difference)} [{tag}]")
        elif isinstance(res, NegativeDominanceResult):
            lines.append(f"[{res.verdict.value:9}] {key} protected={res.protected_value!r} "
                         f"established={res.established}")
            lines.append(f"    step1 share of rejected = {_fmt(res.step1_ratio)} -> {res.step1}")
            lines.append(f"    step2 share accepted = {_fmt(res.step2_ratio)} -> {res.step2}")
        elif isinstance(res, ViolationList):
            lines.append(f"[{res.verdict.value:9}] {key} L={res.lipschitz} "
                         f"violations={len(res.pairs)}/{res.n_pairs} pairs")
            for p in res.pairs[:10]:
                lines.append(f"    ({p.i}, {p.j}) d={p.d:.4f} D={p.D:.4f}")
        elif isinstance(res, CFResult):
            lines.append(f"[{res.verdict.value:9}] {key} {res.aggregate.value}="
                         f"{(res.max_delta if res.aggregate is Aggregate.MAX else res.mean_delta):.6g} "
                         f"tau={res.tau}")
        elif isinstance(res, ProxyScanResult):
            lines.append(f"[{'info':9}] {key} threshold={res.threshold}")
            for e in res.entries:
                flag = " FLAGGED" if e.flagged else ""
                lines.append(f"    {e.feature}: {e.method}={e.association:.4f}{flag}")
    if report.warnings:
        lines += ["", "warnings:"] + [f"  - {w}" for w in report.warnings]
    return "\n".join(lines) + "\n"
