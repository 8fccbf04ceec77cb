"""Run every enabled measure of an :class:`AuditConfig` over one dataset."""

from __future__ import annotations

from .analysis import proxy_scan
from .config import AuditConfig
from .counterfactual import (
    counterfactual_fairness_audit,
    fit_scm,
    load_graph,
    scm_from_coefficients,
)
from .data_model import Dataset
from .group_metrics import (
    BinningSpec,
    Tolerance,
    Verdict,
    conditional_independence,
    independence,
    negative_dominance,
    separation,
    sufficiency,
)
from .individual_metrics import DistanceConfig, individual_fairness_audit
from .report import AuditReport, assemble_report

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_UNDEFINED = 3


def _tol(p) -> Tolerance:
    return Tolerance(float(p["epsilon"]), int(p["min_cell"]))


def _binning(raw):
    if raw is None:
        return None
    if "strategy" in raw:
        return BinningSpec(**raw)
    return {attr: BinningSpec(**spec) for attr, spec in raw.items()}


def run_audit(ds: Dataset, cfg: AuditConfig) -> AuditReport:
    m = cfg.measures
    parts = []
    if "independence" in m:
        parts.append(independence(ds, _tol(m["independence"])))
    if "conditional_independence" in m:
        p = m["conditional_independence"]
        parts.append(conditional_independence(ds, p["conditions"], _binning(p["binning"]), _tol(p)))
    if "separation" in m:
        parts.append(separation(ds, _tol(m["separation"])))
    if "sufficiency" in m:
        parts.append(sufficiency(ds, _tol(m["sufficiency"])))
    if "negative_dominance" in m:
        parts.append(negative_dominance(ds, str(m["negative_dominance"]["protected"])))
    if "individual_fairness" in m:
        p = m["individual_fairness"]
        dcfg = DistanceConfig(
            numeric_scaling=p["scaling"],
            feature_weights={k: float(v) for k, v in (p["weights"] or {}).items()},
            lipschitz=float(p["lipschitz"]),
            output_mode=p["output_mode"],
            include_sensitive=bool(p["include_sensitive"]),
        )
        parts.append(individual_fairness_audit(ds, dcfg))
    if "counterfactual_fairness" in m:
        p = m["counterfactual_fairness"]
        graph, coefficients = load_graph(cfg.base_dir / p["graph"])
        if coefficients is not None and not p["fit"]:
            scm = scm_from_coefficients(graph, coefficients, ds.schema)
        else:
            latent_scale = {}
            for child, terms in (coefficients or {}).items():
                for parent, c in terms.items():
                    if graph.is_latent(parent):
                        latent_scale[child] = c
            scm = fit_scm(graph, ds, latent_scale)
        parts.append(counterfactual_fairness_audit(scm, ds, float(p["tau"]), p["aggregate"]))
    if "proxy_scan" in m:
        parts.append(proxy_scan(ds, float(m["proxy_scan"]["threshold"])))
    return assemble_report(parts, dataset=ds, config=cfg.snapshot())


def exit_code(report: AuditReport) -> int:
    verdicts = list(report.verdicts().values())
    if any(v is Verdict.FAIL for v in verdicts):
        return EXIT_FAIL
    if any(v is Verdict.UNDEFINED for v in verdicts):
        return EXIT_UNDEFINED
    return EXIT_PASS
