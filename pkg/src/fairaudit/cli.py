"""Command-line entry point.

Exit codes: 0 all measures pass, 2 some measure fails, 3 no failure but some
measure undefined, 1 data/config error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import exclusivity_witness_search
from .audit import EXIT_ERROR, exit_code, run_audit
from .config import dump_config, load_config
from .counterfactual import (
    abduct,
    dump_graph,
    fit_scm,
    intervene_predict,
    load_graph,
    observed_values,
    scm_from_coefficients,
)
from .data_model import load_dataset, serialize_dataset
from .errors import FairAuditError
from .report import format_summary, report_to_json
from .synth import ALIASES, ScenarioName, ScenarioSpec, default_config, generate

EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _timestamp(explicit: bool) -> Optional[str]:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    if explicit:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")
    return None


def cmd_audit(args) -> int:
    cfg = load_config(args.config).with_overrides(epsilon=args.epsilon, tau=args.tau)
    ds = load_dataset(args.data, cfg.schema)
    report = run_audit(ds, cfg)
    text = report_to_json(report, generated_at=_timestamp(args.timestamp))
    summary = format_summary(report)
    out = args.out or cfg.output.get("path")
    if out:
        out = Path(out)
        write_atomic(out, text)
        write_atomic(Path(args.summary) if args.summary else out.with_suffix(".txt"), summary)
    else:
        sys.stdout.write(text)
        if args.summary:
            write_atomic(Path(args.summary), summary)
        else:
            sys.stderr.write(summary)
    return exit_code(report)


def cmd_generate(args) -> int:
    scenario = generate(ScenarioSpec(args.name, args.seed))
    out = Path(args.out)
    write_atomic(out, serialize_dataset(scenario.dataset))
    stem = out.with_suffix("")
    graph_name = f"{stem.name}.graph.yaml"
    if scenario.graph is not None:
        write_atomic(stem.parent / graph_name, dump_graph(scenario.graph, scenario.coefficients))
    header = f"audit configuration for scenario {scenario.name}\n" + "\n".join(scenario.notes)
    cfg_path = Path(args.config_out) if args.config_out else stem.parent / f"{stem.name}.config.yaml"
    write_atomic(cfg_path, dump_config(default_config(scenario.name, graph_name), header))
    print(f"wrote {out} ({len(scenario.dataset)} records) and {cfg_path}")
    return 0


def cmd_exclusivity(args) -> int:
    res = exclusivity_witness_search(args.n1, args.n2, args.q1, args.q2, args.eps)

    def block(o):
        doc = {"count": o.count, "by_bucket": o.by_bucket}
        if o.witness is not None:
            doc["witness"] = {"predictions": [list(p) for p in o.witness.predictions],
                              "targets": [list(t) for t in o.witness.targets],
                              "bucket": o.witness.bucket}
        return doc

    doc = {
        "n1": res.n1, "n2": res.n2, "q1": str(res.q1), "q2": str(res.q2), "eps": str(res.eps),
        "total_assignments": res.total_assignments,
        "joint": block(res.joint),
        "pairs": {k: block(v) for k, v in res.pairs.items()},
        "singles": {k: block(v) for k, v in res.singles.items()},
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_counterfactual(args) -> int:
    cfg = load_config(args.config)
    ds = load_dataset(args.data, cfg.schema)
    graph, coefficients = load_graph(args.graph)
    if coefficients is not None and not args.fit:
        scm = scm_from_coefficients(graph, coefficients, ds.schema)
    else:
        scm = fit_scm(graph, ds)
    if not 0 <= args.row < len(ds):
        raise FairAuditError(f"row {args.row} out of range (dataset has {len(ds)} records)")
    record = ds.records[args.row]
    target = args.set if args.set is not None else ds.schema.other_sensitive(record.sensitive)
    if target not in ds.schema.sensitive_values:
        raise FairAuditError(f"{target!r} is not a declared sensitive value")
    latents = abduct(scm, record)
    outcome = intervene_predict(scm, latents, record, target)
    actual = observed_values(scm, record)
    actual_output = actual[graph.output_node]
    doc = {
        "row": args.row,
        "coefficients": scm.coefficients(),
        "observed": actual,
        "latents": latents.values,
        "intervention": {graph.sensitive_node: target},
        "counterfactual": outcome.values,
        "output": {"actual": actual_output, "counterfactual": outcome.output,
                   "delta": abs(actual_output - outcome.output)},
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_version(args) -> int:
    print(f"fairaudit {__version__}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairaudit", description="Audit binary decision data against fairness measures.")
    sub = p.add_subparsers(dest="command", metavar="{audit,generate,exclusivity,counterfactual,version}")
    sub.required = True

    a = sub.add_parser("audit", help="run the configured measures over a CSV file")
    a.add_argument("--data", required=True, help="CSV file with a header row")
    a.add_argument("--config", required=True, help="YAML audit configuration")
    a.add_argument("--out", help="report path (JSON); default: config output.path or stdout")
    a.add_argument("--summary", help="plaintext summary path (default: report path with .txt)")
    a.add_argument("--epsilon", type=float, help="override epsilon for every group measure")
    a.add_argument("--tau", type=float, help="override the counterfactual threshold")
    a.add_argument("--timestamp", action="store_true", help="record the wall-clock time in the report header")
    a.set_defaults(func=cmd_audit)

    g = sub.add_parser("generate", help="write a built-in scenario as CSV plus its config")
    g.add_argument("name", choices=[s.value for s in ScenarioName] + list(ALIASES),
                   help="scenario name or short alias (fig2, fig3, fig4, gpa, bob)")
    g.add_argument("--out", required=True, help="CSV output path")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config-out", help="config output path (default: <out stem>.config.yaml)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("exclusivity", help="exhaustive Independence/Separation/Sufficiency search")
    e.add_argument("--n1", type=int, required=True)
    e.add_argument("--n2", type=int, required=True)
    e.add_argument("--q1", required=True, help="base rate of group 1, e.g. 1/2")
    e.add_argument("--q2", required=True, help="base rate of group 2, e.g. 1/4")
    e.add_argument("--eps", default="0")
    e.set_defaults(func=cmd_exclusivity)

    c = sub.add_parser("counterfactual", help="abduct, intervene and predict for one record")
    c.add_argument("--data", required=True)
    c.add_argument("--config", required=True, help="config supplying the schema")
    c.add_argument("--graph", required=True, help="causal graph YAML")
    c.add_argument("--row", type=int, default=0)
    c.add_argument("--set", help="sensitive value to intervene with (default: the other value)")
    c.add_argument("--fit", action="store_true", help="fit coefficients even if the graph declares them")
    c.set_defaults(func=cmd_counterfactual)

    v = sub.add_parser("version", help="print the version")
    v.set_defaults(func=cmd_version)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FairAuditError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
