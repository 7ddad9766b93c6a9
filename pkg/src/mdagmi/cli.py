"""Command-line front end.

Subcommands::

    mdagmi check FILE [--format text|json]
    mdagmi subsample FILE --q A,B [--format text|json]
    mdagmi paths FILE --from A --to R[B] [--given C,D]
    mdagmi simulate --scenario ID [--reps R --n N --m M --cycles C --seed S --workers K --format csv|json]
    mdagmi catalog (--list | --export ID)
    mdagmi render FILE

Exit codes: 0 on success (for ``check``: some strategy is unbiased),
2 when ``check`` finds no unbiased strategy, 1 on any input error.  Errors
go to stderr and nothing is written to stdout when a command fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import catalog
from .dsep import open_paths
from .dsl import ParseError, parse
from .graph import GraphError, MDag, Status
from .validity import (
    StrategyReport,
    SubsampleOption,
    Verdict,
    analyze,
    full_mi_verdict,
    subsample_verdict,
)

EXIT_OK, EXIT_ERROR, EXIT_NONE_VALID = 0, 1, 2
SCHEMA_VERSION = 1


class CliError(Exception):
    """Input problem reported on stderr with exit code 1."""


# -- report documents ----------------------------------------------------------


def graph_summary(g: MDag) -> dict:
    a = g.analysis
    return {
        "name": g.name,
        "outcome": a.outcome,
        "exposure": a.exposure,
        "covariates": list(a.covariates),
        "auxiliaries": list(a.auxiliaries),
        "complete": list(g.complete),
        "incomplete": list(g.incomplete),
        "unmeasured": list(g.unmeasured),
        "edges": [f"{u} -> {v}" for u, v in sorted(g.edges, key=lambda e: (e[0].sort_key, e[1].sort_key))],
    }


def _verdict_dict(v: Verdict) -> dict:
    return {
        "status": v.status.value,
        "reasons": [r.to_dict() for r in v.reasons],
        "witnesses": [w.to_dict() for w in v.witnesses],
    }


def option_dict(opt: SubsampleOption) -> dict:
    d = {
        "q": list(opt.spec.q),
        "p": list(opt.spec.p),
        "status": opt.verdict.status.value,
        "annotations": list(opt.annotations),
        "inclusion_ok": opt.inclusion_ok,
        "subsample_mar_ok": opt.subsample_mar_ok,
    }
    d.update({k: v for k, v in _verdict_dict(opt.verdict).items() if k != "status"})
    return d


def report_document(report: StrategyReport) -> dict:
    """JSON-ready mirror of a :class:`StrategyReport`; key order and list order are fixed."""
    full = _verdict_dict(report.full_mi)
    full["phi"] = list(report.phi)
    return {
        "schema_version": SCHEMA_VERSION,
        "graph_summary": graph_summary(report.graph),
        "any_unbiased": report.any_unbiased,
        "cra": _verdict_dict(report.cra),
        "full_mi": full,
        "warning": {"flag": report.warning.flag, "pattern": report.warning.pattern},
        "eligible_q": list(report.eligible_q),
        "enumeration_complete": report.enumeration_complete,
        "options": [option_dict(o) for o in report.options],
        "notes": list(report.notes),
    }


def _braces(names) -> str:
    return "{" + ", ".join(names) + "}"


def _verdict_lines(v: Verdict, indent: str = "    ") -> list[str]:
    out = []
    for r in v.reasons:
        out.append(f"{indent}- {r.message}")
        out.extend(f"{indent}    {w.describe()}" for w in r.witnesses)
    return out


def _option_lines(opt: SubsampleOption) -> list[str]:
    head = f"  Q={_braces(opt.spec.q)} P={_braces(opt.spec.p)}: {opt.verdict.status.value}"
    if opt.annotations:
        head += f" [{', '.join(opt.annotations)}]"
    return [head] + _verdict_lines(opt.verdict)


def _summary_lines(g: MDag) -> list[str]:
    s = graph_summary(g)
    model = f"{s['outcome']} ~ " + " + ".join([s["exposure"], *s["covariates"]])
    lines = [f'graph "{s["name"]}": {model}']
    if s["auxiliaries"]:
        lines.append(f"auxiliaries: {', '.join(s['auxiliaries'])}")
    for key in ("complete", "incomplete", "unmeasured"):
        lines.append(f"{key}: {', '.join(s[key]) or '-'}")
    return lines


def format_report(report: StrategyReport) -> str:
    lines = _summary_lines(report.graph)
    w = report.warning
    lines.append(f"outcome self-missingness warning: {'YES: ' + w.pattern if w.flag else 'no'}")
    lines.append("")
    lines.append(f"CRA: {report.cra.status.value}")
    lines += _verdict_lines(report.cra)
    lines.append(f"full-sample MI: {report.full_mi.status.value}")
    lines.append(f"    phi = {_braces(report.phi)}")
    lines += _verdict_lines(report.full_mi)
    lines.append(f"eligible Q: {_braces(report.eligible_q)}")
    lines.append("subsample options:")
    for opt in report.options:
        lines += _option_lines(opt)
    lines.append(f"any unbiased strategy: {'yes' if report.any_unbiased else 'no'}")
    if report.notes:
        lines.append("notes:")
        lines += [f"  - {n}" for n in report.notes]
    return "\n".join(lines) + "\n"


# -- DOT rendering -------------------------------------------------------------


def _dot_id(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_dot(g: MDag) -> str:
    """Graphviz DOT text.

    Complete variables: red box.  Incomplete: green outline, doubled in
    blue for members of phi.  Unmeasured: dashed.  Response indicators:
    diamonds.
    """
    phi = set(full_mi_verdict(g).phi or ())
    lines = [f"digraph {_dot_id(g.name)} {{", "  rankdir=LR;"]
    for v in sorted(g.variables, key=lambda v: v.name):
        if v.status is Status.COMPLETE:
            attrs = 'shape=box, color="red"'
        elif v.status is Status.UNMEASURED:
            attrs = 'shape=ellipse, style="dashed", color="gray40"'
        elif v.name in phi:
            attrs = 'shape=ellipse, color="blue", peripheries=2'
        else:
            attrs = 'shape=ellipse, color="green"'
        lines.append(f"  {_dot_id(v.name)} [{attrs}];")
    for r in g.indicators:
        lines.append(f'  {_dot_id(str(r))} [shape=diamond, color="black"];')
    for u, v in sorted(g.edges, key=lambda e: (e[0].sort_key, e[1].sort_key)):
        lines.append(f"  {_dot_id(str(u))} -> {_dot_id(str(v))};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- commands ------------------------------------------------------------------


def _load(path: str) -> MDag:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}") from None
    try:
        return parse(text)
    except ParseError as exc:
        raise CliError(f"{path}:{exc.line}:{exc.column}: {exc.message}") from None


def _names(text: str | None) -> list[str]:
    return [t.strip() for t in (text or "").split(",") if t.strip()]


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_check(args) -> tuple[str, int]:
    report = analyze(_load(args.file))
    out = _dumps(report_document(report)) if args.format == "json" else format_report(report)
    return out, EXIT_OK if report.any_unbiased else EXIT_NONE_VALID


def cmd_subsample(args) -> tuple[str, int]:
    g = _load(args.file)
    try:
        opt = subsample_verdict(g, _names(args.q))
    except KeyError as exc:
        raise CliError(exc.args[0]) from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.format == "json":
        return _dumps({"schema_version": SCHEMA_VERSION, "graph_summary": graph_summary(g), "option": option_dict(opt)}), EXIT_OK
    lines = _summary_lines(g) + ["", *_option_lines(opt)]
    lines.append(f"    outcome-independent inclusion: {'yes' if opt.inclusion_ok else 'no'}")
    lines.append(f"    MAR within the subsample: {'yes' if opt.subsample_mar_ok else 'no'}")
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_paths(args) -> tuple[str, int]:
    g = _load(args.file)
    try:
        a, b = g.resolve(args.source), g.resolve(args.target)
        given = [g.resolve(c) for c in _names(args.given)]
    except KeyError as exc:
        raise CliError(exc.args[0]) from None
    if a == b:
        raise CliError("--from and --to name the same node")
    paths = open_paths(g, a, b, given, max_paths=args.max_paths)
    if not paths:
        return "NONE (d-separated)\n", EXIT_OK
    lines = [p.describe() for p in paths]
    if paths.truncated:
        lines.append(f"(stopped after {args.max_paths} paths)")
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_simulate(args) -> tuple[str, int]:
    from .simkit import StudyError, run_study

    if args.scenario not in catalog.SIMULABLE:
        raise CliError(f"no simulation for scenario {args.scenario!r}; choose from {', '.join(catalog.SIMULABLE)}")
    if args.reps < 2:
        raise CliError("--reps must be at least 2")
    if args.workers is not None and args.workers < 1:
        raise CliError("--workers must be at least 1")
    try:
        result = run_study(
            args.scenario, reps=args.reps, n=args.n, m=args.m, cycles=args.cycles,
            seed=args.seed, workers=args.workers,
        )
    except (ValueError, StudyError) as exc:
        raise CliError(str(exc)) from None
    return (result.to_json() if args.format == "json" else result.to_csv()), EXIT_OK


def cmd_catalog(args) -> tuple[str, int]:
    if args.list:
        return "".join(f"{i}\n" for i in catalog.ids()), EXIT_OK
    try:
        return catalog.document(args.export), EXIT_OK
    except KeyError as exc:
        raise CliError(exc.args[0]) from None


def cmd_render(args) -> tuple[str, int]:
    return render_dot(_load(args.file)), EXIT_OK


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def _add_format(p, choices=("text", "json")):
    p.add_argument("--format", choices=choices, default=choices[0])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdagmi", description="Check whether CRA or (subsample) multiple imputation is unbiased under an m-DAG.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="analyze every strategy for an .mdag file")
    p.add_argument("file")
    _add_format(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("subsample", help="judge one choice of Q")
    p.add_argument("file")
    p.add_argument("--q", required=True, help="comma-separated variables restricted to observed values")
    _add_format(p)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("paths", help="list open paths between two nodes")
    p.add_argument("file")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--to", dest="target", required=True)
    p.add_argument("--given", default="", help="comma-separated conditioning nodes; R[V] names an indicator")
    p.add_argument("--max-paths", type=int, default=64)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("simulate", help="run the simulation study for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=25)
    p.add_argument("--cycles", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $MDAGMI_WORKERS or 1)")
    _add_format(p, ("csv", "json"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("catalog", help="list or export built-in scenarios")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true")
    g.add_argument("--export", metavar="ID")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("render", help="Graphviz DOT for an .mdag file")
    p.add_argument("file")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        out, code = args.func(args)
    except CliError as exc:
        print(f"mdagmi: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except GraphError as exc:
        print(f"mdagmi: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
