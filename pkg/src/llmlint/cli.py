"""Command-line driver.

Exit codes: 0 success, 1 findings at or above ``--fail-on``, 2 usage or
configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import traceback
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .corpus import (
    ManifestError,
    aggregate_prevalence,
    discover_files,
    load_manifest,
    project_map,
    run_corpus,
    run_files,
    runtime_stats,
)
from .evaluation import EvaluationError, MetricsReport, match, read_labels
from .patterns import DEFAULT_PATTERNS, PatternError, load_patterns
from .report import FORMATS, SEVERITIES, load_results, render
from .rules import RuleError, load_rules, resolve_rule_option
from .sampling import SamplingError, plan_sample, read_strata

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _population(text: str) -> float:
    if text.lower() in ("inf", "infinity", "∞"):
        return math.inf
    value = _positive_int(text)
    return value


def _shared(p: argparse.ArgumentParser, fail_default: Optional[str]) -> None:
    p.add_argument("--rules", metavar="FILE|+FILE",
                   help="rule file replacing the built-in rules, or extending them with a leading '+'")
    p.add_argument("--patterns", metavar="FILE", help="pattern table overrides")
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--exclude", metavar="GLOB", action="append", default=[],
                   help="skip files whose path relative to the scanned root matches (repeatable)")
    p.add_argument("--timeout", type=_positive_float, metavar="S", help="per-file time limit in seconds")
    p.add_argument("--jobs", type=_positive_int, metavar="N", help="worker processes")
    p.add_argument("--fail-on", choices=SEVERITIES, default=fail_default,
                   help="exit 1 when a finding of this severity or higher is reported")
    p.add_argument("--no-timing", action="store_true", help="omit durations for reproducible output")
    p.add_argument("--output", metavar="FILE", help="write the report to FILE instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="llmlint", description="Detect LLM integration code smells in Python sources.")
    parser.add_argument("--version", action="version", version=f"llmlint {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    analyze = sub.add_parser("analyze", help="analyze files or directories")
    analyze.add_argument("paths", nargs="+", metavar="PATH")
    _shared(analyze, "warning")

    corpus = sub.add_parser("corpus", help="run over a project manifest and report prevalence")
    corpus.add_argument("manifest")
    _shared(corpus, None)

    ev = sub.add_parser("eval", help="score findings against ground-truth labels")
    ev.add_argument("--findings", required=True, metavar="F.json")
    ev.add_argument("--labels", required=True, metavar="L.csv")
    ev.add_argument("--match", choices=("line", "file"), default="line")
    ev.add_argument("--tolerance", type=int, default=0, metavar="K")
    ev.add_argument("--macro", choices=("drop", "zero"), default="drop")
    ev.add_argument("--format", choices=("text", "json"), default="text")

    sample = sub.add_parser("sample", help="plan a sample size and stratified allocation")
    sample.add_argument("--Z", type=_positive_float, required=True, metavar="V")
    sample.add_argument("--margin", type=float, required=True, metavar="E")
    sample.add_argument("--p", type=float, required=True, metavar="P")
    sample.add_argument("--population", type=_population, default=math.inf, metavar="N",
                        help="population size, or 'inf'")
    sample.add_argument("--strata", metavar="sizes.csv", help="CSV of stratum,size rows")
    sample.add_argument("--format", choices=("text", "json"), default="text")

    rules = sub.add_parser("rules", help="list or check rule sets")
    rsub = rules.add_subparsers(dest="action", metavar="ACTION", parser_class=_Parser)
    rsub.required = True
    rlist = rsub.add_parser("list", help="print the active rules")
    rlist.add_argument("--rules", metavar="FILE|+FILE")
    rcheck = rsub.add_parser("check", help="validate a rule file")
    rcheck.add_argument("file")
    return parser


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _threshold_hit(results, fail_on: Optional[str]) -> bool:
    if fail_on is None:
        return False
    floor = SEVERITIES.index(fail_on)
    return any(SEVERITIES.index(f.severity) >= floor for r in results for f in r.findings
               if f.severity in SEVERITIES)


def _load_config(args):
    rules = resolve_rule_option(args.rules)
    patterns = load_patterns(args.patterns) if args.patterns else DEFAULT_PATTERNS
    return rules, patterns


def _strip_timing(results):
    for r in results:
        r.duration_seconds = None
    return results


def cmd_analyze(args) -> int:
    rules, patterns = _load_config(args)
    files = []
    for raw in args.paths:
        path = Path(raw)
        if not path.exists():
            raise UsageError(f"no such file or directory: {raw}")
        errors: list = []
        files.extend(discover_files(path, args.exclude, errors))
        for where, msg in errors:
            print(f"llmlint: {where}: {msg}", file=sys.stderr)
    seen = set()
    unique = [f for f in files if not (str(f) in seen or seen.add(str(f)))]
    results = run_files(unique, rules, patterns, args.timeout, args.jobs or 1)
    if args.no_timing:
        _strip_timing(results)
    _emit(render(results, args.format, timing=not args.no_timing, rules=rules), args.output)
    return EXIT_FINDINGS if _threshold_hit(results, args.fail_on) else EXIT_OK


def cmd_corpus(args) -> int:
    rules, patterns = _load_config(args)
    manifest = load_manifest(args.manifest)
    if args.exclude:
        manifest = type(manifest)(manifest.projects, manifest.exclude_globs + tuple(args.exclude),
                                  manifest.per_file_timeout_s, manifest.parallelism)
    errors: list = []
    start = time.perf_counter()
    results = run_corpus(manifest, rules, patterns, jobs=args.jobs, timeout=args.timeout, errors=errors)
    wall = time.perf_counter() - start
    for pid, msg in errors:
        print(f"llmlint: project {pid}: {msg}", file=sys.stderr)
    if args.no_timing:
        _strip_timing(results)
    if args.output:
        Path(args.output).write_text(render(results, "json", timing=not args.no_timing), encoding="utf-8")
    prevalence = aggregate_prevalence(results, project_map(manifest, results),
                                      smells=[r.smell_code for r in rules],
                                      projects=[pid for pid, _ in manifest.projects])
    if args.format == "json":
        doc = {"prevalence": prevalence.to_json()}
        if not args.no_timing and results:
            doc["runtime"] = runtime_stats(results, wall).to_json()
        text = json.dumps(doc, indent=2) + "\n"
    elif args.format == "sarif":
        text = render(results, "sarif", rules=rules)
    else:
        text = prevalence.to_text()
        if not args.no_timing and results:
            text += "\n" + runtime_stats(results, wall).to_text()
    sys.stdout.write(text)
    return EXIT_FINDINGS if _threshold_hit(results, args.fail_on) else EXIT_OK


def cmd_eval(args) -> int:
    try:
        findings_text = Path(args.findings).read_text(encoding="utf-8")
        labels_text = Path(args.labels).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(str(exc)) from None
    try:
        results = load_results(findings_text)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{args.findings}: not a findings report: {exc}") from None
    labels = read_labels(labels_text)
    if args.tolerance < 0:
        raise UsageError("--tolerance must be >= 0")
    counts = match([f for r in results for f in r.findings], labels, args.match, args.tolerance)
    report = MetricsReport.build(counts, args.macro)
    if args.format == "json":
        sys.stdout.write(json.dumps(report.to_json(), indent=2) + "\n")
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_sample(args) -> int:
    strata = []
    if args.strata:
        try:
            strata = read_strata(Path(args.strata).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(str(exc)) from None
    plan = plan_sample(args.Z, args.margin, args.p, args.population, strata)
    if args.format == "json":
        sys.stdout.write(json.dumps(plan.to_json(), indent=2) + "\n")
    else:
        sys.stdout.write(plan.to_text())
    return EXIT_OK


def cmd_rules(args) -> int:
    if args.action == "check":
        rules = load_rules(args.file)
        print(f"{args.file}: {len(rules)} rule{'s' if len(rules) != 1 else ''} OK")
        return EXIT_OK
    rules = resolve_rule_option(args.rules)
    for rule in rules:
        body = " and ".join(str(t) for t in rule.body)
        extra = f" suppress={','.join(rule.suppress)}" if rule.suppress else ""
        print(f"{rule.name}  smell={rule.smell_code} category={rule.category} "
              f"effects={','.join(rule.effects)} severity={rule.severity}{extra}")
        print(f"    forall c: Call . {body}")
    return EXIT_OK


_COMMANDS = {"analyze": cmd_analyze, "corpus": cmd_corpus, "eval": cmd_eval,
             "sample": cmd_sample, "rules": cmd_rules}

_CONFIG_ERRORS = (UsageError, RuleError, PatternError, ManifestError, EvaluationError, SamplingError)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except _CONFIG_ERRORS as exc:
        print(f"llmlint: {exc}" if not str(exc).startswith("llmlint") else str(exc), file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"llmlint: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        print("llmlint: internal error", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
