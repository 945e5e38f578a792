"""Findings, per-file results and their text / JSON / SARIF renderings."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .syntax import SourcePosition, Span

STATUSES = ("ok", "parse-error", "timeout", "io-error")
SEVERITIES = ("info", "warning", "error")
FORMATS = ("text", "json", "sarif")
_SARIF_LEVEL = {"info": "note", "warning": "warning", "error": "error"}


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class Finding:
    smell_code: str
    rule_name: str
    category: str
    effects: tuple[str, ...]
    severity: str
    file_path: str
    span: Span
    message: str
    evidence: str
    callee_path: str

    @property
    def line(self) -> int:
        return self.span.start.line

    @property
    def column(self) -> int:
        return self.span.start.column

    def sort_key(self):
        return (self.file_path, self.span.start, self.smell_code, self.rule_name, self.span.end)

    def to_json(self) -> dict:
        return {
            "smell": self.smell_code,
            "rule": self.rule_name,
            "category": self.category,
            "effects": list(self.effects),
            "severity": self.severity,
            "line": self.span.start.line,
            "end_line": self.span.end.line,
            "column": self.span.start.column,
            "end_column": self.span.end.column,
            "message": self.message,
            "evidence": self.evidence,
            "callee": self.callee_path,
        }

    @classmethod
    def from_json(cls, path: str, d: dict) -> "Finding":
        span = Span(SourcePosition(d["line"], d["column"]), SourcePosition(d["end_line"], d["end_column"]))
        return cls(d["smell"], d["rule"], d["category"], tuple(d["effects"]), d["severity"],
                   path, span, d["message"], d["evidence"], d["callee"])


@dataclass
class AnalysisResult:
    file_path: str
    findings: list[Finding] = field(default_factory=list)
    duration_seconds: Optional[float] = 0.0
    status: str = "ok"

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status != "ok" and self.findings:
            raise ValueError("only an ok result may carry findings")
        if self.duration_seconds is not None and self.duration_seconds < 0:
            raise ValueError("negative duration")

    def to_json(self, timing: bool = True) -> dict:
        return {
            "path": self.file_path,
            "status": self.status,
            "duration_s": self.duration_seconds if timing else None,
            "findings": [f.to_json() for f in sorted(self.findings, key=Finding.sort_key)],
        }

    @classmethod
    def from_json(cls, d: dict) -> "AnalysisResult":
        path = d["path"]
        return cls(path, [Finding.from_json(path, f) for f in d["findings"]], d.get("duration_s"), d["status"])


def sort_results(results: Iterable[AnalysisResult]) -> list[AnalysisResult]:
    ordered = sorted(results, key=lambda r: r.file_path)
    return [AnalysisResult(r.file_path, sorted(r.findings, key=Finding.sort_key), r.duration_seconds, r.status)
            for r in ordered]


def totals(results: Sequence[AnalysisResult]) -> dict:
    by_smell = Counter(f.smell_code for r in results for f in r.findings)
    return {
        "files": len(results),
        "flagged_files": sum(1 for r in results if r.findings),
        "occurrences_by_smell": dict(sorted(by_smell.items())),
    }


def render(results: Iterable[AnalysisResult], format: str = "text", timing: bool = True,
           rules: Optional[Iterable] = None) -> str:
    """Serialize results deterministically; ``rules`` feeds SARIF rule descriptors."""
    ordered = sort_results(results)
    if format == "text":
        return render_text(ordered)
    if format == "json":
        return render_json(ordered, timing)
    if format == "sarif":
        return render_sarif(ordered, rules)
    raise FormatError(f"unknown format {format!r} (expected one of {', '.join(FORMATS)})")


def render_text(results: Sequence[AnalysisResult]) -> str:
    lines = []
    for r in results:
        if r.status != "ok":
            lines.append(f"{r.file_path}: {r.status}")
        for f in r.findings:
            lines.append(f"{f.file_path}:{f.line}:{f.column + 1} {f.smell_code} {f.severity}: {f.message}")
    t = totals(results)
    count = sum(t["occurrences_by_smell"].values())
    breakdown = ", ".join(f"{k} {v}" for k, v in t["occurrences_by_smell"].items())
    summary = f"{count} finding{'s' if count != 1 else ''}"
    if breakdown:
        summary += f" ({breakdown})"
    summary += f" in {t['flagged_files']} of {t['files']} file{'s' if t['files'] != 1 else ''}"
    lines.append(summary)
    return "\n".join(lines) + "\n"


def render_json(results: Sequence[AnalysisResult], timing: bool = True) -> str:
    doc = {"files": [r.to_json(timing) for r in results], "totals": totals(results)}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load_results(text: str) -> list[AnalysisResult]:
    """Parse the JSON rendering back into results."""
    doc = json.loads(text)
    return [AnalysisResult.from_json(d) for d in doc["files"]]


def render_sarif(results: Sequence[AnalysisResult], rules: Optional[Iterable] = None) -> str:
    from . import __version__

    descriptors: dict[str, dict] = {}
    for rule in rules or ():
        descriptors[rule.name] = _descriptor(rule.name, rule.smell_code, rule.category, rule.effects,
                                             rule.severity, rule.message)
    for r in results:
        for f in r.findings:
            if f.rule_name not in descriptors:
                descriptors[f.rule_name] = _descriptor(f.rule_name, f.smell_code, f.category, f.effects,
                                                       f.severity, f.message)
    names = sorted(descriptors)
    index = {name: i for i, name in enumerate(names)}
    sarif_results = []
    notifications = []
    for r in results:
        if r.status != "ok":
            notifications.append({
                "level": "warning",
                "message": {"text": r.status},
                "locations": [{"physicalLocation": {"artifactLocation": {"uri": r.file_path}}}],
            })
        for f in r.findings:
            sarif_results.append({
                "ruleId": f.rule_name,
                "ruleIndex": index[f.rule_name],
                "level": _SARIF_LEVEL.get(f.severity, "warning"),
                "message": {"text": f.message},
                "locations": [{
                    "physicalLocation": {
                        "artifactLocation": {"uri": f.file_path},
                        "region": {
                            "startLine": f.span.start.line,
                            "startColumn": f.span.start.column + 1,
                            "endLine": f.span.end.line,
                            "endColumn": f.span.end.column + 1,
                        },
                    }
                }],
                "properties": {"smell": f.smell_code, "callee": f.callee_path},
            })
    doc = {
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "version": "2.1.0",
        "runs": [{
            "tool": {"driver": {"name": "llmlint", "version": __version__,
                                "rules": [descriptors[n] for n in names]}},
            "invocations": [{"executionSuccessful": True, "toolExecutionNotifications": notifications}],
            "results": sarif_results,
        }],
    }
    return json.dumps(doc, indent=2) + "\n"


def _descriptor(name, smell, category, effects, severity, message) -> dict:
    return {
        "id": name,
        "name": name,
        "shortDescription": {"text": message},
        "defaultConfiguration": {"level": _SARIF_LEVEL.get(severity, "warning")},
        "properties": {"smell": smell, "category": category, "effects": list(effects)},
    }
