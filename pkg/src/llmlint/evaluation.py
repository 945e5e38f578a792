"""Detector evaluation against line-level ground truth, and rater agreement."""

from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .report import Finding

VERDICTS = ("smell", "clean")
MACRO_POLICIES = ("drop", "zero")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruthLabel:
    file_path: str
    smell_code: str
    line: int
    verdict: str

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise EvaluationError(f"verdict must be smell or clean, got {self.verdict!r}")
        if self.line < 1:
            raise EvaluationError(f"label line must be >= 1, got {self.line}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise EvaluationError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


def precision(c: ConfusionCounts) -> Optional[float]:
    return c.tp / (c.tp + c.fp) if c.tp + c.fp else None


def recall(c: ConfusionCounts) -> Optional[float]:
    return c.tp / (c.tp + c.fn) if c.tp + c.fn else None


def _harmonic(p: Optional[float], r: Optional[float]) -> Optional[float]:
    if p is None or r is None or p + r == 0:
        return None
    return 2 * p * r / (p + r)


def f1(c: ConfusionCounts) -> Optional[float]:
    return _harmonic(precision(c), recall(c))


@dataclass(frozen=True)
class Scores:
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]

    @classmethod
    def of(cls, c: ConfusionCounts) -> "Scores":
        return cls(precision(c), recall(c), f1(c))


@dataclass(frozen=True)
class MacroScores(Scores):
    excluded: tuple[str, ...] = ()
    policy: str = "drop"


def micro(counts: Mapping[str, ConfusionCounts]) -> Scores:
    pooled = sum(counts.values(), ConfusionCounts())
    return Scores.of(pooled)


def _mean(values: Sequence[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def macro(counts: Mapping[str, ConfusionCounts], policy: str = "drop") -> MacroScores:
    """Unweighted mean of per-smell scores.

    ``drop`` leaves undefined scores out of each mean; ``zero`` counts them as 0.
    F1 is the mean of per-smell F1 values, not the harmonic mean of macro P and R.
    """
    if policy not in MACRO_POLICIES:
        raise EvaluationError(f"macro policy must be drop or zero, got {policy!r}")
    per = {smell: Scores.of(c) for smell, c in counts.items()}
    excluded = tuple(sorted(s for s, sc in per.items()
                            if None in (sc.precision, sc.recall, sc.f1)))

    def collect(attr: str) -> list[float]:
        values = [getattr(sc, attr) for sc in per.values()]
        if policy == "zero":
            return [0.0 if v is None else v for v in values]
        return [v for v in values if v is not None]

    return MacroScores(_mean(collect("precision")), _mean(collect("recall")), _mean(collect("f1")),
                       excluded if policy == "drop" else (), policy)


@dataclass(frozen=True)
class MetricsReport:
    per_smell: dict[str, ConfusionCounts]
    micro: Scores
    macro: MacroScores

    @classmethod
    def build(cls, counts: Mapping[str, ConfusionCounts], policy: str = "drop") -> "MetricsReport":
        ordered = dict(sorted(counts.items()))
        return cls(ordered, micro(ordered), macro(ordered, policy))

    def scores(self, smell: str) -> Scores:
        return Scores.of(self.per_smell[smell])

    def to_json(self) -> dict:
        def s(x: Scores) -> dict:
            return {"precision": x.precision, "recall": x.recall, "f1": x.f1}

        return {
            "per_smell": {
                smell: {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn, **s(Scores.of(c))}
                for smell, c in self.per_smell.items()
            },
            "micro": s(self.micro),
            "macro": {**s(self.macro), "policy": self.macro.policy, "excluded": list(self.macro.excluded)},
        }

    def to_text(self) -> str:
        def fmt(v: Optional[float]) -> str:
            return "N/A" if v is None else f"{v:.3f}"

        header = ("Smell", "TP", "FP", "FN", "TN", "Precision", "Recall", "F1")
        rows = []
        for smell, c in sorted(self.per_smell.items(), key=lambda kv: (-(kv[1].tp + kv[1].fn), kv[0])):
            sc = Scores.of(c)
            rows.append((smell, str(c.tp), str(c.fp), str(c.fn), str(c.tn),
                         fmt(sc.precision), fmt(sc.recall), fmt(sc.f1)))
        agg = [("Micro", "", "", "", "", fmt(self.micro.precision), fmt(self.micro.recall), fmt(self.micro.f1)),
               ("Macro", "", "", "", "", fmt(self.macro.precision), fmt(self.macro.recall), fmt(self.macro.f1))]
        table = [header, *rows, *agg]
        widths = [max(len(r[i]) for r in table) for i in range(len(header))]

        def line(r) -> str:
            return "  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]).rstrip()

        out = [line(header), "  ".join("-" * w for w in widths)]
        out += [line(r) for r in rows]
        out.append("  ".join("-" * w for w in widths))
        out += [line(r) for r in agg]
        if self.macro.excluded:
            out.append(f"macro excludes undefined: {', '.join(self.macro.excluded)}")
        return "\n".join(out) + "\n"


# ----------------------------------------------------------------- labels

def read_labels(text: str) -> list[GroundTruthLabel]:
    """Parse a ``file,smell,line,verdict`` CSV; duplicates are an error."""
    reader = csv.DictReader(io.StringIO(text))
    expected = {"file", "smell", "line", "verdict"}
    if reader.fieldnames is None or not expected.issubset({f.strip() for f in reader.fieldnames}):
        raise EvaluationError("labels CSV needs a header `file,smell,line,verdict`")
    labels = []
    for n, row in enumerate(reader, 2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        try:
            line = int(row["line"])
        except ValueError:
            raise EvaluationError(f"labels row {n}: line {row['line']!r} is not an integer") from None
        labels.append(GroundTruthLabel(row["file"], row["smell"], line, row["verdict"].lower()))
    check_unique(labels)
    return labels


def check_unique(labels: Iterable[GroundTruthLabel]) -> None:
    seen = set()
    for label in labels:
        key = (_norm(label.file_path), label.smell_code, label.line)
        if key in seen:
            raise EvaluationError(f"duplicate label {label.file_path}:{label.line} {label.smell_code}")
        seen.add(key)


def _norm(path: str) -> str:
    return os.path.normpath(path).replace(os.sep, "/")


def _pairs(found: list[int], wanted: list[int], tolerance: Optional[int]) -> int:
    """Size of the greedy nearest-first one-to-one matching between line lists."""
    candidates = []
    for i, fl in enumerate(found):
        for j, ll in enumerate(wanted):
            d = 0 if tolerance is None else abs(fl - ll)
            if tolerance is None or d <= tolerance:
                candidates.append((d, fl, ll, i, j))
    candidates.sort()
    used_f, used_l = set(), set()
    for _, _, _, i, j in candidates:
        if i not in used_f and j not in used_l:
            used_f.add(i)
            used_l.add(j)
    return len(used_f)


def match(findings: Iterable[Finding], labels: Sequence[GroundTruthLabel], mode: str = "line",
          line_tolerance: int = 0) -> dict[str, ConfusionCounts]:
    """Per-smell confusion counts of findings against labels.

    Findings in files without any label are ignored: nothing certifies them as
    false positives. ``file`` mode ignores line numbers.
    """
    if mode not in ("line", "file"):
        raise EvaluationError(f"match mode must be line or file, got {mode!r}")
    if line_tolerance < 0:
        raise EvaluationError("line tolerance must be >= 0")
    check_unique(labels)
    tolerance = None if mode == "file" else line_tolerance
    labeled_files = {_norm(l.file_path) for l in labels}
    smell_labels: dict[tuple[str, str], list[int]] = defaultdict(list)
    clean_labels: dict[tuple[str, str], list[int]] = defaultdict(list)
    for l in labels:
        target = smell_labels if l.verdict == "smell" else clean_labels
        target[(_norm(l.file_path), l.smell_code)].append(l.line)
    found: dict[tuple[str, str], list[int]] = defaultdict(list)
    for f in findings:
        path = _norm(f.file_path)
        if path in labeled_files:
            found[(path, f.smell_code)].append(f.line)
    totals: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0, 0])
    for key in set(smell_labels) | set(clean_labels) | set(found):
        lines = found.get(key, [])
        wanted = smell_labels.get(key, [])
        tp = _pairs(lines, wanted, tolerance)
        tn = sum(1 for cl in clean_labels.get(key, [])
                 if not any(tolerance is None or abs(fl - cl) <= tolerance for fl in lines))
        t = totals[key[1]]
        t[0] += tp
        t[1] += len(lines) - tp
        t[2] += len(wanted) - tp
        t[3] += tn
    return {smell: ConfusionCounts(*t) for smell, t in sorted(totals.items())}


# ---------------------------------------------------------- rater agreement

def fleiss_kappa(matrix: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa for an items x categories matrix of rating counts."""
    rows = [list(r) for r in matrix]
    if len(rows) < 2:
        raise EvaluationError("need at least two items")
    width = len(rows[0])
    if width < 1 or any(len(r) != width for r in rows):
        raise EvaluationError("every item needs the same number of categories")
    if any(v < 0 for r in rows for v in r):
        raise EvaluationError("rating counts must be non-negative")
    raters = sum(rows[0])
    if raters < 2 or any(sum(r) != raters for r in rows):
        raise EvaluationError("every item needs the same number (>= 2) of raters")
    n_items = len(rows)
    p_bar = sum((sum(v * v for v in r) - raters) / (raters * (raters - 1)) for r in rows) / n_items
    p_j = [sum(r[j] for r in rows) / (n_items * raters) for j in range(width)]
    p_e = sum(p * p for p in p_j)
    if p_e >= 1.0 - 1e-12:
        if p_bar >= 1.0 - 1e-12:
            return 1.0
        raise EvaluationError("kappa undefined: chance agreement is 1")
    return (p_bar - p_e) / (1 - p_e)
