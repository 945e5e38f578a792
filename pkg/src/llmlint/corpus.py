"""Corpus runs: manifests, file discovery, timeout-bounded analysis, aggregation.

Manifest format (tab separated, ``#`` comments)::

    project-a	/path/to/project-a
    project-b	relative/to/manifest
    [exclude]
    **/vendor/**
    **/migrations/**
    [options]
    timeout = 5
    jobs = 4
"""

from __future__ import annotations

import json
import os
import re
import signal
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .binding import build_env
from .patterns import DEFAULT_PATTERNS, PatternTable
from .report import AnalysisResult, sort_results
from .rules import RuleSet, builtin_rules, evaluate
from .sampling import SamplePlan, cochran_sample_size, plan_sample, stratified_allocation  # noqa: F401
from .syntax import parse_source


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusManifest:
    projects: tuple[tuple[str, Path], ...]
    exclude_globs: tuple[str, ...] = ()
    per_file_timeout_s: Optional[float] = None
    parallelism: int = 1

    def __post_init__(self) -> None:
        ids = [p for p, _ in self.projects]
        if len(set(ids)) != len(ids):
            raise ManifestError("project ids must be unique")
        if self.per_file_timeout_s is not None and self.per_file_timeout_s <= 0:
            raise ManifestError("timeout must be positive")
        if self.parallelism < 1:
            raise ManifestError("parallelism must be at least 1")


def parse_manifest(text: str, base_dir: Union[str, Path] = ".") -> CorpusManifest:
    base = Path(base_dir)
    projects: list[tuple[str, Path]] = []
    excludes: list[str] = []
    options: dict[str, str] = {}
    section = "projects"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("exclude", "options", "projects"):
                raise ManifestError(f"line {lineno}: unknown section [{section}]")
            continue
        if section == "exclude":
            excludes.append(line)
        elif section == "options":
            key, sep, value = line.partition("=")
            if not sep:
                raise ManifestError(f"line {lineno}: expected `key = value`")
            options[key.strip()] = value.strip()
        else:
            parts = raw.rstrip("\r\n").split("\t")
            parts = [p.strip() for p in parts if p.strip()]
            if len(parts) != 2:
                raise ManifestError(f"line {lineno}: expected `project_id<TAB>root_path`")
            root = Path(parts[1])
            projects.append((parts[0], root if root.is_absolute() else base / root))
    unknown = set(options) - {"timeout", "jobs"}
    if unknown:
        raise ManifestError(f"unknown option(s): {', '.join(sorted(unknown))}")
    try:
        timeout = float(options["timeout"]) if "timeout" in options else None
        jobs = int(options.get("jobs", "1"))
    except ValueError as exc:
        raise ManifestError(f"bad option value: {exc}") from None
    return CorpusManifest(tuple(projects), tuple(excludes), timeout, jobs)


def load_manifest(path: Union[str, Path]) -> CorpusManifest:
    p = Path(path)
    return parse_manifest(p.read_text(encoding="utf-8"), p.parent)


def glob_to_regex(pattern: str) -> re.Pattern[str]:
    """Translate a path glob where ``**`` spans directories and ``*`` does not."""
    out = []
    i = 0
    while i < len(pattern):
        c = pattern[i]
        if pattern.startswith("**/", i):
            out.append("(?:.*/)?")
            i += 3
        elif pattern.startswith("**", i):
            out.append(".*")
            i += 2
        elif c == "*":
            out.append("[^/]*")
            i += 1
        elif c == "?":
            out.append("[^/]")
            i += 1
        elif c == "[":
            end = pattern.find("]", i + 1)
            if end == -1:
                out.append(re.escape(c))
                i += 1
            else:
                body = pattern[i + 1:end]
                if body.startswith("!"):
                    body = "^" + body[1:]
                out.append(f"[{body}]")
                i = end + 1
        else:
            out.append(re.escape(c))
            i += 1
    return re.compile("".join(out) + r"\Z")


def is_excluded(rel_path: str, globs: Sequence[re.Pattern[str]]) -> bool:
    return any(g.match(rel_path) for g in globs)


def discover_files(root: Path, exclude_globs: Sequence[str] = (),
                   errors: Optional[list] = None) -> list[Path]:
    """``.py`` files under ``root`` (or ``root`` itself), minus exclusions, sorted."""
    globs = [glob_to_regex(g) for g in exclude_globs]
    if root.is_file():
        return [root] if not is_excluded(root.name, globs) else []
    if not root.is_dir():
        if errors is not None:
            errors.append((str(root), "not a directory"))
        return []
    found = []

    def on_error(exc: OSError) -> None:
        if errors is not None:
            errors.append((str(exc.filename or root), exc.strerror or str(exc)))

    for dirpath, dirnames, filenames in os.walk(root, onerror=on_error):
        dirnames.sort()
        for name in filenames:
            if not name.endswith(".py"):
                continue
            path = Path(dirpath, name)
            if not is_excluded(path.relative_to(root).as_posix(), globs):
                found.append(path)
    return sorted(found, key=lambda p: p.as_posix())


def enumerate_files(manifest: CorpusManifest, errors: Optional[list] = None) -> list[tuple[str, Path]]:
    """``(project_id, path)`` pairs for every analyzable file; root errors go to ``errors``."""
    out = []
    for project_id, root in manifest.projects:
        local: list = []
        for path in discover_files(root, manifest.exclude_globs, local):
            out.append((project_id, path))
        if errors is not None:
            errors.extend((project_id, f"{where}: {msg}") for where, msg in local)
    return sorted(out, key=lambda e: e[1].as_posix())


# ----------------------------------------------------------------- analysis

class _Timeout(Exception):
    pass


def analyze_source(text: str, path: str, rules: Optional[RuleSet] = None,
                   patterns: PatternTable = DEFAULT_PATTERNS) -> AnalysisResult:
    start = time.perf_counter()
    rules = rules if rules is not None else builtin_rules()
    tree = parse_source(text, path)
    if tree.parse_error is not None:
        return AnalysisResult(path, [], time.perf_counter() - start, "parse-error")
    env = build_env(tree, patterns)
    findings = evaluate(rules, tree, env, patterns)
    return AnalysisResult(path, findings, time.perf_counter() - start, "ok")


def _alarm(signum, frame):
    raise _Timeout()


def analyze_file(path: Union[str, Path], rules: Optional[RuleSet] = None,
                 patterns: PatternTable = DEFAULT_PATTERNS,
                 timeout: Optional[float] = None) -> AnalysisResult:
    """Analyze one file, never raising for bad input; ``timeout`` bounds wall time."""
    name = str(path)
    start = time.perf_counter()
    try:
        data = Path(path).read_bytes()
    except OSError:
        return AnalysisResult(name, [], time.perf_counter() - start, "io-error")
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError:
        return AnalysisResult(name, [], time.perf_counter() - start, "parse-error")
    use_alarm = (timeout is not None and hasattr(signal, "setitimer")
                 and threading.current_thread() is threading.main_thread())
    previous = None
    try:
        if use_alarm:
            previous = signal.signal(signal.SIGALRM, _alarm)
            signal.setitimer(signal.ITIMER_REAL, timeout)
        result = analyze_source(text, name, rules, patterns)
    except _Timeout:
        return AnalysisResult(name, [], time.perf_counter() - start, "timeout")
    except RecursionError:
        return AnalysisResult(name, [], time.perf_counter() - start, "parse-error")
    finally:
        if use_alarm:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, previous)
    elapsed = time.perf_counter() - start
    if timeout is not None and elapsed > timeout:
        return AnalysisResult(name, [], elapsed, "timeout")
    result.duration_seconds = elapsed
    return result


_WORKER: dict = {}


def _init_worker(rules: RuleSet, patterns: PatternTable, timeout: Optional[float]) -> None:
    _WORKER.update(rules=rules, patterns=patterns, timeout=timeout)


def _work(path: str) -> AnalysisResult:
    return analyze_file(path, _WORKER["rules"], _WORKER["patterns"], _WORKER["timeout"])


def run_files(paths: Iterable[Union[str, Path]], rules: Optional[RuleSet] = None,
              patterns: PatternTable = DEFAULT_PATTERNS, timeout: Optional[float] = None,
              jobs: int = 1) -> list[AnalysisResult]:
    """Analyze files, in parallel when ``jobs > 1``; results are sorted by path."""
    rules = rules if rules is not None else builtin_rules()
    names = [str(p) for p in paths]
    if jobs <= 1 or len(names) <= 1:
        results = [analyze_file(n, rules, patterns, timeout) for n in names]
    else:
        chunk = max(1, len(names) // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(rules, patterns, timeout)) as pool:
            results = list(pool.map(_work, names, chunksize=chunk))
    return sort_results(results)


def run_corpus(manifest: CorpusManifest, rules: Optional[RuleSet] = None,
               patterns: PatternTable = DEFAULT_PATTERNS, jobs: Optional[int] = None,
               timeout: Optional[float] = None, errors: Optional[list] = None) -> list[AnalysisResult]:
    """One result per enumerated file; explicit ``jobs``/``timeout`` override the manifest."""
    files = enumerate_files(manifest, errors)
    return run_files(
        [p for _, p in files], rules, patterns,
        timeout if timeout is not None else manifest.per_file_timeout_s,
        jobs if jobs is not None else manifest.parallelism,
    )


def project_map(manifest: CorpusManifest, results: Sequence[AnalysisResult]) -> dict[str, str]:
    """Map each result path to the manifest project whose root contains it."""
    roots = sorted(((str(root), pid) for pid, root in manifest.projects), key=lambda r: -len(r[0]))
    out = {}
    for r in results:
        for root, pid in roots:
            if r.file_path == root or r.file_path.startswith(root.rstrip(os.sep) + os.sep):
                out[r.file_path] = pid
                break
    return out


# -------------------------------------------------------------- prevalence

@dataclass(frozen=True)
class RulePrevalence:
    files_flagged: int
    file_prevalence_pct: float
    projects_flagged: int
    project_prevalence_pct: float
    occurrences: int


@dataclass(frozen=True)
class PrevalenceReport:
    files_total: int
    flagged_files: int
    projects_total: int
    flagged_projects: int
    occurrences_total: int
    per_rule: dict[str, RulePrevalence] = field(default_factory=dict)

    @property
    def file_prevalence_pct(self) -> float:
        return _pct(self.flagged_files, self.files_total)

    @property
    def project_prevalence_pct(self) -> float:
        return _pct(self.flagged_projects, self.projects_total)

    def rows(self) -> list[tuple[str, RulePrevalence]]:
        return sorted(self.per_rule.items(), key=lambda kv: (-kv[1].files_flagged, kv[0]))

    def to_json(self) -> dict:
        return {
            "totals": {
                "files": self.files_total,
                "flagged_files": self.flagged_files,
                "file_prevalence_pct": round(self.file_prevalence_pct, 4),
                "projects": self.projects_total,
                "flagged_projects": self.flagged_projects,
                "project_prevalence_pct": round(self.project_prevalence_pct, 4),
                "occurrences": self.occurrences_total,
            },
            "per_rule": {
                smell: {
                    "files": row.files_flagged,
                    "file_prevalence_pct": round(row.file_prevalence_pct, 4),
                    "projects": row.projects_flagged,
                    "project_prevalence_pct": round(row.project_prevalence_pct, 4),
                    "occurrences": row.occurrences,
                }
                for smell, row in self.rows()
            },
        }

    def to_text(self) -> str:
        header = ("Smell", "Files", "File prev. (%)", "Projects", "Project prev. (%)", "Occurrences")
        body = [(smell, f"{r.files_flagged:,}", f"{r.file_prevalence_pct:.2f}", f"{r.projects_flagged:,}",
                 f"{r.project_prevalence_pct:.2f}", f"{r.occurrences:,}") for smell, r in self.rows()]
        body.append(("Any", f"{self.flagged_files:,}", f"{self.file_prevalence_pct:.2f}",
                     f"{self.flagged_projects:,}", f"{self.project_prevalence_pct:.2f}",
                     f"{self.occurrences_total:,}"))
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
        lines = []
        for n, row in enumerate([header, *body]):
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if n == 0 or n == len(body) - 1:
                lines.append("  ".join("-" * w for w in widths))
        lines.append(f"{self.files_total:,} files, {self.projects_total:,} projects")
        return "\n".join(lines) + "\n"


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def aggregate_prevalence(results: Sequence[AnalysisResult],
                         project_of: Union[Mapping[str, str], Callable[[str], str]],
                         smells: Iterable[str] = (),
                         projects: Optional[Iterable[str]] = None) -> PrevalenceReport:
    """File/project prevalence per smell.

    ``smells`` adds zero rows for rules that never fired; ``projects`` names the
    full project population when some projects contributed no files.
    """
    lookup = project_of.__getitem__ if isinstance(project_of, Mapping) else project_of
    all_projects = set(projects or ())
    files_by_smell: dict[str, set[str]] = {s: set() for s in smells}
    projects_by_smell: dict[str, set[str]] = {s: set() for s in smells}
    occurrences: dict[str, int] = {s: 0 for s in smells}
    flagged_files = 0
    flagged_projects: set[str] = set()
    for r in results:
        pid = lookup(r.file_path)
        all_projects.add(pid)
        if r.findings:
            flagged_files += 1
            flagged_projects.add(pid)
        for f in r.findings:
            files_by_smell.setdefault(f.smell_code, set()).add(r.file_path)
            projects_by_smell.setdefault(f.smell_code, set()).add(pid)
            occurrences[f.smell_code] = occurrences.get(f.smell_code, 0) + 1
    n_files, n_projects = len(results), len(all_projects)
    per_rule = {
        smell: RulePrevalence(
            len(files_by_smell[smell]), _pct(len(files_by_smell[smell]), n_files),
            len(projects_by_smell[smell]), _pct(len(projects_by_smell[smell]), n_projects),
            occurrences[smell],
        )
        for smell in files_by_smell
    }
    return PrevalenceReport(n_files, flagged_files, n_projects, len(flagged_projects),
                            sum(occurrences.values()), per_rule)


# ----------------------------------------------------------- runtime stats

@dataclass(frozen=True)
class RuntimeStats:
    file_count: int
    total_s: float
    throughput_files_per_s: float
    mean_s: float
    median_s: float
    p95_s: float
    min_s: float
    max_s: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_text(self) -> str:
        rows = [
            ("Number of .py files analysed", f"{self.file_count:,}"),
            ("Total analysis time", f"{self.total_s:.3f} s"),
            ("Throughput", f"{self.throughput_files_per_s:.2f} files/s"),
            ("Mean time per file", f"{self.mean_s:.4g} s"),
            ("Median time per file", f"{self.median_s:.4g} s"),
            ("95th-percentile time per file", f"{self.p95_s:.4g} s"),
            ("Minimum time per file", f"{self.min_s:.4g} s"),
            ("Maximum time per file", f"{self.max_s:.4g} s"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def runtime_stats(results: Sequence[Union[AnalysisResult, float]],
                  wall_time_s: Optional[float] = None) -> RuntimeStats:
    """Order statistics of per-file durations (lower median, nearest-rank p95).

    Throughput uses ``wall_time_s`` when given, else the sum of durations.
    """
    durations = sorted(
        (r.duration_seconds or 0.0) if isinstance(r, AnalysisResult) else float(r) for r in results
    )
    if not durations:
        raise ValueError("runtime_stats needs at least one result")
    n = len(durations)
    total = wall_time_s if wall_time_s is not None else sum(durations)
    p95_rank = max(1, -(-95 * n // 100))  # ceil(0.95 n)
    return RuntimeStats(
        file_count=n,
        total_s=total,
        throughput_files_per_s=n / total if total > 0 else float("inf"),
        mean_s=sum(durations) / n,
        median_s=durations[(n - 1) // 2],
        p95_s=durations[p95_rank - 1],
        min_s=durations[0],
        max_s=durations[-1],
    )


def dump_prevalence(report: PrevalenceReport) -> str:
    return json.dumps(report.to_json(), indent=2) + "\n"
