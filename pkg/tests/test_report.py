from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from llmlint.report import AnalysisResult, Finding, FormatError, load_results, render
from llmlint.rules import builtin_rules
from llmlint.syntax import SourcePosition, Span


def finding(path="a.py", line=3, col=4, smell="TNES", rule=None, severity="warning"):
    span = Span(SourcePosition(line, col), SourcePosition(line, col + 10))
    return Finding(smell, rule or smell, "protocol", ("maintainability", "reliability"), severity,
                   path, span, "temperature not set", "x.create()", "x.create")


def test_text_line_format():
    out = render([AnalysisResult("a.py", [finding()], 0.01)], "text")
    lines = out.splitlines()
    assert lines[0] == "a.py:3:5 TNES warning: temperature not set"
    assert lines[-1] == "1 finding (TNES 1) in 1 of 1 file"


def test_non_ok_status_in_text():
    out = render([AnalysisResult("b.py", [], 0.0, "parse-error")], "text")
    assert out.splitlines()[0] == "b.py: parse-error"


@pytest.mark.parametrize("fmt", ["text", "json", "sarif"])
def test_empty_documents(fmt):
    out = render([], fmt)
    assert out.endswith("\n")
    if fmt == "json":
        assert json.loads(out) == {"files": [], "totals": {"files": 0, "flagged_files": 0,
                                                           "occurrences_by_smell": {}}}
    elif fmt == "sarif":
        doc = json.loads(out)
        assert doc["version"] == "2.1.0" and doc["runs"][0]["results"] == []
    else:
        assert out == "0 findings in 0 of 0 files\n"


def test_unknown_format():
    with pytest.raises(FormatError):
        render([], "xml")


def test_same_line_sorted_by_smell():
    r = AnalysisResult("a.py", [finding(smell="UMM"), finding(smell="NSO"), finding(smell="TNES")])
    lines = render([r], "text").splitlines()[:3]
    assert [l.split()[1] for l in lines] == ["NSO", "TNES", "UMM"]


def test_result_invariants():
    with pytest.raises(ValueError):
        AnalysisResult("a.py", [finding()], 0.0, "timeout")
    with pytest.raises(ValueError):
        AnalysisResult("a.py", [], 0.0, "exploded")
    with pytest.raises(ValueError):
        AnalysisResult("a.py", [], -1.0)


def test_sarif_shape():
    results = [AnalysisResult("a.py", [finding(line=2, col=0)], 0.1),
               AnalysisResult("b.py", [], 0.0, "timeout")]
    doc = json.loads(render(results, "sarif", rules=builtin_rules()))
    run = doc["runs"][0]
    ids = [r["id"] for r in run["tool"]["driver"]["rules"]]
    assert ids == sorted(builtin_rules().names())
    (res,) = run["results"]
    assert ids[res["ruleIndex"]] == res["ruleId"] == "TNES"
    region = res["locations"][0]["physicalLocation"]["region"]
    assert (region["startLine"], region["startColumn"]) == (2, 1)
    (note,) = run["invocations"][0]["toolExecutionNotifications"]
    assert note["message"]["text"] == "timeout"


_paths = st.sampled_from(["a.py", "pkg/b.py", "c.py"])
_findings = st.builds(finding, line=st.integers(1, 50), col=st.integers(0, 20),
                      smell=st.sampled_from(["NSO", "UMM", "TNES", "AIC"]))


@st.composite
def _results(draw):
    paths = draw(st.lists(_paths, unique=True, max_size=3))
    out = []
    for p in paths:
        status = draw(st.sampled_from(["ok", "ok", "timeout", "parse-error"]))
        fs = [] if status != "ok" else [
            finding(p, f.line, f.column, f.smell_code) for f in draw(st.lists(_findings, max_size=4))]
        out.append(AnalysisResult(p, fs, draw(st.floats(0, 5)), status))
    return out


@settings(max_examples=100, deadline=None)
@given(_results())
def test_json_round_trip(results):
    text = render(results, "json")
    back = load_results(text)
    assert render(back, "json") == text
    assert render(load_results(render(results, "json", timing=False)), "json", timing=False) == \
        render(results, "json", timing=False)


@settings(max_examples=100, deadline=None)
@given(_results(), st.randoms())
def test_order_independence(results, rnd):
    shuffled = [AnalysisResult(r.file_path, rnd.sample(r.findings, len(r.findings)), r.duration_seconds, r.status)
                for r in rnd.sample(results, len(results))]
    for fmt in ("text", "json", "sarif"):
        assert render(results, fmt) == render(shuffled, fmt)
