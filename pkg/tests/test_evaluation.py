from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st
from statsmodels.stats.inter_rater import fleiss_kappa as sm_fleiss

from llmlint.evaluation import (
    ConfusionCounts,
    EvaluationError,
    GroundTruthLabel,
    MetricsReport,
    f1,
    fleiss_kappa,
    macro,
    match,
    micro,
    precision,
    read_labels,
    recall,
)
from test_report import finding

RQ1 = {
    # smell: (tp, fp, fn, tn), (P, R, F1)
    "NMVP": ((84, 13, 14, 121), (0.866, 0.857, 0.862)),
    "TNES": ((33, 9, 15, 175), (0.786, 0.688, 0.733)),
    "NSO": ((26, 4, 8, 194), (0.867, 0.765, 0.812)),
    "UMM": ((18, 5, 14, 195), (0.783, 0.562, 0.655)),
    "NSM": ((16, 0, 1, 215), (1.000, 0.941, 0.970)),
    "RVP": ((3, 0, 2, 227), (1.000, 0.600, 0.750)),
    "OSP": ((3, 0, 1, 228), (1.000, 0.750, 0.857)),
}


def rq1_counts(with_empty=True):
    counts = {s: ConfusionCounts(*c) for s, (c, _) in RQ1.items()}
    if with_empty:
        counts["RENES"] = ConfusionCounts(0, 0, 0, 232)
        counts["AIC"] = ConfusionCounts(0, 0, 0, 232)
    return counts


@pytest.mark.parametrize("smell", sorted(RQ1))
def test_rq1_rows(smell):
    counts, expected = RQ1[smell]
    c = ConfusionCounts(*counts)
    for got, want in zip((precision(c), recall(c), f1(c)), expected):
        assert got == pytest.approx(want, abs=0.001)


def test_basic_examples():
    assert precision(ConfusionCounts(183, 31)) == pytest.approx(0.855, abs=0.001)
    assert precision(ConfusionCounts(0, 0)) is None
    assert recall(ConfusionCounts(0, 0, 0, 5)) is None
    assert f1(ConfusionCounts(0, 3, 3)) is None
    with pytest.raises(EvaluationError):
        ConfusionCounts(-1)


def test_micro_and_macro():
    counts = rq1_counts()
    m = micro(counts)
    assert (m.precision, m.recall, m.f1) == pytest.approx((0.855, 0.769, 0.810), abs=0.001)
    mac = macro(counts, "drop")
    assert (mac.precision, mac.recall, mac.f1) == pytest.approx((0.900, 0.738, 0.806), abs=0.001)
    assert mac.excluded == ("AIC", "RENES")
    zero = macro(counts, "zero")
    assert zero.precision < mac.precision
    with pytest.raises(EvaluationError):
        macro(counts, "mean")


def test_single_and_equal_smells():
    c = ConfusionCounts(3, 1, 2, 0)
    for agg in (micro({"A": c}), macro({"A": c})):
        assert (agg.precision, agg.recall, agg.f1) == (precision(c), recall(c), f1(c))
    m = micro({"A": c, "B": c})
    assert m.precision == precision(c) and m.recall == recall(c)


def test_metrics_report():
    report = MetricsReport.build(rq1_counts())
    text = report.to_text()
    assert text.splitlines()[2].startswith("NMVP")
    assert "macro excludes undefined: AIC, RENES" in text
    assert "N/A" in text
    doc = report.to_json()
    assert doc["per_smell"]["NSM"]["recall"] == pytest.approx(16 / 17)
    assert doc["macro"]["excluded"] == ["AIC", "RENES"]


def L(path, smell, line, verdict="smell"):
    return GroundTruthLabel(path, smell, line, verdict)


def test_match_tolerance():
    found = [finding("a.py", 10, 0, "TNES")]
    labels = [L("a.py", "TNES", 11)]
    assert match(found, labels)["TNES"] == ConfusionCounts(0, 1, 1, 0)
    assert match(found, labels, line_tolerance=1)["TNES"] == ConfusionCounts(1, 0, 0, 0)
    assert match(found, labels, mode="file")["TNES"] == ConfusionCounts(1, 0, 0, 0)


def test_match_all_tn():
    labels = [L("a.py", "NSO", 3, "clean"), L("b.py", "NSO", 5, "clean")]
    c = match([], labels)["NSO"]
    assert c == ConfusionCounts(0, 0, 0, 2)
    assert precision(c) is None and recall(c) is None


def test_unlabeled_files_ignored():
    found = [finding("elsewhere.py", 1, 0, "NSO")]
    assert match(found, [L("a.py", "NSO", 1, "clean")])["NSO"] == ConfusionCounts(0, 0, 0, 1)


def test_duplicate_labels():
    with pytest.raises(EvaluationError):
        match([], [L("a.py", "NSO", 1), L("./a.py", "NSO", 1, "clean")])
    with pytest.raises(EvaluationError):
        read_labels("file,smell,line,verdict\na.py,NSO,1,smell\na.py,NSO,1,smell\n")


def test_read_labels_errors():
    assert read_labels("file,smell,line,verdict\na.py,NSO,4,Smell\n") == [L("a.py", "NSO", 4)]
    for text in ("a,b\n", "file,smell,line,verdict\na.py,NSO,x,smell\n",
                 "file,smell,line,verdict\na.py,NSO,1,maybe\n"):
        with pytest.raises(EvaluationError):
            read_labels(text)
    with pytest.raises(EvaluationError):
        match([], [], mode="fuzzy")


_lines = st.integers(1, 12)


@st.composite
def _instance(draw):
    found_lines = draw(st.lists(_lines, max_size=6))
    label_keys = draw(st.lists(st.tuples(_lines, st.sampled_from(["smell", "clean"])), max_size=6,
                               unique_by=lambda t: t[0]))
    return found_lines, label_keys, draw(st.integers(0, 2))


def _max_matching(found, wanted, tol):
    small, large = sorted((found, wanted), key=len)
    best = 0
    for perm in itertools.permutations(range(len(large)), len(small)):
        best = max(best, sum(1 for i, j in enumerate(perm) if abs(small[i] - large[j]) <= tol))
    return best


@settings(max_examples=200, deadline=None)
@given(_instance())
def test_match_properties(instance):
    found_lines, label_keys, tol = instance
    found = [finding("a.py", l, 0, "NSO") for l in found_lines]
    labels = [L("a.py", "NSO", l, v) for l, v in label_keys]
    c = match(found, labels, line_tolerance=tol).get("NSO", ConfusionCounts())
    smell_lines = [l for l, v in label_keys if v == "smell"]
    assert c.tp + c.fn == len(smell_lines)
    assert c.tp + c.fp == (len(found) if labels else 0)
    assert c.tp <= min(len(found), len(smell_lines))
    for score in (precision(c), recall(c), f1(c)):
        assert score is None or 0 <= score <= 1
    if f1(c) is not None:
        assert f1(c) <= min(2 * precision(c), 2 * recall(c)) + 1e-12
    if tol == 0:
        # exact-line matching: greedy is optimal
        assert c.tp == _max_matching(sorted(found_lines), smell_lines, 0)


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.sampled_from(["A", "B", "C", "D"]),
                       st.tuples(*[st.integers(0, 50)] * 4), min_size=1))
def test_micro_identity(raw):
    counts = {k: ConfusionCounts(*v) for k, v in raw.items()}
    tp = sum(c.tp for c in counts.values())
    fp = sum(c.fp for c in counts.values())
    got = micro(counts).precision
    assert got == (tp / (tp + fp) if tp + fp else None)


def test_fleiss_examples():
    assert fleiss_kappa([[2, 0], [0, 2]]) == 1.0
    assert fleiss_kappa([[1, 1], [1, 1]]) == pytest.approx(-1.0)
    assert fleiss_kappa([[3, 0], [3, 0]]) == 1.0
    with pytest.raises(EvaluationError):
        fleiss_kappa([[1, 0]])
    with pytest.raises(EvaluationError):
        fleiss_kappa([[2, 0], [1, 0]])


_matrix = st.integers(2, 5).flatmap(lambda raters: st.lists(
    st.lists(st.integers(0, raters), min_size=3, max_size=3).filter(lambda r: sum(r) <= raters)
    .map(lambda r: r[:2] + [raters - r[0] - r[1]] if r[0] + r[1] <= raters else None)
    .filter(lambda r: r is not None), min_size=2, max_size=15))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(max_examples=200, deadline=None)
@given(_matrix)
def test_fleiss_matches_statsmodels(matrix):
    import numpy as np

    try:
        ours = fleiss_kappa(matrix)
    except EvaluationError:
        return
    theirs = sm_fleiss(np.array(matrix))
    if ours == 1.0 and np.isnan(theirs):
        return
    assert ours == pytest.approx(theirs, abs=1e-9)
    assert -1 - 1e-9 <= ours <= 1
