from __future__ import annotations

from hypothesis import given, settings, strategies as st

from llmlint.syntax import NodeKind, SourcePosition, iter_call_sites, parse_source
from conftest import FIXTURES

LISTING3 = (FIXTURES / "listings" / "l3_tnes_faulty.py").read_text()
LISTING2_FIXED = (FIXTURES / "listings" / "l2_umm_corrected.py").read_text()


def test_listing3_has_one_create_call():
    tree = parse_source(LISTING3, "l3.py")
    assert tree.parse_error is None
    calls = iter_call_sites(tree)
    assert [c.callee_path for c in calls] == ["openai.chat.completions.create"]


def test_empty_file():
    tree = parse_source("", "empty.py")
    assert tree.parse_error is None
    assert tree.root.children == []
    assert iter_call_sites(tree) == []


def test_malformed_input_sets_parse_error():
    tree = parse_source("def f(:", "bad.py")
    assert tree.parse_error is not None
    assert tree.parse_error.line == 1
    assert iter_call_sites(tree) == []
    assert tree.root.children == []


def test_listing2_corrected_call_sites():
    calls = iter_call_sites(parse_source(LISTING2_FIXED, "l2.py"))
    assert [c.callee_path for c in calls] == ["OpenAI", "client.responses.create"]
    assert calls[0].keyword_args.keys() == {"timeout", "max_retries"}


def test_no_calls():
    assert iter_call_sites(parse_source("x = 1\ny = x + 2\n", "a.py")) == []


def test_nested_call_preorder():
    calls = iter_call_sites(parse_source("f(g(x))\n", "a.py"))
    assert [c.callee_path for c in calls] == ["f", "g"]


def test_enclosing_scopes_innermost_first():
    src = "class A:\n    def m(self):\n        def inner():\n            go()\n"
    (call,) = iter_call_sites(parse_source(src, "a.py"))
    assert [s.name for s in call.enclosing_scopes] == ["inner", "m", "A", "<module>"]
    assert [s.kind for s in call.enclosing_scopes] == ["function", "function", "class", "module"]


def test_decorated_and_async_defs_are_function_scopes():
    src = "@dec(1)\nasync def f():\n    await g()\n"
    tree = parse_source(src, "a.py")
    (scope,) = tree.scopes.children
    assert scope.kind == "function" and scope.span.start.line == 1
    dec, inner = iter_call_sites(tree)
    assert dec.scope.kind == "module"
    assert inner.scope.name == "f"


def test_starred_kwargs_flag():
    (call,) = iter_call_sites(parse_source("f(a, b=1, **cfg)\n", "a.py"))
    assert call.has_starred_kwargs
    assert set(call.keyword_args) == {"b"}
    kinds = [c.kind for c in call.node.children]
    assert NodeKind.STARRED_KWARGS in kinds


def test_with_options_chain_path():
    (call, inner) = iter_call_sites(parse_source("client.with_options(timeout=5).chat.create()\n", "a.py"))
    assert call.callee_path == "client.with_options().chat.create"
    assert inner.callee_path == "client.with_options"


def test_columns_count_characters():
    tree = parse_source('s = "é"; f(x)\n', "a.py")
    (call,) = iter_call_sites(tree)
    assert call.node.span.start == SourcePosition(1, 9)
    assert call.node.text == "f(x)"


def test_position_validation():
    import pytest

    with pytest.raises(ValueError):
        SourcePosition(0, 0)
    with pytest.raises(ValueError):
        SourcePosition(1, -1)


# --- properties --------------------------------------------------------------

_names = st.sampled_from(["a", "b", "client", "cfg", "x"])
_atoms = st.one_of(_names, st.integers(0, 9).map(str), st.sampled_from(['"s"', "'é'", "None"]))


@st.composite
def _exprs(draw, depth=0):
    if depth > 2:
        return draw(_atoms)
    kind = draw(st.sampled_from(["atom", "call", "attr", "dict", "list", "sub"]))
    if kind == "atom":
        return draw(_atoms)
    if kind == "call":
        args = draw(st.lists(_exprs(depth + 1), max_size=2))
        kws = draw(st.lists(st.tuples(_names, _exprs(depth + 1)), max_size=2, unique_by=lambda t: t[0]))
        parts = args + [f"{k}={v}" for k, v in kws]
        return f"({draw(_exprs(depth + 1))})({', '.join(parts)})"
    if kind == "attr":
        return f"({draw(_exprs(depth + 1))}).{draw(_names)}"
    if kind == "dict":
        items = draw(st.lists(st.tuples(_atoms, _exprs(depth + 1)), max_size=2))
        return "{" + ", ".join(f"{k}: {v}" for k, v in items) + "}"
    if kind == "list":
        return "[" + ", ".join(draw(st.lists(_exprs(depth + 1), max_size=3))) + "]"
    return f"({draw(_exprs(depth + 1))})[{draw(_atoms)}]"


@st.composite
def _programs(draw):
    lines = []
    for _ in range(draw(st.integers(1, 6))):
        stmt = draw(st.sampled_from(["assign", "expr", "def", "class"]))
        if stmt == "assign":
            lines.append(f"{draw(_names)} = {draw(_exprs())}")
        elif stmt == "expr":
            lines.append(draw(_exprs()))
        elif stmt == "def":
            lines += ["@deco", f"def f({draw(_names)}):", f"    return {draw(_exprs())}"]
        else:
            lines += ["class K:", f"    y = {draw(_exprs())}"]
    return "\n".join(lines) + "\n"


@settings(max_examples=150, deadline=None)
@given(_programs())
def test_tree_invariants(src):
    tree = parse_source(src, "gen.py")
    assert tree.parse_error is None
    for node in tree.nodes:
        # position soundness and span containment
        assert tree.slice(node.span) == node.text
        assert 1 <= node.span.start.line <= tree.line_count
        for child in node.children:
            assert child.parent is node
            assert node.span.contains(child.span)
        if node.parent is not None:
            assert node in node.parent.children
    # scopes nest
    stack = [tree.scopes]
    while stack:
        scope = stack.pop()
        for child in scope.children:
            assert scope.span.contains(child.span)
            assert child.parent_scope is scope
            stack.append(child)
    # determinism
    again = parse_source(src, "gen.py")
    assert [(n.kind, n.span) for n in again.nodes] == [(n.kind, n.span) for n in tree.nodes]
    assert [c.callee_path for c in iter_call_sites(again)] == [c.callee_path for c in iter_call_sites(tree)]


@settings(max_examples=100, deadline=None)
@given(_programs())
def test_call_sites_preorder_and_starred_flag(src):
    tree = parse_source(src, "gen.py")
    calls = iter_call_sites(tree)
    positions = [c.node.span.start for c in calls]
    call_nodes = [n for n in tree.nodes if n.kind is NodeKind.CALL]
    assert [c.node for c in calls] == call_nodes
    assert positions == [n.span.start for n in call_nodes]
    for c in calls:
        assert c.enclosing_scopes[-1] is tree.scopes
        assert c.has_starred_kwargs == any(ch.kind is NodeKind.STARRED_KWARGS for ch in c.node.children)
