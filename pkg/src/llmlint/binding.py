"""Intra-file evidence recovery: assignments, imports, client aliases, pipelines.

Resolution is purely textual. A name resolves to its latest assignment that
ends before the query position, searching the query scope outward. Anything
that is not a plain ``name = value`` binding (parameters, loop targets, tuple
unpacking, augmented assignment, imports) is recorded as an opaque binding,
which resolves to ``unknown`` and shadows outer assignments.
"""

from __future__ import annotations

import ast
import bisect
from dataclasses import dataclass, field
from typing import Optional

from .patterns import DEFAULT_PATTERNS, PatternTable
from .syntax import (
    CallSite,
    EnrichedTree,
    ScopeInfo,
    SourcePosition,
    SyntaxNode,
    callee_segments,
    dotted_name,
)

_MAX_ALIAS_DEPTH = 8


@dataclass(frozen=True)
class ResolvedValue:
    kind: str  # string-literal | number-literal | mapping-literal | list-literal | call-expression | unknown
    node: Optional[SyntaxNode] = None

    @property
    def known(self) -> bool:
        return self.kind != "unknown"


UNKNOWN = ResolvedValue("unknown")


@dataclass(frozen=True)
class Receiver:
    """What a call is invoked on, as far as the file tells."""

    tag: str
    canonical_path: str
    constructor: Optional[ast.Call] = None  # client construction the receiver came from
    option_calls: tuple[ast.Call, ...] = ()  # with_options(...) and friends along the chain
    pipeline_task: Optional[str] = None


@dataclass(eq=False)
class BindingEnv:
    tree: EnrichedTree
    patterns: PatternTable
    assignments: dict[tuple[ScopeInfo, str], list[tuple[SourcePosition, Optional[SyntaxNode]]]] = field(default_factory=dict)
    imports: dict[str, str] = field(default_factory=dict)
    client_aliases: dict[str, str] = field(default_factory=dict)
    pipeline_bindings: dict[str, str] = field(default_factory=dict)
    # alias name -> the constructor call node the alias was last assigned from
    constructors: dict[str, SyntaxNode] = field(default_factory=dict)
    _memo: dict = field(default_factory=dict, repr=False)

    def positions(self, scope: ScopeInfo, name: str) -> list[SourcePosition]:
        return [p for p, _ in self.assignments.get((scope, name), ())]


def classify(node: Optional[SyntaxNode]) -> ResolvedValue:
    if node is None:
        return UNKNOWN
    expr = node.ast
    if isinstance(expr, ast.Constant):
        if isinstance(expr.value, str):
            return ResolvedValue("string-literal", node)
        if isinstance(expr.value, (int, float, complex)) and not isinstance(expr.value, bool):
            return ResolvedValue("number-literal", node)
        return UNKNOWN
    if isinstance(expr, ast.Dict):
        return ResolvedValue("mapping-literal", node)
    if isinstance(expr, (ast.List, ast.Tuple)):
        return ResolvedValue("list-literal", node)
    if isinstance(expr, ast.Call):
        return ResolvedValue("call-expression", node)
    return UNKNOWN


class _EnvBuilder:
    def __init__(self, tree: EnrichedTree, patterns: PatternTable):
        self.tree = tree
        self.env = BindingEnv(tree, patterns)

    def bind(self, scope: ScopeInfo, name: str, pos: SourcePosition, value: Optional[SyntaxNode]) -> None:
        self.env.assignments.setdefault((scope, name), []).append((pos, value))

    def opaque_targets(self, target: ast.AST, scope: ScopeInfo, pos: SourcePosition) -> None:
        for sub in ast.walk(target):
            if isinstance(sub, ast.Name):
                self.bind(scope, sub.id, pos, None)

    def assign(self, targets: list[ast.AST], value: ast.AST, stmt: SyntaxNode) -> None:
        pos = stmt.span.end
        scope = stmt.scope
        wrapped = self.tree.node_for(value)
        for target in targets:
            if isinstance(target, ast.Name):
                self.bind(scope, target.id, pos, wrapped)
                self.record_client(target.id, value)
            elif isinstance(target, ast.Attribute):
                key = dotted_name(target)
                if key is not None:
                    self.record_client(key, value)
            elif isinstance(target, (ast.Tuple, ast.List, ast.Starred)):
                self.opaque_targets(target, scope, pos)

    def record_client(self, key: str, value: ast.AST) -> None:
        if not isinstance(value, ast.Call):
            return
        found = constructor_chain(self.env, value)
        if found is None:
            return
        tag, ctor, _ = found
        if tag == "pipeline":
            self.env.pipeline_bindings[key] = pipeline_task(self.env, ctor) or "unknown"
        else:
            self.env.client_aliases[key] = tag
        self.env.constructors[key] = self.tree.node_for(ctor)

    def run(self) -> BindingEnv:
        tree = self.tree
        # imports first: constructor matching consults them
        for node in tree.nodes:
            stmt = node.ast
            if isinstance(stmt, ast.Import):
                for alias in stmt.names:
                    local = alias.asname or alias.name.split(".")[0]
                    self.env.imports[local] = alias.name if alias.asname else local
                    self.bind(node.scope, local, node.span.end, None)
            elif isinstance(stmt, ast.ImportFrom):
                module = stmt.module or ""
                for alias in stmt.names:
                    local = alias.asname or alias.name
                    self.env.imports[local] = f"{module}.{alias.name}" if module else alias.name
                    self.bind(node.scope, local, node.span.end, None)
        for node in tree.nodes:
            stmt = node.ast
            if isinstance(stmt, ast.Assign):
                self.assign(stmt.targets, stmt.value, node)
            elif isinstance(stmt, ast.AnnAssign) and stmt.value is not None:
                self.assign([stmt.target], stmt.value, node)
            elif isinstance(stmt, ast.NamedExpr):
                self.assign([stmt.target], stmt.value, node)
            elif isinstance(stmt, ast.AugAssign):
                self.opaque_targets(stmt.target, node.scope, node.span.end)
            elif isinstance(stmt, (ast.For, ast.AsyncFor)):
                self.opaque_targets(stmt.target, node.scope, tree.position_of(stmt.target, end=True))
            elif isinstance(stmt, ast.withitem) or isinstance(stmt, (ast.With, ast.AsyncWith)):
                for item in getattr(stmt, "items", ()):
                    if item.optional_vars is not None:
                        self.opaque_targets(item.optional_vars, node.scope,
                                            tree.position_of(item.optional_vars, end=True))
            elif isinstance(stmt, ast.ExceptHandler) and stmt.name:
                self.bind(node.scope, stmt.name, node.span.start, None)
            elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                self.bind(node.scope, stmt.name, node.span.start, None)
            elif isinstance(stmt, ast.arg) and node.scope.kind == "function":
                self.bind(node.scope, stmt.arg, node.span.end, None)
        for entries in self.env.assignments.values():
            entries.sort(key=lambda e: e[0])
        return self.env


def build_env(tree: EnrichedTree, patterns: PatternTable = DEFAULT_PATTERNS) -> BindingEnv:
    """Collect assignments, imports, client aliases and pipelines of one file."""
    if tree.parse_error is not None:
        return BindingEnv(tree, patterns)
    return _EnvBuilder(tree, patterns).run()


def _lookup(env: BindingEnv, name: str, at: SourcePosition, scope: ScopeInfo):
    """Latest binding of ``name`` ending before ``at``; None when there is none."""
    for s in scope.chain():
        if s.kind == "class" and s is not scope:
            continue  # class bodies are not visible from nested functions
        entries = env.assignments.get((s, name))
        if not entries:
            continue
        i = bisect.bisect_left(entries, at, key=lambda e: e[0])
        if i:
            return entries[i - 1]
    return None


def last_assignment(env: BindingEnv, name: str, at: SourcePosition, scope: ScopeInfo,
                    _depth: int = 0) -> ResolvedValue:
    """Value of the textually latest assignment to ``name`` preceding ``at``.

    Plain name-to-name copies (``m = MODEL``) are followed.
    """
    entry = _lookup(env, name, at, scope)
    if entry is None or entry[1] is None:
        return UNKNOWN
    value = entry[1]
    if isinstance(value.ast, ast.Name) and _depth < _MAX_ALIAS_DEPTH:
        return last_assignment(env, value.ast.id, value.span.start, value.scope, _depth + 1)
    return classify(value)


def resolve_expr(env: BindingEnv, node: Optional[SyntaxNode]) -> ResolvedValue:
    """Classify an expression, looking through a name to its last assignment."""
    if node is None:
        return UNKNOWN
    if isinstance(node.ast, ast.Name):
        return last_assignment(env, node.ast.id, node.span.start, node.scope)
    return classify(node)


def resolve_string(env: BindingEnv, expr: Optional[SyntaxNode], at: Optional[SourcePosition] = None,
                   scope: Optional[ScopeInfo] = None) -> Optional[str]:
    """The literal string ``expr`` denotes, if it is a literal or a name bound to one."""
    if expr is None:
        return None
    if isinstance(expr.ast, ast.Name):
        value = last_assignment(env, expr.ast.id, at or expr.span.start, scope or expr.scope)
    else:
        value = classify(expr)
    if value.kind == "string-literal":
        return value.node.ast.value  # type: ignore[union-attr]
    return None


def _path_matches(path: str, entry: str) -> bool:
    return path == entry or path.endswith("." + entry)


def canonical_dotted(env: BindingEnv, dotted: str) -> str:
    head, _, rest = dotted.partition(".")
    if head in env.imports:
        base = env.imports[head]
        return f"{base}.{rest}" if rest else base
    return dotted


def constructor_tag(env: BindingEnv, call: ast.Call) -> Optional[str]:
    """Provider tag if ``call`` constructs a recognized client (or a pipeline)."""
    dotted = dotted_name(call.func)
    if dotted is None:
        return None
    canonical = canonical_dotted(env, dotted)
    for entry, tag in env.patterns.provider_constructors.items():
        if _path_matches(dotted, entry) or _path_matches(canonical, entry):
            return tag
    return None


def constructor_chain(env: BindingEnv, call: ast.Call):
    """Unwrap ``Ctor(...).with_options(...)`` chains to ``(tag, ctor_call, option_calls)``."""
    options = []
    while True:
        tag = constructor_tag(env, call)
        if tag is not None:
            return tag, call, tuple(options)
        func = call.func
        if (isinstance(func, ast.Attribute) and func.attr in env.patterns.option_methods
                and isinstance(func.value, ast.Call)):
            options.append(call)
            call = func.value
            continue
        return None


def pipeline_task(env: BindingEnv, call: ast.Call) -> Optional[str]:
    tree = env.tree
    task = None
    if call.args:
        task = resolve_string(env, tree.node_for(call.args[0]))
    for kw in call.keywords:
        if kw.arg == "task":
            task = resolve_string(env, tree.node_for(kw.value))
    return task


def _module_tag(env: BindingEnv, module_path: str) -> Optional[str]:
    best = None
    for prefix, tag in env.patterns.provider_modules.items():
        if module_path == prefix or module_path.startswith(prefix + "."):
            if best is None or len(prefix) > len(best[0]):
                best = (prefix, tag)
    return best[1] if best else None


def _receiver_chain(func: ast.AST, option_methods) -> list[ast.Call]:
    """Option-method calls (``with_options(...)``) along a callee expression."""
    found = []
    node = func
    while True:
        if isinstance(node, ast.Attribute):
            node = node.value
        elif isinstance(node, ast.Call):
            if isinstance(node.func, ast.Attribute) and node.func.attr in option_methods:
                found.append(node)
            node = node.func
        elif isinstance(node, ast.Subscript):
            node = node.value
        else:
            return found


def resolve_receiver(env: BindingEnv, call: CallSite) -> Receiver:
    key = id(call)
    hit = env._memo.get(key)
    if hit is not None and hit[0] is call:
        return hit[1]
    result = _resolve_receiver(env, call)
    env._memo[key] = (call, result)
    return result


def _resolve_receiver(env: BindingEnv, call: CallSite) -> Receiver:
    patterns = env.patterns
    func = call.ast.func
    segs = callee_segments(func)
    options = tuple(_receiver_chain(func, patterns.option_methods))
    option_names = set(patterns.option_methods)

    def rest_path(start: int) -> str:
        return ".".join(n for n, called in segs[start:] if not (called and n in option_names))

    unknown = Receiver("unknown", canonical_dotted(env, call.callee_path) if "(" not in call.callee_path
                       else call.callee_path, None, options)

    if constructor_chain(env, call.ast) is not None and not segs[-1][1]:
        dotted = dotted_name(func)
        return Receiver("constructor", canonical_dotted(env, dotted) if dotted else call.callee_path)

    head, head_called = segs[0]
    if head_called:
        # inline construction: OpenAI().chat.completions.create(...)
        inner = func
        while not (isinstance(inner, ast.Call) and dotted_name(inner.func) == head):
            inner = inner.value if isinstance(inner, ast.Attribute) else getattr(inner, "func", None)
            if inner is None or isinstance(inner, ast.Name):
                return unknown
        found = constructor_chain(env, inner)
        if found is None or found[0] == "pipeline":
            return unknown
        return Receiver(found[0], f"{found[0]}.{rest_path(1)}", found[1], options)

    consumed = 1
    ctor_node: Optional[SyntaxNode] = None
    tag: Optional[str] = None
    if head in ("self", "cls") and len(segs) > 1 and not segs[1][1]:
        key = f"{head}.{segs[1][0]}"
        if key in env.client_aliases or key in env.pipeline_bindings:
            consumed = 2
            ctor_node = env.constructors.get(key)
            tag = env.client_aliases.get(key) or "pipeline"
    if tag is None:
        entry = _lookup(env, head, call.position, call.scope)
        if entry is not None and entry[1] is not None:
            value = entry[1]
            if isinstance(value.ast, ast.Call):
                found = constructor_chain(env, value.ast)
                if found is not None:
                    tag = found[0]
                    ctor_node = env.tree.node_for(found[1])
                    options = options + found[2]
        elif entry is not None and head in env.imports:
            module = env.imports[head]
            mtag = _module_tag(env, module)
            if mtag is not None:
                return Receiver(mtag, ".".join(filter(None, [module, rest_path(1)])), None, options)
        elif entry is None:
            if head in env.client_aliases or head in env.pipeline_bindings:
                ctor_node = env.constructors.get(head)
                tag = env.client_aliases.get(head) or "pipeline"
            else:
                mtag = _module_tag(env, head)
                if mtag is not None:
                    return Receiver(mtag, call.callee_path, None, options)
    if tag is None:
        return unknown
    ctor = ctor_node.ast if ctor_node is not None else None
    if tag == "pipeline":
        if consumed != len(segs):
            return unknown
        task = pipeline_task(env, ctor) if ctor is not None else None
        task = task or "unknown"
        return Receiver(f"pipeline:{task}", f"pipeline:{task}", ctor, options, task)
    return Receiver(tag, ".".join(filter(None, [tag, rest_path(consumed)])), ctor, options)


def resolve_callee(env: BindingEnv, call: CallSite) -> tuple[str, str]:
    """``(canonical_path, tag)`` with a known client alias replaced by its provider tag."""
    r = resolve_receiver(env, call)
    return r.canonical_path, r.tag
