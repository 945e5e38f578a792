"""Boolean predicates over a call site, composed by the rule DSL.

Each predicate has the signature ``(call, env, patterns) -> bool``. Evidence
that cannot be recovered from the file counts as "no smell" so that absence
based rules stay precise. Intermediate facts (the key set a call is configured
with, its resolved model, image payloads) are memoized on the env per call.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .binding import (
    BindingEnv,
    resolve_expr,
    resolve_receiver,
    resolve_string,
)
from .patterns import PatternTable
from .syntax import CallSite, ScopeInfo, SyntaxNode, callee_segments, dotted_name

Predicate = Callable[[CallSite, BindingEnv, PatternTable], bool]

_MAX_DEPTH = 12


def _cached(env: BindingEnv, name: str, call: CallSite, patterns: PatternTable, compute):
    key = (name, id(call), id(patterns))
    hit = env._memo.get(key)
    if hit is not None and hit[0] is call and hit[1] is patterns:
        return hit[2]
    value = compute()
    env._memo[key] = (call, patterns, value)
    return value


# ---------------------------------------------------------------- evidence

@dataclass(frozen=True)
class Evidence:
    """Keyword names configuring a call, with the expressions bound to them.

    ``local`` covers the call, its ``**mapping`` arguments, nested config
    mappings and ``with_options`` chains. ``inherited`` adds the keyword
    arguments of the client constructor the receiver was built from.
    """

    local: dict[str, tuple[Optional[SyntaxNode], ...]]
    inherited: dict[str, tuple[Optional[SyntaxNode], ...]]

    def has_any(self, keys: Iterable[str], include_constructor: bool = True) -> bool:
        table = self.inherited if include_constructor else self.local
        return any(k in table for k in keys)

    def values(self, key: str) -> tuple[Optional[SyntaxNode], ...]:
        return self.inherited.get(key, ())


class _KeyCollector:
    def __init__(self, env: BindingEnv, patterns: PatternTable):
        self.env = env
        self.patterns = patterns
        self.keys: dict[str, list[Optional[SyntaxNode]]] = {}
        self._seen: set[int] = set()

    def add(self, key: str, value: Optional[SyntaxNode]) -> None:
        self.keys.setdefault(key, []).append(value)

    def keywords(self, call: ast.Call) -> None:
        tree = self.env.tree
        for kw in call.keywords:
            value = tree.node_for(kw.value)
            if kw.arg is None:
                self.mapping(value, 0, nested=False)
                continue
            self.add(kw.arg, value)
            if kw.arg in self.patterns.config_keys:
                self.mapping(value, 0, nested=True)

    def mapping(self, node: Optional[SyntaxNode], depth: int, nested: bool) -> None:
        """Record keys of a mapping-like value; ``nested`` descends into its values."""
        if node is None or depth > _MAX_DEPTH or id(node) in self._seen:
            return
        self._seen.add(id(node))
        value = resolve_expr(self.env, node)
        if value.kind == "mapping-literal":
            d: ast.Dict = value.node.ast  # type: ignore[assignment,union-attr]
            for k, v in zip(d.keys, d.values):
                v_node = self.env.tree.node_for(v)
                if k is None:  # {**other}
                    self.mapping(v_node, depth + 1, nested)
                    continue
                if isinstance(k, ast.Constant) and isinstance(k.value, str):
                    self.add(k.value, v_node)
                if nested:
                    self.mapping(v_node, depth + 1, nested)
        elif value.kind == "call-expression":
            # dict(...) or a config object such as GenerateContentConfig(...)
            call: ast.Call = value.node.ast  # type: ignore[assignment,union-attr]
            for kw in call.keywords:
                v_node = self.env.tree.node_for(kw.value)
                if kw.arg is None:
                    self.mapping(v_node, depth + 1, nested)
                    continue
                self.add(kw.arg, v_node)
                if nested:
                    self.mapping(v_node, depth + 1, nested)

    def frozen(self) -> dict[str, tuple[Optional[SyntaxNode], ...]]:
        return {k: tuple(v) for k, v in self.keys.items()}


def evidence(call: CallSite, env: BindingEnv, patterns: PatternTable) -> Evidence:
    def compute() -> Evidence:
        receiver = resolve_receiver(env, call)
        collector = _KeyCollector(env, patterns)
        collector.keywords(call.ast)
        for option in receiver.option_calls:
            collector.keywords(option)
        local = collector.frozen()
        if receiver.constructor is not None:
            collector.keywords(receiver.constructor)
        return Evidence(local, collector.frozen())

    return _cached(env, "evidence", call, patterns, compute)


def resolved_model(call: CallSite, env: BindingEnv, patterns: PatternTable) -> Optional[str]:
    """The model identifier the call targets, when it is a recoverable literal."""

    def compute() -> Optional[str]:
        for key in patterns.model_keys:
            if key in call.keyword_args:
                return resolve_string(env, call.keyword_args[key])
        receiver = resolve_receiver(env, call)
        for source in (*receiver.option_calls, receiver.constructor):
            if source is None:
                continue
            for kw in source.keywords:
                if kw.arg in patterns.model_keys:
                    return resolve_string(env, env.tree.node_for(kw.value))
        ctor = receiver.constructor
        if ctor is not None and ctor.args and receiver.tag == "gemini-model":
            return resolve_string(env, env.tree.node_for(ctor.args[0]))
        return None

    return _cached(env, "model", call, patterns, compute)


# ---------------------------------------------------------- classification

def _normalized_segments(call: CallSite, patterns: PatternTable) -> list[str]:
    return [name for name, called in callee_segments(call.ast.func)
            if not (called and name in patterns.option_methods)]


def _ends_with(segments: list[str], entry: str) -> bool:
    parts = entry.split(".")
    return len(segments) >= len(parts) and segments[-len(parts):] == parts


def _endpoint_call(call: CallSite, env: BindingEnv, patterns: PatternTable,
                   paths: tuple[str, ...]) -> bool:
    receiver = resolve_receiver(env, call)
    if receiver.tag == "constructor":
        return False
    if receiver.pipeline_task is not None:
        return receiver.pipeline_task in patterns.text_gen_pipeline_tasks
    if receiver.tag.startswith("pipeline:"):
        return False
    if receiver.tag != "unknown":
        segments = receiver.canonical_path.split(".")[1:]
        return any(_ends_with(segments, p) for p in paths)
    segments = _normalized_segments(call, patterns)
    if any(_ends_with(segments, p) for p in patterns.anonymous_receiver_paths if p in paths):
        return True
    # an unresolved receiver still counts for SDK-shaped paths called with a model
    has_model = any(k in call.keyword_args for k in patterns.model_keys)
    return has_model and any("." in p and _ends_with(segments, p) for p in paths)


def is_text_generating_call(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return _cached(env, "textgen", call, patterns,
                   lambda: _endpoint_call(call, env, patterns, patterns.text_gen_paths))


def is_llm_call(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    paths = patterns.text_gen_paths + patterns.llm_paths
    return _cached(env, "llm", call, patterns, lambda: _endpoint_call(call, env, patterns, paths))


def is_reasoning_model_call(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    if not is_llm_call(call, env, patterns):
        return False
    model = resolved_model(call, env, patterns)
    return model is not None and patterns.matches("reasoning_model_patterns", model)


def is_vision_model_call(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    if not is_llm_call(call, env, patterns):
        return False
    model = resolved_model(call, env, patterns)
    return model is not None and patterns.matches("vision_model_patterns", model)


# ----------------------------------------------------------------- messages

def _mapping_items(env: BindingEnv, node: Optional[SyntaxNode]) -> Optional[dict[str, Optional[SyntaxNode]]]:
    """String-keyed entries of a mapping literal or ``dict(...)`` call."""
    value = resolve_expr(env, node)
    tree = env.tree
    if value.kind == "mapping-literal":
        d: ast.Dict = value.node.ast  # type: ignore[assignment,union-attr]
        items = {}
        for k, v in zip(d.keys, d.values):
            if isinstance(k, ast.Constant) and isinstance(k.value, str):
                items[k.value] = tree.node_for(v)
        return items
    if value.kind == "call-expression":
        call: ast.Call = value.node.ast  # type: ignore[assignment,union-attr]
        if isinstance(call.func, ast.Name) and call.func.id == "dict" and not call.args:
            return {kw.arg: tree.node_for(kw.value) for kw in call.keywords if kw.arg}
    return None


def message_entries(call: CallSite, env: BindingEnv, patterns: PatternTable) -> Optional[list[dict]]:
    """Role-keyed message mappings passed to a chat call, or None when unresolvable."""

    def compute():
        arg = next((call.keyword_args[k] for k in patterns.message_keys if k in call.keyword_args), None)
        value = resolve_expr(env, arg)
        if value.kind != "list-literal":
            return None
        elements = value.node.ast.elts  # type: ignore[union-attr]
        if not elements:
            return None
        entries = []
        for element in elements:
            items = _mapping_items(env, env.tree.node_for(element))
            if items is None or "role" not in items:
                return None
            entries.append(items)
        return entries

    return _cached(env, "messages", call, patterns, compute)


def is_role_based_llm_chat(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return is_text_generating_call(call, env, patterns) and message_entries(call, env, patterns) is not None


def has_no_system_message(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    entries = message_entries(call, env, patterns)
    if entries is None:
        return False
    if evidence(call, env, patterns).has_any(patterns.system_keywords):
        return False
    for items in entries:
        role = resolve_string(env, items["role"])
        if role is None or role in patterns.system_roles:
            return False  # an unresolvable role might be a system one
    return True


# ------------------------------------------------------- absence predicates

def requires_temperature(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    if not is_text_generating_call(call, env, patterns):
        return False
    return not evidence(call, env, patterns).has_any(patterns.alt_sampling_keys)


def has_no_temperature_parameter(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return not evidence(call, env, patterns).has_any(patterns.temperature_keys)


def has_no_bounded_metrics(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return not evidence(call, env, patterns).has_any(patterns.bound_metric_keys)


def has_no_reasoning_effort(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return not evidence(call, env, patterns).has_any(patterns.reasoning_keys)


def _is_pinned(model: str, patterns: PatternTable) -> bool:
    if any(marker in model for marker in patterns.alias_markers):
        return False
    return patterns.matches("pinned_version_patterns", model)


def has_no_model_version_pinning(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    model = resolved_model(call, env, patterns)
    if model is None:
        return False
    if evidence(call, env, patterns).has_any(patterns.revision_keys):
        return False
    return not _is_pinned(model, patterns)


def has_no_structured_output(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    ev = evidence(call, env, patterns)
    if ev.has_any(patterns.structured_output_markers):
        return False
    for node in ev.values("response_mime_type"):
        if resolve_string(env, node) in patterns.json_mime_types:
            return False
    segments = {name for name, _ in callee_segments(call.ast.func)}
    return not segments.intersection(patterns.structured_output_markers)


def has_overspecified_sampling(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    # constructor defaults are reported on the constructor call itself
    ev = evidence(call, env, patterns)
    return (ev.has_any(patterns.temperature_keys, include_constructor=False)
            and ev.has_any(patterns.alt_sampling_keys, include_constructor=False))


def has_user_attribution(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    if call.has_starred_kwargs:
        return True
    return evidence(call, env, patterns).has_any(patterns.attribution_keys)


def has_starred_kwargs(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return call.has_starred_kwargs


# -------------------------------------------------------------------- images

@dataclass(frozen=True)
class ImageScan:
    found: bool
    payloads: tuple[SyntaxNode, ...]
    has_detail: bool


class _ImageScanner:
    def __init__(self, env: BindingEnv, patterns: PatternTable):
        self.env = env
        self.patterns = patterns
        self.found = False
        self.detail = False
        self.payloads: list[SyntaxNode] = []
        self._seen: set[int] = set()

    def _is_image_string(self, text: str) -> bool:
        return any(text.startswith(p) for p in self.patterns.image_prefixes)

    def visit(self, node: Optional[SyntaxNode], depth: int = 0, under_image: bool = False) -> None:
        if node is None or depth > _MAX_DEPTH or id(node) in self._seen:
            return
        self._seen.add(id(node))
        expr = node.ast
        tree = self.env.tree
        if isinstance(expr, ast.Name):
            value = resolve_expr(self.env, node)
            if value.known:
                self.visit(value.node, depth + 1, under_image)
            return
        if isinstance(expr, ast.Constant) and isinstance(expr.value, str):
            if self._is_image_string(expr.value):
                self.found = True
                self.payloads.append(node)
            return
        if isinstance(expr, ast.JoinedStr):
            head = expr.values[0] if expr.values else None
            if isinstance(head, ast.Constant) and isinstance(head.value, str) and self._is_image_string(head.value):
                self.found = True
                self.payloads.append(node)
            return
        if isinstance(expr, ast.Dict):
            pairs = [(k.value if isinstance(k, ast.Constant) and isinstance(k.value, str) else None,
                      tree.node_for(v)) for k, v in zip(expr.keys, expr.values)]
            self._mapping(pairs, depth, under_image)
            return
        if isinstance(expr, (ast.List, ast.Tuple, ast.Set)):
            for element in expr.elts:
                self.visit(tree.node_for(element), depth + 1, under_image)
            return
        if isinstance(expr, ast.Starred):
            self.visit(tree.node_for(expr.value), depth + 1, under_image)
            return
        if isinstance(expr, ast.Call):
            pairs = [(kw.arg, tree.node_for(kw.value)) for kw in expr.keywords]
            self._mapping(pairs, depth, under_image)
            for arg in expr.args:
                self.visit(tree.node_for(arg), depth + 1, under_image)

    def _mapping(self, pairs, depth: int, under_image: bool) -> None:
        p = self.patterns
        typed = any(k == "type" and resolve_string(self.env, v) in p.image_types for k, v in pairs)
        keyed = [(k, v) for k, v in pairs if k in p.image_keys]
        if typed or keyed:
            self.found = True
        if (typed or keyed or under_image) and any(k in p.detail_keys for k, _ in pairs):
            self.detail = True
        for k, v in keyed:
            if v is not None:
                self.payloads.append(v)
        for k, v in pairs:
            self.visit(v, depth + 1, under_image or k in p.image_keys)


def image_scan(call: CallSite, env: BindingEnv, patterns: PatternTable) -> ImageScan:
    def compute() -> ImageScan:
        scanner = _ImageScanner(env, patterns)
        for arg in call.positional_args:
            scanner.visit(arg)
        for value in call.keyword_args.values():
            scanner.visit(value)
        return ImageScan(scanner.found, tuple(scanner.payloads), scanner.detail)

    return _cached(env, "image", call, patterns, compute)


def has_image_content(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    return image_scan(call, env, patterns).found


def has_explicit_detail_level(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    scan = image_scan(call, env, patterns)
    return scan.found and scan.has_detail


def _preprocessed(env: BindingEnv, patterns: PatternTable, node: Optional[SyntaxNode],
                  depth: int, seen: set[int]) -> bool:
    if node is None or depth > _MAX_DEPTH or id(node) in seen:
        return False
    seen.add(id(node))
    expr = node.ast
    tree = env.tree

    def sub(child: ast.AST) -> bool:
        return _preprocessed(env, patterns, tree.node_for(child), depth + 1, seen)

    if isinstance(expr, ast.Name):
        value = resolve_expr(env, node)
        return value.known and _preprocessed(env, patterns, value.node, depth + 1, seen)
    if isinstance(expr, ast.Call):
        name = dotted_name(expr.func) or (expr.func.attr if isinstance(expr.func, ast.Attribute) else "")
        if name and patterns.matches("preprocessing_name_patterns", name.rsplit(".", 1)[-1]):
            return True
        receiver = expr.func.value if isinstance(expr.func, ast.Attribute) else None
        parts = [*expr.args, *(kw.value for kw in expr.keywords)]
        return (receiver is not None and sub(receiver)) or any(sub(a) for a in parts)
    if isinstance(expr, ast.JoinedStr):
        return any(sub(v.value) for v in expr.values if isinstance(v, ast.FormattedValue))
    if isinstance(expr, ast.BinOp):
        return sub(expr.left) or sub(expr.right)
    if isinstance(expr, (ast.Attribute, ast.Subscript)):
        return sub(expr.value)
    if isinstance(expr, ast.Dict):
        return any(sub(v) for v in expr.values)
    return False


def has_image_preprocessing(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    scan = image_scan(call, env, patterns)
    seen: set[int] = set()
    return any(_preprocessed(env, patterns, p, 0, seen) for p in scan.payloads)


# -------------------------------------------------------------- user context

def _scope_identifiers(env: BindingEnv) -> dict[ScopeInfo, set[str]]:
    """Identifier-like strings per scope: names, dotted chains, subscript keys."""
    key = ("scope-identifiers",)
    hit = env._memo.get(key)
    if hit is not None:
        return hit
    own: dict[ScopeInfo, set[str]] = {}
    for node in env.tree.nodes:
        expr = node.ast
        found = own.setdefault(node.scope, set())
        if isinstance(expr, ast.Name):
            found.add(expr.id)
        elif isinstance(expr, ast.arg):
            found.add(expr.arg)
        elif isinstance(expr, ast.Attribute):
            found.add(expr.attr)
            dotted = dotted_name(expr)
            if dotted is not None:
                found.add(dotted)
        elif isinstance(expr, ast.Subscript):
            s = expr.slice
            if isinstance(s, ast.Constant) and isinstance(s.value, str):
                found.add(s.value)
    full: dict[ScopeInfo, set[str]] = {}

    def collect(scope: ScopeInfo) -> set[str]:
        names = set(own.get(scope, ()))
        for child in scope.children:
            child_names = collect(child)
            if scope.kind == "function":
                names |= child_names  # nested helpers belong to the function body
        full[scope] = names
        return names

    collect(env.tree.scopes)
    env._memo[key] = full
    return full


def has_multi_user_context(call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
    table = _scope_identifiers(env)
    for scope in call.enclosing_scopes:
        if any(patterns.matches("multiuser_patterns", name) for name in table.get(scope, ())):
            return True
    return False


# ------------------------------------------------------------------ registry

REGISTRY: dict[str, Predicate] = {
    "isLLMCall": is_llm_call,
    "isTextGeneratingCall": is_text_generating_call,
    "isReasoningModelCall": is_reasoning_model_call,
    "isVisionModelCall": is_vision_model_call,
    "isRoleBasedLLMChat": is_role_based_llm_chat,
    "requiresTemperature": requires_temperature,
    "hasNoTemperatureParameter": has_no_temperature_parameter,
    "hasNoModelVersionPinning": has_no_model_version_pinning,
    "hasNoReasoningEffort": has_no_reasoning_effort,
    "hasNoBoundedMetrics": has_no_bounded_metrics,
    "hasNoStructuredOutput": has_no_structured_output,
    "hasNoSystemMessage": has_no_system_message,
    "hasImageContent": has_image_content,
    "hasImagePreprocessing": has_image_preprocessing,
    "hasExplicitDetailLevel": has_explicit_detail_level,
    "hasOverspecifiedSampling": has_overspecified_sampling,
    "hasMultiUserContext": has_multi_user_context,
    "hasUserAttribution": has_user_attribution,
    "hasStarredKwargs": has_starred_kwargs,
}
