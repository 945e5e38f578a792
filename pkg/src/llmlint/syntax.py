"""Parse Python source into an enriched, parent-linked tree and enumerate call sites.

The tree wraps the stdlib :mod:`ast` output. Every positioned ``ast`` node gets a
:class:`SyntaxNode` carrying a coarse kind, a character-based span and links to
its parent, children and innermost scope. Nodes without positions (contexts,
operators, ``arguments`` containers) are not wrapped; their positioned
descendants hang off the nearest wrapped ancestor.
"""

from __future__ import annotations

import ast
import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

_NEWLINE = re.compile(r"\r\n|\r|\n")


class NodeKind(str, enum.Enum):
    CALL = "call"
    ASSIGNMENT = "assignment"
    FUNCTION_DEF = "function-def"
    CLASS_DEF = "class-def"
    MAPPING_LITERAL = "mapping-literal"
    LIST_LITERAL = "list-literal"
    STRING_LITERAL = "string-literal"
    NUMBER_LITERAL = "number-literal"
    NAME = "name"
    ATTRIBUTE_ACCESS = "attribute-access"
    SUBSCRIPT = "subscript"
    KEYWORD_ARGUMENT = "keyword-argument"
    STARRED_KWARGS = "starred-kwargs"
    OTHER = "other"


@dataclass(frozen=True, order=True)
class SourcePosition:
    line: int  # 1-based
    column: int  # 0-based, in characters

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 0:
            raise ValueError(f"invalid position {self.line}:{self.column}")


@dataclass(frozen=True)
class Span:
    start: SourcePosition
    end: SourcePosition

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True, eq=False)
class ScopeInfo:
    """A module, function or class scope. Compared by identity."""

    kind: str  # module | function | class
    name: str
    span: Span
    parent_scope: Optional["ScopeInfo"] = None
    children: list["ScopeInfo"] = field(default_factory=list, repr=False)

    def chain(self) -> Iterator["ScopeInfo"]:
        """Yield this scope followed by its ancestors, innermost first."""
        scope: Optional[ScopeInfo] = self
        while scope is not None:
            yield scope
            scope = scope.parent_scope

    def __repr__(self) -> str:
        return f"ScopeInfo({self.kind}:{self.name}@{self.span.start.line})"


@dataclass(frozen=True)
class ParseDiagnostic:
    message: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class SyntaxNode:
    __slots__ = ("kind", "children", "parent", "span", "ast", "scope", "tree")

    def __init__(self, kind, span, node, parent, scope, tree):
        self.kind: NodeKind = kind
        self.span: Span = span
        self.ast: ast.AST = node
        self.parent: Optional[SyntaxNode] = parent
        self.scope: ScopeInfo = scope
        self.tree: EnrichedTree = tree
        self.children: list[SyntaxNode] = []

    @property
    def text(self) -> str:
        return self.tree.slice(self.span)

    @property
    def line(self) -> int:
        return self.span.start.line

    @property
    def column(self) -> int:
        return self.span.start.column

    def walk(self) -> Iterator["SyntaxNode"]:
        """Pre-order traversal of this subtree."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self) -> str:
        s = self.span.start
        return f"<SyntaxNode {self.kind.value} {s.line}:{s.column}>"


@dataclass(frozen=True, eq=False)
class CallSite:
    node: SyntaxNode
    callee_path: str
    positional_args: tuple[SyntaxNode, ...]
    keyword_args: dict[str, SyntaxNode]
    has_starred_kwargs: bool
    enclosing_scopes: tuple[ScopeInfo, ...]

    @property
    def ast(self) -> ast.Call:
        return self.node.ast  # type: ignore[return-value]

    @property
    def line(self) -> int:
        return self.node.span.start.line

    @property
    def scope(self) -> ScopeInfo:
        return self.enclosing_scopes[0]

    @property
    def position(self) -> SourcePosition:
        return self.node.span.start


class EnrichedTree:
    """Parsed file: wrapped node tree, scope tree and source text.

    ``parse_error`` is set when the source did not parse; the root is then an
    empty module placeholder and no call sites are reported.
    """

    def __init__(self, text: str, file_path: str):
        self.file_path = file_path
        self.source = text
        self.parse_error: Optional[ParseDiagnostic] = None
        self.module_ast: ast.Module = ast.Module(body=[], type_ignores=[])
        self._lines = _NEWLINE.split(text)
        self._line_starts: list[int] = []
        offset = 0
        for m in _NEWLINE.finditer(text):
            self._line_starts.append(offset)
            offset = m.end()
        self._line_starts.append(offset)
        self._index: dict[int, SyntaxNode] = {}
        self._def_scopes: dict[int, ScopeInfo] = {}
        self.nodes: list[SyntaxNode] = []
        self.call_sites: list[CallSite] = []
        whole = Span(SourcePosition(1, 0), SourcePosition(self.line_count, len(self._lines[-1])))
        self.scopes = ScopeInfo("module", "<module>", whole)
        self.root = SyntaxNode(NodeKind.OTHER, whole, self.module_ast, None, self.scopes, self)

    @property
    def line_count(self) -> int:
        return len(self._lines)

    def slice(self, span: Span) -> str:
        a = self._line_starts[span.start.line - 1] + span.start.column
        b = self._line_starts[span.end.line - 1] + span.end.column
        return self.source[a:b]

    def node_for(self, node: ast.AST) -> Optional[SyntaxNode]:
        """The wrapper of an ``ast`` node, if it was positioned."""
        return self._index.get(id(node))

    def char_column(self, line: int, byte_col: int) -> int:
        text = self._lines[line - 1]
        if text.isascii():
            return byte_col
        return len(text.encode("utf-8")[:byte_col].decode("utf-8", "ignore"))

    def position_of(self, node: ast.AST, end: bool = False) -> SourcePosition:
        if end:
            line, col = node.end_lineno, node.end_col_offset  # type: ignore[attr-defined]
        else:
            line, col = node.lineno, node.col_offset  # type: ignore[attr-defined]
        line = min(max(line, 1), self.line_count)
        return SourcePosition(line, self.char_column(line, col))


_CONSTANT_KINDS = {str: NodeKind.STRING_LITERAL, int: NodeKind.NUMBER_LITERAL,
                   float: NodeKind.NUMBER_LITERAL, complex: NodeKind.NUMBER_LITERAL}


def _kind_of(node: ast.AST) -> NodeKind:
    if isinstance(node, ast.Call):
        return NodeKind.CALL
    if isinstance(node, (ast.Assign, ast.AnnAssign, ast.AugAssign)):
        return NodeKind.ASSIGNMENT
    if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
        return NodeKind.FUNCTION_DEF
    if isinstance(node, ast.ClassDef):
        return NodeKind.CLASS_DEF
    if isinstance(node, ast.Dict):
        return NodeKind.MAPPING_LITERAL
    if isinstance(node, ast.List):
        return NodeKind.LIST_LITERAL
    if isinstance(node, ast.Constant):
        # bool is an int subclass; type() lookup keeps it out
        return _CONSTANT_KINDS.get(type(node.value), NodeKind.OTHER)
    if isinstance(node, ast.Name):
        return NodeKind.NAME
    if isinstance(node, ast.Attribute):
        return NodeKind.ATTRIBUTE_ACCESS
    if isinstance(node, ast.Subscript):
        return NodeKind.SUBSCRIPT
    if isinstance(node, ast.keyword):
        return NodeKind.KEYWORD_ARGUMENT if node.arg is not None else NodeKind.STARRED_KWARGS
    return NodeKind.OTHER


def _clamp(span: Span, outer: Span) -> Span:
    start = min(max(span.start, outer.start), outer.end)
    end = min(max(span.end, start), outer.end)
    return Span(start, end)


def _build(tree: EnrichedTree, module: ast.Module) -> None:
    root = tree.root
    stack: list[tuple[ast.AST, SyntaxNode, ScopeInfo]] = [(module, root, tree.scopes)]
    while stack:
        node, owner, scope = stack.pop()
        for fname, value in ast.iter_fields(node):
            children = value if isinstance(value, list) else [value]
            child_scope = scope
            if owner.ast is node and fname != "decorator_list":
                child_scope = tree._def_scopes.get(id(owner), scope)
            for child in children:
                if not isinstance(child, ast.AST):
                    continue
                if getattr(child, "end_lineno", None) is None:
                    # unpositioned container: lift its children to `owner`
                    stack.append((child, owner, child_scope))
                    continue
                wrapper = _wrap(tree, child, owner, child_scope)
                stack.append((child, wrapper, child_scope))


def _wrap(tree: EnrichedTree, node: ast.AST, owner: SyntaxNode, scope: ScopeInfo) -> SyntaxNode:
    start = tree.position_of(node)
    end = tree.position_of(node, end=True)
    decorators = getattr(node, "decorator_list", None)
    if decorators:
        first = decorators[0]
        start = SourcePosition(first.lineno, start.column)
    span = _clamp(Span(start, end), owner.span)
    wrapper = SyntaxNode(_kind_of(node), span, node, owner, scope, tree)
    owner.children.append(wrapper)
    tree._index[id(node)] = wrapper
    if wrapper.kind in (NodeKind.FUNCTION_DEF, NodeKind.CLASS_DEF):
        kind = "class" if wrapper.kind is NodeKind.CLASS_DEF else "function"
        inner = ScopeInfo(kind, node.name, span, scope)  # type: ignore[attr-defined]
        scope.children.append(inner)
        tree._def_scopes[id(wrapper)] = inner
    return wrapper


def parse_source(text: str, path: str) -> EnrichedTree:
    """Parse ``text`` into an :class:`EnrichedTree`; never raises on bad input."""
    if not path:
        raise ValueError("path must be non-empty")
    tree = EnrichedTree(text, path)
    try:
        module = ast.parse(text, filename=path, type_comments=False)
    except SyntaxError as exc:
        tree.parse_error = ParseDiagnostic(exc.msg or "invalid syntax", exc.lineno or 1, max((exc.offset or 1) - 1, 0))
        return tree
    except (ValueError, RecursionError, MemoryError) as exc:
        tree.parse_error = ParseDiagnostic(str(exc) or type(exc).__name__, 1, 0)
        return tree
    tree.module_ast = module
    tree.root.ast = module
    _build(tree, module)
    nodes = tree.nodes = list(_sorted_walk(tree.root))
    for scope in _walk_scopes(tree.scopes):
        scope.children.sort(key=lambda s: s.span.start)
    tree.call_sites = [_call_site(n) for n in nodes if n.kind is NodeKind.CALL]
    tree._def_scopes.clear()
    return tree


def _sorted_walk(root: SyntaxNode) -> Iterator[SyntaxNode]:
    stack = [root]
    while stack:
        node = stack.pop()
        node.children.sort(key=lambda c: (c.span.start, c.span.end))
        yield node
        stack.extend(reversed(node.children))


def _walk_scopes(scope: ScopeInfo) -> Iterator[ScopeInfo]:
    stack = [scope]
    while stack:
        s = stack.pop()
        yield s
        stack.extend(s.children)


def callee_segments(func: ast.AST) -> list[tuple[str, bool]]:
    """Dotted segments of a callee expression; the flag marks called segments.

    ``client.with_options(timeout=5).chat.create`` yields
    ``[("client", False), ("with_options", True), ("chat", False), ("create", False)]``.
    """
    segs: list[tuple[str, bool]] = []
    called = False
    node = func
    while True:
        if isinstance(node, ast.Call):
            called = True
            node = node.func
            continue
        if isinstance(node, ast.Attribute):
            segs.append((node.attr, called))
            node = node.value
        elif isinstance(node, ast.Name):
            segs.append((node.id, called))
            break
        elif isinstance(node, ast.Subscript):
            segs.append(("[]", called))
            node = node.value
        else:
            segs.append(("<expr>", called))
            break
        called = False
    segs.reverse()
    return segs


def dotted_name(node: ast.AST) -> Optional[str]:
    """``a.b.c`` for pure Name/Attribute chains, else None."""
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name):
        return None
    parts.append(node.id)
    return ".".join(reversed(parts))


def _call_site(node: SyntaxNode) -> CallSite:
    call: ast.Call = node.ast  # type: ignore[assignment]
    tree = node.tree
    path = ".".join(name + ("()" if called else "") for name, called in callee_segments(call.func))
    kwargs = {}
    starred = False
    for kw in call.keywords:
        if kw.arg is None:
            starred = True
        else:
            kwargs[kw.arg] = tree.node_for(kw.value)
    positional = tuple(tree.node_for(a) for a in call.args)
    return CallSite(
        node=node,
        callee_path=path,
        positional_args=positional,
        keyword_args=kwargs,
        has_starred_kwargs=starred,
        enclosing_scopes=tuple(node.scope.chain()),
    )


def iter_call_sites(tree: EnrichedTree) -> list[CallSite]:
    """All call sites in pre-order (outer call before its nested calls)."""
    if tree.parse_error is not None:
        return []
    return list(tree.call_sites)
