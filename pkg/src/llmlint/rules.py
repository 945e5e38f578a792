"""Rule DSL: parsing, the built-in rule set and evaluation over call sites.

Grammar::

    file    := rule*
    rule    := "rule" NAME "{" attr* "forall" VAR ":" "Call" "." term ("and" term)* "}"
    attr    := KEY "=" STRING
    term    := ["not"] PRED "(" VAR ")"

Recognized attributes are ``smell``, ``category``, ``effects`` (comma separated),
``severity``, ``message`` and ``suppress``. ``suppress="kwargs"`` vetoes a
finding when the call forwards ``**kwargs``. ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Optional, Sequence

from .binding import BindingEnv
from .patterns import PatternTable
from .predicates import REGISTRY, resolved_model
from .report import Finding
from .syntax import CallSite, EnrichedTree, iter_call_sites

CATEGORIES = ("structural-or-api-usage", "data-semantics", "protocol")
EFFECTS = ("robustness", "performance", "maintainability", "reliability")
SEVERITIES = ("info", "warning", "error")
SUPPRESSIONS = ("kwargs",)
_ATTRIBUTES = ("smell", "category", "effects", "severity", "message", "suppress")


class RuleError(ValueError):
    pass


class RuleSyntaxError(RuleError):
    def __init__(self, message: str, line: int, column: int, source: Optional[str] = None):
        where = f"{source}:{line}:{column}" if source else f"{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.detail = message
        self.line = line
        self.column = column


class UnknownPredicateError(RuleError):
    pass


class DuplicateRuleError(RuleError):
    pass


@dataclass(frozen=True)
class Term:
    predicate: str
    negated: bool = False

    def __str__(self) -> str:
        return ("not " if self.negated else "") + f"{self.predicate}(c)"


@dataclass(frozen=True)
class RuleSpec:
    name: str
    smell_code: str
    category: str
    effects: tuple[str, ...]
    severity: str
    body: tuple[Term, ...]
    message: str
    quantifier: str = "call"
    suppress: tuple[str, ...] = ()

    def holds(self, call: CallSite, env: BindingEnv, patterns: PatternTable) -> bool:
        if "kwargs" in self.suppress and call.has_starred_kwargs:
            return False
        for term in self.body:
            if REGISTRY[term.predicate](call, env, patterns) == term.negated:
                return False
        return True


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[RuleSpec, ...] = ()
    source: str = "builtin"

    def __post_init__(self) -> None:
        seen = set()
        for rule in self.rules:
            if rule.name in seen:
                raise DuplicateRuleError(f"duplicate rule name {rule.name!r}")
            seen.add(rule.name)

    def __iter__(self) -> Iterator[RuleSpec]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    def get(self, name: str) -> RuleSpec:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise KeyError(name)

    def extend(self, other: "RuleSet") -> "RuleSet":
        return RuleSet(self.rules + other.rules, f"{self.source}+{other.source}")


# ------------------------------------------------------------------ parsing

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}=:.()])
""", re.VERBOSE)
_ESCAPE = re.compile(r"\\(.)")


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind == "string":
            value = _ESCAPE.sub(lambda e: {"n": "\n", "t": "\t"}.get(e.group(1), e.group(1)), value[1:-1])
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, pos - line_start + 1))  # type: ignore[arg-type]
        raw = m.group()
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = pos + raw.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, tok: _Token, expected: str):
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        raise RuleSyntaxError(f"expected {expected}, found {found}", tok.line, tok.column)

    def expect(self, kind: str, value: Optional[str] = None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (value is not None and tok.value != value):
            self.fail(tok, repr(value) if value else kind)
        return tok

    def rules(self) -> list[RuleSpec]:
        out = []
        seen = set()
        while self.peek().kind != "eof":
            tok = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else self.peek()
            rule = self.rule()
            if rule.name in seen:
                raise DuplicateRuleError(f"{tok.line}:{tok.column}: duplicate rule name {rule.name!r}")
            seen.add(rule.name)
            out.append(rule)
        return out

    def rule(self) -> RuleSpec:
        self.expect("ident", "rule")
        name_tok = self.expect("ident")
        self.expect("punct", "{")
        attrs: dict[str, tuple[str, _Token]] = {}
        while self.peek().kind == "ident" and self.peek().value != "forall":
            key = self.next()
            if key.value not in _ATTRIBUTES:
                raise RuleSyntaxError(f"unknown attribute {key.value!r}", key.line, key.column)
            if key.value in attrs:
                raise RuleSyntaxError(f"attribute {key.value!r} given twice", key.line, key.column)
            self.expect("punct", "=")
            attrs[key.value] = (self.expect("string").value, key)
        self.expect("ident", "forall")
        var = self.expect("ident").value
        self.expect("punct", ":")
        kind = self.expect("ident")
        if kind.value != "Call":
            raise RuleSyntaxError(f"unsupported quantifier domain {kind.value!r}", kind.line, kind.column)
        self.expect("punct", ".")
        body = [self.term(var)]
        while self.peek().kind == "ident" and self.peek().value == "and":
            self.next()
            body.append(self.term(var))
        self.expect("punct", "}")
        return self.build(name_tok, attrs, body)

    def term(self, var: str) -> Term:
        negated = False
        if self.peek().kind == "ident" and self.peek().value == "not":
            self.next()
            negated = True
        pred = self.expect("ident")
        if pred.value in ("and", "not", "forall"):
            self.fail(pred, "predicate name")
        self.expect("punct", "(")
        arg = self.expect("ident")
        if arg.value != var:
            raise RuleSyntaxError(f"unbound variable {arg.value!r} (quantified variable is {var!r})",
                                  arg.line, arg.column)
        self.expect("punct", ")")
        if pred.value not in REGISTRY:
            raise UnknownPredicateError(f"{pred.line}:{pred.column}: unknown predicate {pred.value!r}")
        return Term(pred.value, negated)

    def build(self, name_tok: _Token, attrs, body) -> RuleSpec:
        def get(key: str, default: str) -> str:
            return attrs[key][0] if key in attrs else default

        def check(key: str, value: str, allowed: Sequence[str]) -> None:
            if value not in allowed:
                tok = attrs[key][1]
                raise RuleSyntaxError(f"{key} must be one of {', '.join(allowed)}; got {value!r}",
                                      tok.line, tok.column)

        category = get("category", "protocol")
        severity = get("severity", "warning")
        effects = tuple(e.strip() for e in get("effects", "").split(",") if e.strip())
        suppress = tuple(s.strip() for s in get("suppress", "").split(",") if s.strip())
        if "category" in attrs:
            check("category", category, CATEGORIES)
        if "severity" in attrs:
            check("severity", severity, SEVERITIES)
        for effect in effects:
            check("effects", effect, EFFECTS)
        for s in suppress:
            check("suppress", s, SUPPRESSIONS)
        name = name_tok.value
        return RuleSpec(
            name=name,
            smell_code=get("smell", name),
            category=category,
            effects=effects,
            severity=severity,
            body=tuple(body),
            message=get("message", f"{name} smell"),
            suppress=suppress,
        )


def parse_rules(text: str, source: str = "<string>") -> RuleSet:
    """Parse rule-DSL text; raises a RuleError subclass on bad input."""
    rules = _Parser(text).rules()
    return RuleSet(tuple(rules), source)


def load_rules(path: str | Path) -> RuleSet:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise RuleError(f"{p}: cannot read rule file: {exc}") from None
    try:
        return parse_rules(text, str(p))
    except RuleSyntaxError as exc:
        raise RuleSyntaxError(exc.detail, exc.line, exc.column, str(p)) from None
    except RuleError as exc:
        raise type(exc)(f"{p}: {exc}") from None


_BUILTIN: Optional[RuleSet] = None


def builtin_rules() -> RuleSet:
    global _BUILTIN
    if _BUILTIN is None:
        text = resources.files(__package__).joinpath("builtin.rules").read_text(encoding="utf-8")
        _BUILTIN = parse_rules(text, "builtin")
    return _BUILTIN


def resolve_rule_option(option: Optional[str]) -> RuleSet:
    """``None`` -> builtins, ``FILE`` -> that file only, ``+FILE`` -> builtins plus the file."""
    if option is None:
        return builtin_rules()
    if option.startswith("+"):
        return builtin_rules().extend(load_rules(option[1:]))
    return load_rules(option)


# --------------------------------------------------------------- evaluation

class _Template(dict):
    def __missing__(self, key: str) -> str:
        return "{" + key + "}"


def _message(rule: RuleSpec, call: CallSite, env: BindingEnv, patterns: PatternTable) -> str:
    if "{" not in rule.message:
        return rule.message
    model = resolved_model(call, env, patterns)
    fields = _Template(model=model if model is not None else "<unresolved>",
                       path=env.tree.file_path, line=str(call.line), smell=rule.smell_code,
                       callee=call.callee_path)
    try:
        return rule.message.format_map(fields)
    except (ValueError, IndexError):
        return rule.message


def evaluate(rules: RuleSet, tree: EnrichedTree, env: BindingEnv, patterns: PatternTable) -> list[Finding]:
    """All (rule, call) pairs whose body holds, sorted by location and smell."""
    if tree.parse_error is not None:
        return []
    findings = []
    for call in iter_call_sites(tree):
        for rule in rules:
            if rule.holds(call, env, patterns):
                span = call.node.span
                findings.append(Finding(
                    smell_code=rule.smell_code,
                    rule_name=rule.name,
                    category=rule.category,
                    effects=rule.effects,
                    severity=rule.severity,
                    file_path=tree.file_path,
                    span=span,
                    message=_message(rule, call, env, patterns),
                    evidence=tree.slice(span),
                    callee_path=call.callee_path,
                ))
    findings.sort(key=Finding.sort_key)
    return findings
