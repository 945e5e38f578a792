"""Static detection of LLM integration code smells in Python sources."""

__version__ = "0.1.0"

from .binding import BindingEnv, build_env, last_assignment, resolve_callee, resolve_string
from .patterns import DEFAULT_PATTERNS, PatternTable, load_patterns, parse_patterns
from .report import AnalysisResult, Finding, load_results, render
from .rules import RuleSet, RuleSpec, builtin_rules, evaluate, parse_rules
from .syntax import EnrichedTree, iter_call_sites, parse_source

__all__ = [
    "AnalysisResult", "BindingEnv", "DEFAULT_PATTERNS", "EnrichedTree", "Finding", "PatternTable",
    "RuleSet", "RuleSpec", "build_env", "builtin_rules", "evaluate", "iter_call_sites",
    "last_assignment", "load_patterns", "load_results", "parse_patterns", "parse_rules",
    "parse_source", "render", "resolve_callee", "resolve_string",
]
