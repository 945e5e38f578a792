"""Token tables consumed by the predicates.

Every literal the rules match on (SDK paths, model-name regexes, keyword names)
lives here so classification can be retuned without touching predicate code.

Pattern files use one section per table and one entry per line::

    # '#' starts a comment
    [reasoning_model_patterns]      # replaces the default table
    ^o[134]
    [+vision_model_patterns]        # appends to the default table
    ^my-vision-model
    [provider_constructors]         # mapping tables use `key = value`
    MyClient = openai-client
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping


class PatternError(ValueError):
    pass


# fields whose entries are regular expressions
_REGEX_FIELDS = frozenset({
    "reasoning_model_patterns",
    "vision_model_patterns",
    "pinned_version_patterns",
    "preprocessing_name_patterns",
    "multiuser_patterns",
})
# fields whose entries are `key = value`
_MAPPING_FIELDS = frozenset({"provider_constructors", "provider_modules"})


@dataclass(frozen=True, eq=False)
class PatternTable:
    # callee path suffixes of text-generating endpoints (receiver must be an LLM client)
    text_gen_paths: tuple[str, ...] = (
        "chat.completions.create", "chat.completions.parse", "responses.create",
        "responses.parse", "messages.create", "completions.create",
        "ChatCompletion.create", "Completion.create", "generate_content",
        "generate_content_async", "invoke", "ainvoke", "predict", "chat", "generate",
        "completion", "acompletion", "text_generation", "chat_completion",
    )
    # LLM inference endpoints that are not plain text generation
    llm_paths: tuple[str, ...] = (
        "messages.stream", "chat.completions.stream", "responses.stream",
        "generate_content_stream", "stream", "astream", "batch", "abatch",
    )
    # suffixes distinctive enough to accept on an unresolved receiver
    anonymous_receiver_paths: tuple[str, ...] = (
        "chat.completions.create", "chat.completions.parse", "beta.chat.completions.parse",
        "responses.create", "responses.parse", "ChatCompletion.create", "generate_content",
        "generate_content_async",
    )
    # constructor path suffix -> provider client tag
    provider_constructors: Mapping[str, str] = field(default_factory=lambda: {
        "OpenAI": "openai-client",
        "AsyncOpenAI": "openai-client",
        "AzureOpenAI": "openai-client",
        "AsyncAzureOpenAI": "openai-client",
        "anthropic.Anthropic": "anthropic-client",
        "anthropic.AsyncAnthropic": "anthropic-client",
        "Anthropic": "anthropic-client",
        "AsyncAnthropic": "anthropic-client",
        "AnthropicBedrock": "anthropic-client",
        "genai.Client": "google-client",
        "genai.GenerativeModel": "gemini-model",
        "GenerativeModel": "gemini-model",
        "ollama.Client": "ollama-client",
        "ollama.AsyncClient": "ollama-client",
        "InferenceClient": "hf-client",
        "ChatOpenAI": "langchain-chat",
        "AzureChatOpenAI": "langchain-chat",
        "ChatAnthropic": "langchain-chat",
        "ChatGoogleGenerativeAI": "langchain-chat",
        "ChatOllama": "langchain-chat",
        "Groq": "groq-client",
        "pipeline": "pipeline",
    })
    # module path prefix -> tag for module-level calls such as openai.chat.completions.create
    provider_modules: Mapping[str, str] = field(default_factory=lambda: {
        "openai": "openai-module",
        "anthropic": "anthropic-module",
        "ollama": "ollama-module",
        "litellm": "litellm-module",
        "google.generativeai": "gemini-module",
    })
    text_gen_pipeline_tasks: tuple[str, ...] = (
        "text-generation", "text2text-generation", "image-text-to-text",
    )
    # methods that derive a configured client from another one
    option_methods: tuple[str, ...] = ("with_options", "copy", "bind")
    model_keys: tuple[str, ...] = ("model", "model_name", "model_id")
    message_keys: tuple[str, ...] = ("messages", "input", "contents")
    # keyword arguments whose mapping/config-object values are scanned for settings
    config_keys: tuple[str, ...] = (
        "generation_config", "model_kwargs", "options", "config", "extra_body",
        "thinking_config", "text", "metadata", "llm_kwargs", "sampling_params",
        "generate_kwargs", "inference_config",
    )
    reasoning_model_patterns: tuple[str, ...] = (
        r"(^|/)o[134](-|$)",
        r"(^|/)gpt-5",
        r"thinking",
        r"(^|/)(models/)?gemini-(2\.5|3)",
        r"(^|/)claude-3-7",
        r"(^|/)claude-(opus|sonnet|haiku)-4",
        r"deepseek-(reasoner|r1)",
        r"(^|/)qwq",
    )
    vision_model_patterns: tuple[str, ...] = (
        r"(^|/)gpt-4o", r"(^|/)gpt-4\.1", r"(^|/)gpt-5", r"vision", r"llava",
        r"(^|/)claude-3", r"(^|/)claude-(opus|sonnet|haiku)-4", r"gemini",
        r"pixtral", r"qwen[\d.]*-?vl",
    )
    # a model string matching any of these is a pinned snapshot
    pinned_version_patterns: tuple[str, ...] = (
        r"\d{4}-\d{2}-\d{2}",
        r"(?<!\d)\d{8}(?!\d)",
        r"@",
        r"-v\d+(\.\d+)*(:\d+)?$",
        r"-\d{3,4}$",
    )
    # a model string containing any of these is always a moving alias
    alias_markers: tuple[str, ...] = ("latest",)
    revision_keys: tuple[str, ...] = ("revision",)
    temperature_keys: tuple[str, ...] = ("temperature",)
    alt_sampling_keys: tuple[str, ...] = ("top_p", "top_k")
    bound_metric_keys: tuple[str, ...] = (
        "max_tokens", "max_output_tokens", "max_completion_tokens", "max_new_tokens",
        "num_predict", "timeout", "request_timeout", "max_retries",
    )
    reasoning_keys: tuple[str, ...] = (
        "reasoning", "reasoning_effort", "thinking", "thinking_budget", "thinking_config",
        "thinking_level", "include_thoughts",
    )
    structured_output_markers: tuple[str, ...] = (
        "response_format", "json_schema", "response_schema", "response_model",
        "text_format", "format", "tools", "functions", "with_structured_output", "parse",
    )
    json_mime_types: tuple[str, ...] = ("application/json",)
    system_roles: tuple[str, ...] = ("system", "developer")
    system_keywords: tuple[str, ...] = (
        "system", "instructions", "system_instruction", "system_prompt",
    )
    image_types: tuple[str, ...] = ("input_image", "image_url", "image")
    image_keys: tuple[str, ...] = ("image", "image_url", "images")
    image_prefixes: tuple[str, ...] = ("data:image/",)
    detail_keys: tuple[str, ...] = ("detail", "quality")
    preprocessing_name_patterns: tuple[str, ...] = (
        r"resize", r"crop", r"thumbnail", r"downscale", r"downsample", r"compress",
        r"convert", r"preprocess", r"shrink",
    )
    attribution_keys: tuple[str, ...] = (
        "user", "user_id", "end_user_id", "safety_identifier", "prompt_cache_key",
    )
    multiuser_patterns: tuple[str, ...] = (
        r"(^|\.)request\.user(\.|$)",
        r"^user_id$",
        r"^session_id$",
        r"^user_session\w*$",
        r"^tenant_id$",
        r"^account_id$",
    )

    def __post_init__(self) -> None:
        compiled = {}
        for name in _REGEX_FIELDS:
            try:
                compiled[name] = tuple(re.compile(p) for p in getattr(self, name))
            except re.error as exc:
                raise PatternError(f"{name}: bad regex: {exc}") from None
        object.__setattr__(self, "_compiled", compiled)

    def regexes(self, name: str) -> tuple[re.Pattern[str], ...]:
        return self._compiled[name]  # type: ignore[attr-defined]

    def matches(self, name: str, text: str) -> bool:
        return any(p.search(text) for p in self.regexes(name))

    def replace(self, **changes) -> "PatternTable":
        return dataclasses.replace(self, **changes)


DEFAULT_PATTERNS = PatternTable()

_FIELD_NAMES = {f.name for f in dataclasses.fields(PatternTable)}
# a '#' at line start or after whitespace opens a comment
_COMMENT = re.compile(r"(^|\s)#.*$")


def parse_patterns(text: str, base: PatternTable = DEFAULT_PATTERNS) -> PatternTable:
    """Apply a pattern file's sections on top of ``base``."""
    changes: dict[str, object] = {}
    current = None
    extend = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _COMMENT.sub("", raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            extend = current.startswith("+")
            current = current.lstrip("+").strip()
            if current not in _FIELD_NAMES:
                raise PatternError(f"line {lineno}: unknown table [{current}]")
            if current in _MAPPING_FIELDS:
                changes[current] = dict(getattr(base, current)) if extend else {}
            else:
                changes[current] = list(getattr(base, current)) if extend else []
            continue
        if current is None:
            raise PatternError(f"line {lineno}: entry outside of a [table] section")
        if current in _MAPPING_FIELDS:
            key, sep, value = line.partition("=")
            if not sep or not key.strip() or not value.strip():
                raise PatternError(f"line {lineno}: expected `key = value` in [{current}]")
            changes[current][key.strip()] = value.strip()  # type: ignore[index]
        else:
            changes[current].append(line)  # type: ignore[union-attr]
    final = {k: (v if k in _MAPPING_FIELDS else tuple(v)) for k, v in changes.items()}  # type: ignore[arg-type]
    return base.replace(**final)


def load_patterns(path: str | Path) -> PatternTable:
    return parse_patterns(Path(path).read_text(encoding="utf-8"))
