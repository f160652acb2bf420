"""Gateway to a chat-completion endpoint with JSON-constrained output.

Two backends share one contract: a deterministic mock that implements the
cleaning and classification tasks offline, and an HTTP client for a
chat-completions-style service (POST {model, messages, temperature: 0}).
Model misbehavior (non-JSON, schema violations) never raises; it comes back
as ``compliant=False``. Only transport failures raise, and only after the
configured retries.

Prompts carry their machine-readable payload as the final fenced JSON block,
which is also how the mock recovers its input.
"""

from __future__ import annotations

import enum
import json
import os
import re
import threading
from dataclasses import dataclass
from typing import Any

import httpx
import jsonschema

from .model import NormalizationRule, RuleState

DEFAULT_MODEL = "gpt-oss-120b"
DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MAX_IN_FLIGHT = 4

#: Trailing corporate suffix tokens dropped when clustering manufacturer names.
CORPORATE_SUFFIXES = frozenset(
    {
        "corp",
        "corporation",
        "inc",
        "incorporated",
        "inter",
        "international",
        "ltd",
        "gmbh",
        "sa",
        "spa",
    }
)

PN_PATTERN = re.compile(r"\bpn\b[\s:,;.()\-]+([A-Za-z0-9]{5,})", re.IGNORECASE)

PAYLOAD_FENCE = "```json"

NORMALIZATION_SCHEMA = json.dumps(
    {
        "type": "object",
        "required": ["rules"],
        "properties": {
            "rules": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["variants", "canonical"],
                    "properties": {
                        "variants": {"type": "array", "items": {"type": "string"}},
                        "canonical": {"type": "string"},
                    },
                },
            }
        },
    }
)

PN_SCHEMA = json.dumps(
    {
        "type": "object",
        "required": ["pn"],
        "properties": {"pn": {"type": ["string", "null"]}},
    }
)

RAG_SCHEMA = json.dumps(
    {
        "type": "object",
        "required": ["direct", "similarity", "alternative"],
        "properties": {
            "direct": {"type": "array", "items": {"type": "string"}},
            "similarity": {"type": "array", "items": {"type": "string"}},
            "alternative": {"type": "array", "items": {"type": "string"}},
        },
    }
)


class Task(str, enum.Enum):
    NORMALIZATION_RULES = "NormalizationRules"
    PN_EXTRACTION = "PnExtraction"
    RAG_CLASSIFICATION = "RagClassification"


class TransportError(RuntimeError):
    """Network-level failure after retries; distinct from non-compliant output."""


@dataclass(frozen=True)
class LlmRequest:
    task: Task
    prompt: str
    response_schema: str
    max_retries: int = 2

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        json.loads(self.response_schema)


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    parsed: Any = None
    compliant: bool = False


def _payload_block(payload: Any) -> str:
    return f"{PAYLOAD_FENCE}\n{json.dumps(payload, sort_keys=True)}\n```"


def extract_payload(prompt: str) -> Any:
    """Recover the machine-readable payload: the last fenced JSON block."""
    start = prompt.rfind(PAYLOAD_FENCE)
    if start < 0:
        raise ValueError("prompt has no JSON payload block")
    body = prompt[start + len(PAYLOAD_FENCE):]
    end = body.find("```")
    if end < 0:
        raise ValueError("unterminated JSON payload block")
    return json.loads(body[:end])


def build_normalization_prompt(names: list[str]) -> str:
    lines = [
        "You are cleaning manufacturer names from two component databases.",
        "Group together spellings that refer to the same company and pick one",
        "canonical name per group. Leave genuinely distinct companies apart.",
        "Respond with JSON only: {\"rules\": [{\"variants\": [...], \"canonical\": \"...\"}]}.",
        "",
        "Example input: [\"Acme\", \"Acme Corp\", \"Nexus Ltd\"]",
        "Example output: {\"rules\": [{\"variants\": [\"Acme\", \"Acme Corp\"], \"canonical\": \"Acme\"}]}",
        "",
        "Names to clean:",
        _payload_block({"names": sorted(names)}),
    ]
    return "\n".join(lines)


def build_pn_prompt(note: str) -> str:
    lines = [
        "Extract the part number referenced by this qualification note.",
        "Part numbers are alphanumeric tokens announced by a 'pn' marker.",
        "Respond with JSON only: {\"pn\": \"...\"} or {\"pn\": null} when absent.",
        "",
        "Example: 'R4 (pn A1234567) reflow checked' -> {\"pn\": \"A1234567\"}",
        "Example: 'stand-off verified at 0.3 mm' -> {\"pn\": null}",
        "",
        "Note:",
        _payload_block({"note": note}),
    ]
    return "\n".join(lines)


def build_rag_prompt(component: dict[str, Any], context: list[dict[str, Any]],
                     rules_text: str) -> str:
    lines = [
        "Classify which of the candidate qualification records apply to the",
        "component, using these match definitions:",
        rules_text,
        "Respond with JSON only:",
        "{\"direct\": [ids], \"similarity\": [ids], \"alternative\": [ids]}.",
        "Use only ids from the candidate list.",
        "",
        _payload_block({"component": component, "context": context}),
    ]
    return "\n".join(lines)


def mock_extract_pn(note: str) -> str | None:
    """First token announced by a case-insensitive 'pn' marker; None when absent."""
    match = PN_PATTERN.search(note)
    return match.group(1) if match else None


def _normalization_key(name: str) -> str:
    folded = name.casefold()
    cleaned = re.sub(r"[^\w\s]", " ", folded, flags=re.UNICODE)
    tokens = cleaned.split()
    while len(tokens) > 1 and tokens[-1] in CORPORATE_SUFFIXES:
        tokens.pop()
    return " ".join(tokens)


def mock_normalization_rules(names: set[str]) -> list[NormalizationRule]:
    """Cluster names by casefolded, suffix-stripped key; one rule per cluster of size >= 2.

    Canonical is the shortest member (ties: lexicographically first). The
    result is a partition of a subset of the input: no name appears twice and
    no name is invented.
    """
    if not names:
        raise ValueError("names must be nonempty")
    clusters: dict[str, set[str]] = {}
    for name in names:
        clusters.setdefault(_normalization_key(name), set()).add(name)
    rules = []
    for key in sorted(clusters):
        members = clusters[key]
        if len(members) < 2:
            continue
        canonical = min(members, key=lambda n: (len(n), n))
        rules.append(
            NormalizationRule(
                id=len(rules) + 1,
                variants=frozenset(members),
                canonical=canonical,
                state=RuleState.PROPOSED,
            )
        )
    return rules


def _mock_answer(task: Task, payload: Any) -> Any:
    if task is Task.PN_EXTRACTION:
        return {"pn": mock_extract_pn(payload["note"])}
    if task is Task.NORMALIZATION_RULES:
        rules = mock_normalization_rules(set(payload["names"]))
        return {
            "rules": [
                {"variants": sorted(r.variants), "canonical": r.canonical}
                for r in rules
            ]
        }
    if task is Task.RAG_CLASSIFICATION:
        # Deferred import: the classification rules live with the RAG harness.
        from .rag import mock_classify_payload

        return mock_classify_payload(payload)
    raise ValueError(f"unknown task {task}")


def _validate(raw_text: str, schema_text: str) -> LlmResponse:
    try:
        parsed = json.loads(raw_text)
    except json.JSONDecodeError:
        return LlmResponse(raw_text=raw_text, parsed=None, compliant=False)
    try:
        jsonschema.validate(parsed, json.loads(schema_text))
    except jsonschema.ValidationError:
        return LlmResponse(raw_text=raw_text, parsed=parsed, compliant=False)
    return LlmResponse(raw_text=raw_text, parsed=parsed, compliant=True)


class MockBackend:
    """Pure-function stand-in implementing the cleaning and RAG tasks offline."""

    def complete(self, request: LlmRequest) -> LlmResponse:
        payload = extract_payload(request.prompt)
        answer = _mock_answer(request.task, payload)
        return _validate(json.dumps(answer, sort_keys=True), request.response_schema)


class HttpBackend:
    """Client for a chat-completions endpoint; temperature pinned to 0.

    Reads LLM_ENDPOINT, LLM_API_KEY (optional bearer token) and LLM_MODEL
    from the environment unless given explicitly. Retries non-compliant
    output up to ``request.max_retries`` times, then reports compliant=False.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint or os.environ.get("LLM_ENDPOINT", "")
        if not self.endpoint:
            raise ValueError("LLM endpoint not configured (LLM_ENDPOINT)")
        self.api_key = api_key if api_key is not None else os.environ.get("LLM_API_KEY")
        self.model = model or os.environ.get("LLM_MODEL", DEFAULT_MODEL)
        self._client = client or httpx.Client(timeout=timeout_s)
        self._slots = threading.Semaphore(max_in_flight)

    def _call_once(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        with self._slots:
            response = self._client.post(self.endpoint, json=body, headers=headers)
        response.raise_for_status()
        data = response.json()
        return data["choices"][0]["message"]["content"]

    def complete(self, request: LlmRequest) -> LlmResponse:
        last = LlmResponse(raw_text="", parsed=None, compliant=False)
        attempts = request.max_retries + 1
        for attempt in range(attempts):
            try:
                raw = self._call_once(request.prompt)
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                if attempt + 1 == attempts:
                    raise TransportError(f"LLM call failed: {exc}") from exc
                continue
            last = _validate(raw, request.response_schema)
            if last.compliant:
                return last
        return last


Backend = MockBackend | HttpBackend


def complete(request: LlmRequest, backend: Backend) -> LlmResponse:
    return backend.complete(request)
