from __future__ import annotations

import json

import httpx
import pytest

from qualkit.llm import (
    HttpBackend,
    LlmRequest,
    MockBackend,
    NORMALIZATION_SCHEMA,
    PN_SCHEMA,
    Task,
    TransportError,
    build_normalization_prompt,
    build_pn_prompt,
    complete,
    extract_payload,
    mock_extract_pn,
    mock_normalization_rules,
)


def test_mock_extract_pn_from_reference_note():
    note = "R1 (pn P3333333) double component soldered on double pad, stand-off 0.2-0.3 mm"
    assert mock_extract_pn(note) == "P3333333"


def test_mock_extract_pn_absent():
    assert mock_extract_pn("soldered in HS with a stand-off of 0.2-0.3 mm") is None


def test_mock_extract_pn_case_and_spacing():
    assert mock_extract_pn("see PN  p1111111 rework") == "p1111111"


def test_mock_extract_pn_skips_short_tokens():
    assert mock_extract_pn("pn is listed later: pn A1234567 end") == "A1234567"


def test_mock_extract_pn_takes_first_match():
    assert mock_extract_pn("pn AAAAA11 then pn BBBBB22") == "AAAAA11"


def test_mock_normalization_rules_reference_cluster():
    rules = mock_normalization_rules({"ABC", "ABC Corp", "ABC Inc.", "ABC International"})
    assert len(rules) == 1
    assert rules[0].canonical == "ABC"
    assert rules[0].variants == {"ABC", "ABC Corp", "ABC Inc.", "ABC International"}


def test_mock_normalization_rules_singleton_produces_nothing():
    assert mock_normalization_rules({"XYZ"}) == []


def test_mock_normalization_rules_shortest_wins_ties_lexicographic():
    rules = mock_normalization_rules({"ABC Inter.", "abc"})
    assert len(rules) == 1
    assert rules[0].canonical == "abc"


def test_mock_rules_are_a_partition_of_inputs():
    names = {
        "Acme", "Acme Corp", "ACME Ltd", "Borel", "Borel GmbH",
        "Cetra", "Delta SA", "delta",
    }
    rules = mock_normalization_rules(names)
    seen: set[str] = set()
    for rule in rules:
        assert rule.variants <= names  # nothing invented
        assert not (rule.variants & seen)
        seen |= rule.variants


def test_mock_complete_pn_task():
    note = "R1 (pn P3333333) double component soldered"
    request = LlmRequest(Task.PN_EXTRACTION, build_pn_prompt(note), PN_SCHEMA)
    response = complete(request, MockBackend())
    assert response.compliant
    assert response.parsed == {"pn": "P3333333"}


def test_mock_complete_pn_na_branch():
    request = LlmRequest(
        Task.PN_EXTRACTION, build_pn_prompt("stand-off verified"), PN_SCHEMA
    )
    response = complete(request, MockBackend())
    assert response.compliant
    assert response.parsed == {"pn": None}


def test_mock_complete_normalization():
    names = ["ABC", "ABC Corp", "ABC Inc.", "ABC International"]
    request = LlmRequest(
        Task.NORMALIZATION_RULES,
        build_normalization_prompt(names),
        NORMALIZATION_SCHEMA,
    )
    response = complete(request, MockBackend())
    assert response.compliant
    assert response.parsed["rules"][0]["canonical"] == "ABC"


def test_mock_determinism():
    request = LlmRequest(
        Task.PN_EXTRACTION, build_pn_prompt("pn A1234567 installed"), PN_SCHEMA
    )
    first = complete(request, MockBackend())
    second = complete(request, MockBackend())
    assert first == second


def test_payload_extraction_uses_last_fence():
    prompt = "```json\n{\"decoy\": 1}\n```\nmore\n```json\n{\"note\": \"x\"}\n```"
    assert extract_payload(prompt) == {"note": "x"}


def test_request_validation():
    with pytest.raises(ValueError):
        LlmRequest(Task.PN_EXTRACTION, "", PN_SCHEMA)
    with pytest.raises(json.JSONDecodeError):
        LlmRequest(Task.PN_EXTRACTION, "x", "not json")


def _http_backend(handler) -> HttpBackend:
    transport = httpx.MockTransport(handler)
    client = httpx.Client(transport=transport, timeout=5.0)
    return HttpBackend(endpoint="http://llm.test/v1/chat", model="m", client=client)


def _chat_response(content: str) -> httpx.Response:
    return httpx.Response(
        200, json={"choices": [{"message": {"content": content}}]}
    )


def test_http_backend_compliant_first_try():
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        return _chat_response('{"pn": "P1234567"}')

    backend = _http_backend(handler)
    request = LlmRequest(Task.PN_EXTRACTION, build_pn_prompt("pn P1234567 x"), PN_SCHEMA)
    response = backend.complete(request)
    assert response.compliant and response.parsed == {"pn": "P1234567"}
    assert calls[0]["temperature"] == 0
    assert calls[0]["messages"][0]["role"] == "user"


def test_http_backend_retries_noncompliant_then_gives_up():
    count = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        count["n"] += 1
        return _chat_response("not json at all")

    backend = _http_backend(handler)
    request = LlmRequest(
        Task.PN_EXTRACTION, build_pn_prompt("pn P1234567 x"), PN_SCHEMA, max_retries=2
    )
    response = backend.complete(request)
    assert not response.compliant
    assert response.raw_text == "not json at all"
    assert count["n"] == 3  # initial try + 2 retries


def test_http_backend_schema_violation_is_noncompliant_not_error():
    backend = _http_backend(lambda r: _chat_response('{"wrong_key": 1}'))
    request = LlmRequest(Task.PN_EXTRACTION, build_pn_prompt("x y z"), PN_SCHEMA)
    response = backend.complete(request)
    assert not response.compliant
    assert response.parsed == {"wrong_key": 1}


def test_http_backend_transport_error_raises_after_retries():
    def handler(request: httpx.Request) -> httpx.Response:
        raise httpx.ConnectError("boom", request=request)

    backend = _http_backend(handler)
    request = LlmRequest(
        Task.PN_EXTRACTION, build_pn_prompt("x"), PN_SCHEMA, max_retries=1
    )
    with pytest.raises(TransportError):
        backend.complete(request)


def test_http_backend_bearer_token_header():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen.update(request.headers)
        return _chat_response('{"pn": null}')

    transport = httpx.MockTransport(handler)
    client = httpx.Client(transport=transport)
    backend = HttpBackend(
        endpoint="http://llm.test/v1/chat", api_key="sekrit", model="m", client=client
    )
    backend.complete(LlmRequest(Task.PN_EXTRACTION, build_pn_prompt("x"), PN_SCHEMA))
    assert seen.get("authorization") == "Bearer sekrit"


def test_http_backend_requires_endpoint(monkeypatch):
    monkeypatch.delenv("LLM_ENDPOINT", raising=False)
    with pytest.raises(ValueError):
        HttpBackend()
