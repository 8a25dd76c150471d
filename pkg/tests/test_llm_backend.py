import json

import pytest
import requests

from s3ap.config import BUILTIN_PROFILES, ENV_API_KEY, BackendProfile
from s3ap.core.llm_backend import (
    BackendError,
    BackendErrorKind,
    CompletionRequest,
    HttpChatBackend,
    OracleBackedBackend,
    ResponseCache,
    ScriptedMockBackend,
    ScriptExhaustedError,
    cache_key,
)


class FakeResponse:
    def __init__(self, status_code, body):
        self.status_code = status_code
        self._body = body
        self.text = json.dumps(body)

    def json(self):
        return self._body


def _request(prompt="hello", **kwargs):
    return CompletionRequest.from_prompt("test-model", prompt, **kwargs)


def test_scripted_mock_replays_in_order():
    backend = ScriptedMockBackend(["one", "two"])
    assert backend.complete(_request("a")) == "one"
    assert backend.complete(_request("b")) == "two"
    assert [r.prompt for r in backend.requests] == ["a", "b"]
    with pytest.raises(ScriptExhaustedError):
        backend.complete(_request("c"))
    assert backend.calls == 2


def test_scripted_mock_raises_exception_items():
    backend = ScriptedMockBackend([BackendError("boom", BackendErrorKind.TRANSPORT)])
    with pytest.raises(BackendError):
        backend.complete(_request())


def test_mock_from_file(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps(["ok"]), encoding="utf-8")
    backend = ScriptedMockBackend.from_file(path)
    assert backend.identity == "mock:script.json"
    assert backend.complete(_request()) == "ok"


def test_cache_key_depends_on_identity_and_request():
    request = _request()
    assert cache_key(request, "a") == cache_key(_request(), "a")
    assert cache_key(request, "a") != cache_key(request, "b")
    assert cache_key(request, "a") != cache_key(_request(temperature=0.7), "a")


def test_cache_hit_skips_backend(tmp_path):
    cache = ResponseCache(tmp_path)
    backend = OracleBackedBackend(lambda r: r.prompt.upper(), "upper", cache)
    assert backend.complete(_request("hi")) == "HI"
    assert backend.complete(_request("hi")) == "HI"
    assert backend.calls == 1
    assert len(cache) == 1

    fresh = OracleBackedBackend(lambda r: "different", "upper", ResponseCache(tmp_path))
    assert fresh.complete(_request("hi")) == "HI"
    assert fresh.calls == 0


def test_cache_locks_come_from_a_fixed_pool(tmp_path):
    cache = ResponseCache(tmp_path, stripes=8)
    keys = [cache_key(_request(f"prompt {i}"), "pool") for i in range(500)]
    locks = {id(cache.lock_for(key)) for key in keys}
    assert cache.lock_for(keys[0]) is cache.lock_for(keys[0])
    assert 1 < len(locks) <= 8
    with pytest.raises(ValueError):
        ResponseCache(tmp_path, stripes=0)


def test_empty_request_is_rejected():
    with pytest.raises(ValueError):
        CompletionRequest("m", ())


def test_http_backend_without_key_is_auth_error(monkeypatch):
    monkeypatch.delenv(ENV_API_KEY, raising=False)
    backend = HttpChatBackend(BackendProfile(model_id="m"))
    with pytest.raises(BackendError) as info:
        backend.complete(_request())
    assert info.value.kind is BackendErrorKind.AUTH


def test_http_backend_posts_chat_completion(monkeypatch):
    monkeypatch.setenv(ENV_API_KEY, "secret")
    seen = {}

    def fake_post(self, url, json=None, headers=None, timeout=None):
        seen.update(url=url, payload=json, headers=headers)
        return FakeResponse(200, {"choices": [{"message": {"content": "answer"}}]})

    monkeypatch.setattr(requests.Session, "post", fake_post)
    backend = HttpChatBackend(BUILTIN_PROFILES["gpt-4o"], base_url="http://local/v1")
    assert backend.complete(_request(temperature=0.2)) == "answer"
    assert seen["url"] == "http://local/v1/chat/completions"
    assert seen["headers"]["Authorization"] == "Bearer secret"
    assert seen["payload"]["model"] == "test-model"
    assert seen["payload"]["temperature"] == 0.2


def test_reasoning_profiles_omit_temperature():
    backend = HttpChatBackend(BUILTIN_PROFILES["o3-mini"])
    assert "temperature" not in backend.payload(_request(temperature=0.5))


def test_constrained_schema_uses_json_mode():
    backend = HttpChatBackend(BUILTIN_PROFILES["gpt-4o"])
    payload = backend.payload(_request(constrained_schema='{"type": "object"}'))
    assert payload["response_format"]["json_schema"]["schema"] == {"type": "object"}


@pytest.mark.parametrize(
    "status, kind",
    [
        (401, BackendErrorKind.AUTH),
        (429, BackendErrorKind.RATE_LIMITED),
        (503, BackendErrorKind.TRANSPORT),
        (400, BackendErrorKind.BAD_RESPONSE),
    ],
)
def test_http_status_mapping(monkeypatch, status, kind):
    monkeypatch.setenv(ENV_API_KEY, "secret")
    monkeypatch.setattr(
        requests.Session, "post", lambda self, url, **kwargs: FakeResponse(status, {"error": "x"})
    )
    backend = HttpChatBackend(BackendProfile(model_id="m"), base_url="http://local/v1")
    with pytest.raises(BackendError) as info:
        backend.complete(_request())
    assert info.value.kind is kind
    assert info.value.status == status


def test_malformed_body_is_bad_response(monkeypatch):
    monkeypatch.setenv(ENV_API_KEY, "secret")
    monkeypatch.setattr(requests.Session, "post", lambda self, url, **kwargs: FakeResponse(200, {"choices": []}))
    backend = HttpChatBackend(BackendProfile(model_id="m"), base_url="http://local/v1")
    with pytest.raises(BackendError) as info:
        backend.complete(_request())
    assert info.value.kind is BackendErrorKind.BAD_RESPONSE
