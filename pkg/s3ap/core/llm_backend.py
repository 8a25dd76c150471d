# llm_backend.py
"""
Uniform completion interface over chat-completion HTTP services, a scripted
mock and an oracle-backed deterministic responder, with a content-addressed
response cache.

Classes:
- CompletionRequest: model id, messages, temperature, optional output schema.
- ResponseCache: one `<sha256>.json` file per cached request/response pair.
- CompletionBackend: base class; counts real (non-cached) calls.
- HttpChatBackend, ScriptedMockBackend, OracleBackedBackend.
"""

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from s3ap.config import DEFAULT_BASE_URL, ENV_BASE_URL, BackendProfile
from s3ap.core import S3apError
from s3ap.core.file_handling import FileHandler, FileHandlerError

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
RETRY_STATUS = (429, 500, 502, 503, 504)
LOCK_STRIPES = 64


class BackendKind(str, Enum):
    HTTP_CHAT = "HttpChat"
    SCRIPTED_MOCK = "ScriptedMock"
    ORACLE_BACKED = "OracleBacked"


class BackendErrorKind(str, Enum):
    AUTH = "Auth"
    RATE_LIMITED = "RateLimited"
    TRANSPORT = "Transport"
    BAD_RESPONSE = "BadResponse"


class BackendError(S3apError):
    """Raised when a completion cannot be obtained from a backend."""

    def __init__(self, message, kind: BackendErrorKind, status: Optional[int] = None):
        super().__init__(message)
        self.kind = kind
        self.status = status

    def __str__(self):
        if self.status is None:
            return f"{self.args[0]} (Kind: {self.kind.value})"
        return f"{self.args[0]} (Kind: {self.kind.value}, HTTP status: {self.status})"


class ScriptExhaustedError(S3apError):
    """Raised when a scripted mock is asked for more responses than it holds."""

    def __init__(self, calls: int):
        super().__init__(f"Script exhausted after {calls} responses")
        self.calls = calls


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"Unknown message role '{self.role}'")


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: Optional[float] = 0.0
    constrained_schema: Optional[str] = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("A completion request needs at least one message")
        object.__setattr__(self, "messages", tuple(self.messages))

    @classmethod
    def from_prompt(
        cls,
        model_id: str,
        prompt: str,
        temperature: Optional[float] = 0.0,
        constrained_schema: Optional[str] = None,
        system: Optional[str] = None,
    ) -> "CompletionRequest":
        messages = [ChatMessage("system", system)] if system else []
        messages.append(ChatMessage("user", prompt))
        return cls(model_id, tuple(messages), temperature, constrained_schema)

    @property
    def prompt(self) -> str:
        """Content of the last user message."""
        return next(m.content for m in reversed(self.messages) if m.role == "user")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "constrained_schema": self.constrained_schema,
        }


def cache_key(request: CompletionRequest, identity: str = "") -> str:
    """sha256 over the backend identity and the canonical JSON of the request."""
    payload = {"identity": identity, "request": request.to_dict()}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """
    Directory of cached responses, one file per request digest.

    Writers of the same digest are serialized through a fixed pool of lock
    stripes; two digests may share a stripe.
    """

    def __init__(self, directory: Union[str, Path], stripes: int = LOCK_STRIPES):
        if stripes < 1:
            raise ValueError("A response cache needs at least one lock stripe")
        self.directory = Path(directory)
        self._locks = tuple(threading.Lock() for _ in range(stripes))

    def lock_for(self, key: str) -> threading.Lock:
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return self._locks[int.from_bytes(digest[:4], "big") % len(self._locks)]

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        path = self.path_for(key)
        if not path.is_file():
            return None
        try:
            entry = FileHandler.read_json(path)
        except FileHandlerError as e:
            logger.warning(f"Ignoring unreadable cache entry: {e}")
            return None
        return entry.get("response")

    def put(self, key: str, request: CompletionRequest, response: str, identity: str) -> None:
        entry = {"identity": identity, "request": request.to_dict(), "response": response}
        FileHandler.write_json(self.path_for(key), entry)

    def __len__(self) -> int:
        if not self.directory.is_dir():
            return 0
        return sum(1 for _ in self.directory.glob("*.json"))


class CompletionBackend:
    """Base class of every completion backend."""

    kind: BackendKind

    def __init__(
        self,
        identity: str,
        cache: Optional[ResponseCache] = None,
        supports_json_mode: bool = False,
        model_id: Optional[str] = None,
    ):
        if not identity:
            raise ValueError("Backend identity must not be empty")
        self.identity = identity
        self.model_id = model_id or identity
        self.cache = cache
        self.supports_json_mode = supports_json_mode
        self.calls = 0
        self._calls_lock = threading.Lock()

    def cache_key(self, request: CompletionRequest) -> str:
        return cache_key(request, self.identity)

    def complete(self, request: CompletionRequest) -> str:
        """Return the assistant text for `request`, from the cache when possible."""
        if self.cache is None:
            return self._counted(request)

        key = self.cache_key(request)
        with self.cache.lock_for(key):
            cached = self.cache.get(key)
            if cached is not None:
                logger.debug(f"{self.identity}: cache hit {key[:12]}")
                return cached
            text = self._counted(request)
            self.cache.put(key, request, text, self.identity)
            return text

    def _counted(self, request: CompletionRequest) -> str:
        text = self._complete(request)
        with self._calls_lock:
            self.calls += 1
        return text

    def _complete(self, request: CompletionRequest) -> str:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.identity!r})"


def complete(backend: CompletionBackend, request: CompletionRequest) -> str:
    return backend.complete(request)


class ScriptedMockBackend(CompletionBackend):
    """Replays a fixed list of responses; exception items are raised in turn."""

    kind = BackendKind.SCRIPTED_MOCK

    def __init__(
        self,
        script: Iterable[Union[str, Exception]],
        identity: str = "mock",
        cache: Optional[ResponseCache] = None,
        supports_json_mode: bool = False,
    ):
        super().__init__(identity, cache, supports_json_mode)
        self.script = list(script)
        self.requests: list[CompletionRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: Union[str, Path], **kwargs) -> "ScriptedMockBackend":
        """Load a script from a JSON array of response strings."""
        script = FileHandler.read_json(path)
        if not isinstance(script, list) or not all(isinstance(s, str) for s in script):
            raise FileHandlerError("Mock script must be a JSON array of strings", Path(path))
        kwargs.setdefault("identity", f"mock:{Path(path).name}")
        return cls(script, **kwargs)

    def _complete(self, request: CompletionRequest) -> str:
        with self._lock:
            index = len(self.requests)
            self.requests.append(request)
            if index >= len(self.script):
                raise ScriptExhaustedError(len(self.script))
            item = self.script[index]
        if isinstance(item, Exception):
            raise item
        return item


class OracleBackedBackend(CompletionBackend):
    """Answers every request with a deterministic function of the request."""

    kind = BackendKind.ORACLE_BACKED

    def __init__(
        self,
        responder: Callable[[CompletionRequest], str],
        name: str,
        cache: Optional[ResponseCache] = None,
    ):
        super().__init__(f"oracle:{name}", cache)
        self.responder = responder

    def _complete(self, request: CompletionRequest) -> str:
        return self.responder(request)


class HttpChatBackend(CompletionBackend):
    """
    OpenAI-compatible `/chat/completions` client.

    Transient failures (429 and 5xx) are retried by the session adapter with
    exponential backoff; at most `profile.max_concurrency` requests are in flight.
    """

    kind = BackendKind.HTTP_CHAT

    def __init__(
        self,
        profile: BackendProfile,
        cache: Optional[ResponseCache] = None,
        base_url: Optional[str] = None,
    ):
        super().__init__(f"http:{profile.model_id}", cache, profile.json_mode, profile.model_id)
        self.profile = profile
        self.base_url = (
            base_url or profile.base_url or os.getenv(ENV_BASE_URL) or DEFAULT_BASE_URL
        ).rstrip("/")
        self._semaphore = threading.BoundedSemaphore(profile.max_concurrency)
        self._session: Optional[requests.Session] = None
        self._session_lock = threading.Lock()

    @property
    def endpoint(self) -> str:
        return f"{self.base_url}/chat/completions"

    def session(self) -> requests.Session:
        with self._session_lock:
            if self._session is None:
                retry = Retry(
                    total=self.profile.max_retries,
                    backoff_factor=1.0,
                    status_forcelist=RETRY_STATUS,
                    allowed_methods=frozenset({"POST"}),
                    raise_on_status=False,
                    respect_retry_after_header=True,
                )
                session = requests.Session()
                session.mount("https://", HTTPAdapter(max_retries=retry))
                session.mount("http://", HTTPAdapter(max_retries=retry))
                self._session = session
            return self._session

    def payload(self, request: CompletionRequest) -> dict:
        payload: dict = {
            "model": request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        }
        if not self.profile.reasoning and request.temperature is not None:
            payload["temperature"] = request.temperature
        if request.constrained_schema and self.profile.json_mode:
            payload["response_format"] = {
                "type": "json_schema",
                "json_schema": {
                    "name": "socialized_structure",
                    "schema": json.loads(request.constrained_schema),
                },
            }
        return payload

    def _complete(self, request: CompletionRequest) -> str:
        api_key = os.getenv(self.profile.api_key_env)
        if not api_key:
            raise BackendError(
                f"No API key found in ${self.profile.api_key_env}", BackendErrorKind.AUTH
            )

        with self._semaphore:
            logger.debug(f"POST {self.endpoint} ({request.model_id})")
            try:
                response = self.session().post(
                    self.endpoint,
                    json=self.payload(request),
                    headers={"Authorization": f"Bearer {api_key}"},
                    timeout=self.profile.timeout,
                )
            except requests.exceptions.RequestException as e:
                raise BackendError(f"Request failed: {e}", BackendErrorKind.TRANSPORT)

        status = response.status_code
        if status in (401, 403):
            raise BackendError("Credential rejected", BackendErrorKind.AUTH, status)
        if status == 429:
            raise BackendError("Rate limit still exceeded after retries", BackendErrorKind.RATE_LIMITED, status)
        if status >= 500:
            raise BackendError("Server error after retries", BackendErrorKind.TRANSPORT, status)
        if status >= 400:
            raise BackendError(f"Request rejected: {response.text[:200]}", BackendErrorKind.BAD_RESPONSE, status)

        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise BackendError(f"Unexpected response body: {e}", BackendErrorKind.BAD_RESPONSE, status)
        if not isinstance(content, str):
            raise BackendError("Response message has no text content", BackendErrorKind.BAD_RESPONSE, status)
        return content


def backend_from_profile(
    profile: BackendProfile, cache: Optional[ResponseCache] = None
) -> HttpChatBackend:
    return HttpChatBackend(profile, cache)

