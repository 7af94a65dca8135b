"""Uniform text-generation interface with mock, replay-cache, and HTTP backends.

All backends are safe for concurrent generate() calls. The replay cache is
content-addressed on (model, prompt, params) with one file per key, written
via atomic rename so concurrent writers cannot corrupt each other.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import httpx

from .core import canonical_json
from .errors import BackendUnavailable, ConfigError, EmptyPrompt, RateLimited

logger = logging.getLogger(__name__)

FINISH_REASONS = ("stop", "length", "error")


@dataclass(frozen=True)
class GenParams:
    """Decoding parameters; part of the cache key, so fully value-typed."""

    model: str = "mock"
    temperature: float = 0.0
    max_tokens: int = 512
    n_samples: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: str = "stop"

    def __post_init__(self):
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")


class Backend(Protocol):
    def generate(self, prompt: str, params: GenParams) -> list[Completion]: ...


def cache_key(model: str, prompt: str, params: GenParams) -> str:
    """Collision-resistant digest over model, prompt, and all decode params."""
    payload = canonical_json({"model": model, "prompt": prompt, "params": asdict(params)})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _check_prompt(prompt: str) -> None:
    if not prompt:
        raise EmptyPrompt("prompt must be nonempty")


# ---------------------------------------------------------------------------
# scripted mock


@dataclass(frozen=True)
class MockRule:
    """Substring matcher: fires when every fragment occurs in the prompt."""

    contains: tuple[str, ...]
    response: tuple[str, ...]  # one entry, or alternatives sampled by seed

    @classmethod
    def of(cls, contains: str | Sequence[str], response: str | Sequence[str]) -> "MockRule":
        needles = (contains,) if isinstance(contains, str) else tuple(contains)
        replies = (response,) if isinstance(response, str) else tuple(response)
        if not needles or not all(needles):
            raise ConfigError("mock rule needs at least one nonempty substring")
        if not replies:
            raise ConfigError("mock rule needs a response")
        return cls(contains=needles, response=replies)


class MockBackend:
    """Deterministic scripted backend.

    Resolution order per completion: substring rules (declaration order,
    first match wins), then the ordered response queue, then the default
    response. A ``cycle`` queue rotates instead of draining. Rules with
    several alternative responses pick one with the seeded RNG, so the whole
    backend is deterministic given a seed and script.
    """

    def __init__(
        self,
        rules: Sequence[MockRule] = (),
        queue: Sequence[str] = (),
        default: str | None = None,
        *,
        cycle: bool = False,
        seed: int = 0,
    ):
        self._rules = list(rules)
        self._queue = deque(queue)
        self._default = default
        self._cycle = cycle
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.calls = 0  # completions served

    @classmethod
    def from_script(cls, script: Mapping[str, Any]) -> "MockBackend":
        rules = [
            MockRule.of(rule["contains"], rule["response"])
            for rule in script.get("rules", ())
        ]
        return cls(
            rules=rules,
            queue=tuple(script.get("queue", ())),
            default=script.get("default"),
            cycle=bool(script.get("cycle", False)),
            seed=int(script.get("seed", 0)),
        )

    def _next(self, prompt: str) -> str:
        for rule in self._rules:
            if all(needle in prompt for needle in rule.contains):
                if len(rule.response) == 1:
                    return rule.response[0]
                return self._rng.choice(rule.response)
        if self._queue:
            reply = self._queue.popleft()
            if self._cycle:
                self._queue.append(reply)
            return reply
        if self._default is not None:
            return self._default
        raise BackendUnavailable("mock script exhausted and no rule matched")

    def generate(self, prompt: str, params: GenParams) -> list[Completion]:
        _check_prompt(prompt)
        with self._lock:
            texts = [self._next(prompt) for _ in range(params.n_samples)]
            self.calls += params.n_samples
        return [Completion(text=t) for t in texts]


def load_mock_script(path: str | Path) -> MockBackend:
    try:
        script = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load mock script {path}: {exc}") from exc
    return MockBackend.from_script(script)


# ---------------------------------------------------------------------------
# replay cache


class ReplayBackend:
    """Content-addressed replay wrapper around any backend.

    A warm cache answers repeated calls with byte-identical completions and
    zero inner-backend invocations. Layout: <cache>/<first 2 hex>/<key>.json.
    """

    def __init__(self, inner: Backend, cache_dir: str | Path):
        self._inner = inner
        self._dir = Path(cache_dir)
        self._lock = threading.Lock()
        self.inner_calls = 0
        self.cache_hits = 0

    def _path(self, key: str) -> Path:
        return self._dir / key[:2] / f"{key}.json"

    def generate(self, prompt: str, params: GenParams) -> list[Completion]:
        _check_prompt(prompt)
        key = cache_key(params.model, prompt, params)
        path = self._path(key)
        if path.exists():
            stored = json.loads(path.read_text(encoding="utf-8"))
            with self._lock:
                self.cache_hits += 1
            return [Completion(**c) for c in stored["completions"]]

        completions = self._inner.generate(prompt, params)
        with self._lock:
            self.inner_calls += 1
        payload = {
            "key": key,
            "model": params.model,
            "prompt": prompt,
            "params": asdict(params),
            "completions": [asdict(c) for c in completions],
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        # Atomic per-key write: concurrent writers race benignly.
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, ensure_ascii=False)
            os.replace(tmp_name, path)
        except OSError:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        return completions


# ---------------------------------------------------------------------------
# HTTP backend (openai-compatible chat completions)


@dataclass(frozen=True)
class HttpBackendConfig:
    base_url: str
    provider: str = "openai-compatible"
    api_key_env: str = ""  # name of the env var holding the key; never the key itself
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    timeout: float = 60.0

    def __post_init__(self):
        if self.provider != "openai-compatible":
            raise ConfigError(f"unsupported provider {self.provider!r}")
        if not self.base_url:
            raise ConfigError("http backend requires a base_url")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


class HttpBackend:
    """Plain text chat-completion client with bounded, capped-backoff retries.

    Retries cover 429, 5xx, and transport errors, never more than
    ``max_retries`` times per request; a 429 that survives the budget raises
    RateLimited. The API key is read from the environment variable named in
    the config at request time.
    """

    def __init__(
        self,
        config: HttpBackendConfig,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self._config = config
        self._client = client or httpx.Client(
            base_url=config.base_url, timeout=config.timeout
        )
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._config.api_key_env:
            key = os.environ.get(self._config.api_key_env)
            if not key:
                raise BackendUnavailable(
                    f"environment variable {self._config.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _request(self, body: dict) -> dict:
        cfg = self._config
        last_error: Exception | None = None
        rate_limited = False
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                self._sleep(min(cfg.backoff_cap, cfg.backoff_base * 2 ** (attempt - 1)))
            try:
                response = self._client.post(
                    "/chat/completions", json=body, headers=self._headers()
                )
            except httpx.HTTPError as exc:
                last_error = exc
                rate_limited = False
                logger.warning("transport error (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code == 429:
                rate_limited = True
                last_error = None
                logger.warning("rate limited (attempt %d)", attempt + 1)
                continue
            if response.status_code >= 500:
                rate_limited = False
                last_error = None
                logger.warning(
                    "server error %d (attempt %d)", response.status_code, attempt + 1
                )
                continue
            if response.status_code >= 400:
                raise BackendUnavailable(
                    f"API error {response.status_code}: {response.text[:200]}"
                )
            return response.json()
        if rate_limited:
            raise RateLimited(f"still rate limited after {cfg.max_retries} retries")
        raise BackendUnavailable(f"request failed after retries: {last_error}")

    def generate(self, prompt: str, params: GenParams) -> list[Completion]:
        _check_prompt(prompt)
        completions: list[Completion] = []
        while len(completions) < params.n_samples:
            remaining = params.n_samples - len(completions)
            body = {
                "model": params.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
                "n": remaining,
            }
            data = self._request(body)
            choices = data.get("choices") or []
            if not choices:
                raise BackendUnavailable("response contained no choices")
            for choice in choices[:remaining]:
                text = (choice.get("message") or {}).get("content") or ""
                reason = choice.get("finish_reason")
                completions.append(
                    Completion(text=text, finish_reason=reason if reason == "length" else "stop")
                )
        return completions
