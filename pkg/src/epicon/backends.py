"""Model access: completion and log-probability backends.

Four interchangeable sources of model text/probabilities live here:

* :class:`HttpBackend` speaks the OpenAI-compatible wire shapes — chat
  completions for text, echo-with-logprobs completions for scoring.
* :class:`ReplayBackend` serves recorded payloads; it turns the whole
  pipeline into a pure function of (dataset, fixtures, seeds).
* :class:`ScriptedRandomBackend` emits uniformly random rankings and
  synthetic arguments, deterministically in its seed; it drives the
  random baseline end to end.
* :class:`ToyCharBigramScorer` is a tiny self-contained character-bigram
  language model used as a deterministic log-probability source in tests.

:func:`cached` wraps any backend with an append-only read-through store
whose files double as replay fixtures.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .errors import (
    BackendUnavailable,
    BudgetExceeded,
    EmptyScore,
    InvariantViolation,
    ReplayMiss,
    StoreCorrupt,
    UnsupportedOperation,
)

API_KEY_ENV_VAR = "EPICON_API_KEY"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ChatRequest:
    """One completion request.

    ``temperature=None`` means "do not send the field": the provider's
    default sampling settings apply. ``pair_id`` and ``phase`` carry run
    bookkeeping into the cache key; they never reach the wire.
    """

    prompt: str
    max_tokens: int
    model_name: str
    temperature: float | None = None
    pair_id: str = ""
    phase: str = ""

    def __post_init__(self) -> None:
        if not self.prompt:
            raise InvariantViolation("empty prompt", "request prompt must be non-empty")
        if self.max_tokens < 1:
            raise InvariantViolation("bad max_tokens", f"max_tokens={self.max_tokens}")
        if self.temperature is not None and not (
            math.isfinite(self.temperature) and self.temperature >= 0
        ):
            raise InvariantViolation("bad temperature", f"temperature={self.temperature}")


@dataclass(frozen=True)
class TokenLogprob:
    """One continuation token with its conditional log-probability."""

    token_text: str
    logprob: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.logprob) or self.logprob > 0:
            raise InvariantViolation("bad logprob", f"logprob={self.logprob} must be finite, <= 0")


@dataclass(frozen=True)
class CacheRecord:
    """One stored response; ``payload`` is a string for completions and a
    list of ``[token, logprob]`` pairs for scoring."""

    key: str
    payload: object
    created_at: float = field(default_factory=time.time)


class CompletionBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class LogprobBackend(Protocol):
    def score_continuation(
        self, context: str, continuation: str, model_name: str
    ) -> list[TokenLogprob]: ...


def cache_key(model_name: str, pair_id: str, phase: str, prompt: str) -> str:
    """Stable key over (model, pair, phase, prompt digest)."""
    prompt_digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    raw = "\x1f".join((model_name, pair_id, phase, prompt_digest))
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


def _score_prompt(context: str, continuation: str) -> str:
    """The canonical joined text scored by every logprob backend: stripped
    context, one separating space, stripped continuation."""
    return context.strip() + " " + continuation.strip()


def _score_key(model_name: str, context: str, continuation: str) -> str:
    return cache_key(model_name, "", "score", context.strip() + "\x1f" + continuation.strip())


class JsonlStore:
    """Append-only line-delimited record store; safe for concurrent writers."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, object] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = record["key"]
                    payload = record["payload"]
                except (json.JSONDecodeError, TypeError, KeyError) as exc:
                    raise StoreCorrupt(str(self.path), line_number, str(exc)) from exc
                self._records[key] = payload

    def get(self, key: str) -> object | None:
        with self._lock:
            return self._records.get(key)

    def put(self, key: str, payload: object) -> None:
        record = CacheRecord(key=key, payload=payload)
        line = json.dumps(
            {"key": record.key, "payload": record.payload, "created_at": record.created_at},
            ensure_ascii=False,
        )
        with self._lock:
            if key in self._records:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
            self._records[key] = payload

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class ReplayBackend:
    """Serves recorded payloads only; any unknown request is a hard miss.

    ``source`` may be a single record file or a directory of ``*.jsonl``
    record files (a cache directory from an earlier run works as-is).
    """

    def __init__(self, source: str | Path) -> None:
        self._records: dict[str, object] = {}
        source = Path(source)
        if not source.exists():
            raise BackendUnavailable(f"replay source {source} does not exist")
        files = sorted(source.glob("*.jsonl")) if source.is_dir() else [source]
        for path in files:
            store = JsonlStore(path)
            self._records.update(store._records)

    def complete(self, request: ChatRequest) -> str:
        key = cache_key(request.model_name, request.pair_id, request.phase, request.prompt)
        payload = self._records.get(key)
        if payload is None:
            raise ReplayMiss(
                f"no recorded payload for model={request.model_name!r} "
                f"pair={request.pair_id!r} phase={request.phase!r}"
            )
        if not isinstance(payload, str):
            raise BackendUnavailable(f"recorded payload for key {key[:12]}... is not text")
        return payload

    def score_continuation(
        self, context: str, continuation: str, model_name: str
    ) -> list[TokenLogprob]:
        if not continuation.strip():
            raise EmptyScore("continuation is empty")
        key = _score_key(model_name, context, continuation)
        payload = self._records.get(key)
        if payload is None:
            raise ReplayMiss(f"no recorded logprobs for model={model_name!r}")
        if not isinstance(payload, list):
            raise BackendUnavailable(f"recorded payload for key {key[:12]}... is not a logprob list")
        return [TokenLogprob(token_text=str(t), logprob=float(lp)) for t, lp in payload]


class ScriptedRandomBackend:
    """A model stand-in that ranks uniformly at random.

    Ranking prompts get a uniformly random permutation on one line;
    generation prompts get two synthetic argument lines. Every response is
    a pure function of (seed, prompt), so runs replay exactly.
    """

    def __init__(self, seed: int) -> None:
        self.seed = seed

    def _rng(self, prompt: str) -> random.Random:
        digest = hashlib.sha256(f"{self.seed}\x1f{prompt}".encode("utf-8")).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    def complete(self, request: ChatRequest) -> str:
        prompt = request.prompt
        rng = self._rng(prompt)
        if "give a ranking" in prompt:
            k = sum(1 for line in prompt.splitlines() if line.strip()[:1].isdigit())
            if k < 2:
                raise BackendUnavailable("could not count presented arguments in ranking prompt")
            return " ".join(str(v) for v in rng.sample(range(1, k + 1), k))
        first = rng.getrandbits(32)
        second = rng.getrandbits(32)
        return (
            f"Synthetic argument {first:08x} with moderate influence.\n"
            f"Synthetic argument {second:08x} with adjusted influence two."
        )

    def score_continuation(
        self, context: str, continuation: str, model_name: str
    ) -> list[TokenLogprob]:
        raise UnsupportedOperation("scripted-random backend is chat-only; it has no token probabilities")


class HttpBackend:
    """Client for OpenAI-compatible servers.

    Text goes through ``/v1/chat/completions``; scoring echoes the prompt
    through ``/v1/completions`` with logprobs and keeps the tokens whose
    text offset falls inside the continuation, so the server's own
    tokenization is used as-is. Transient failures (connection errors,
    429/5xx) are retried with exponential backoff up to ``max_attempts``.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV_VAR)
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, url: str, payload: dict) -> dict:
        last_error = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._session.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"attempt {attempt}: {exc}"
            else:
                if response.status_code == 200:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise BackendUnavailable(f"non-JSON response from {url}: {exc}") from exc
                if response.status_code not in _RETRYABLE_STATUS:
                    raise BackendUnavailable(
                        f"HTTP {response.status_code} from {url}: {response.text[:200]}"
                    )
                last_error = f"attempt {attempt}: HTTP {response.status_code}"
            if attempt < self.max_attempts:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
        raise BackendUnavailable(f"{url} unavailable after {self.max_attempts} attempts; {last_error}")

    def complete(self, request: ChatRequest) -> str:
        payload: dict = {
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
        }
        if request.temperature is not None:
            payload["temperature"] = request.temperature
        data = self._post(f"{self.base_url}/v1/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed chat response: {exc!r}") from exc
        if not isinstance(content, str):
            raise BackendUnavailable("chat response content is not text")
        return content

    def score_continuation(
        self, context: str, continuation: str, model_name: str
    ) -> list[TokenLogprob]:
        if not continuation.strip():
            raise EmptyScore("continuation is empty")
        context = context.strip()
        prompt = _score_prompt(context, continuation)
        payload = {
            "model": model_name,
            "prompt": prompt,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
        }
        data = self._post(f"{self.base_url}/v1/completions", payload)
        try:
            logprobs = data["choices"][0]["logprobs"]
            tokens = logprobs["tokens"]
            values = logprobs["token_logprobs"]
            offsets = logprobs["text_offset"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"response carries no usable logprobs: {exc!r}") from exc
        boundary = len(context)
        out: list[TokenLogprob] = []
        for token, value, offset in zip(tokens, values, offsets):
            if offset < boundary:
                continue
            if value is None:
                raise BackendUnavailable(f"missing logprob for continuation token {token!r}")
            out.append(TokenLogprob(token_text=str(token), logprob=float(value)))
        if not out:
            raise BackendUnavailable("no tokens fell inside the continuation")
        return out


class CachedBackend:
    """Read-through cache over any backend; one inner call per distinct request."""

    def __init__(self, inner, store: JsonlStore) -> None:
        self.inner = inner
        self.store = store
        self._registry_lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    def _lock_for(self, key: str) -> threading.Lock:
        with self._registry_lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def complete(self, request: ChatRequest) -> str:
        key = cache_key(request.model_name, request.pair_id, request.phase, request.prompt)
        with self._lock_for(key):
            cached_payload = self.store.get(key)
            if isinstance(cached_payload, str):
                return cached_payload
            text = self.inner.complete(request)
            self.store.put(key, text)
            return text

    def score_continuation(
        self, context: str, continuation: str, model_name: str
    ) -> list[TokenLogprob]:
        key = _score_key(model_name, context, continuation)
        with self._lock_for(key):
            cached_payload = self.store.get(key)
            if isinstance(cached_payload, list):
                return [TokenLogprob(token_text=str(t), logprob=float(lp)) for t, lp in cached_payload]
            scored = self.inner.score_continuation(context, continuation, model_name)
            self.store.put(key, [[tl.token_text, tl.logprob] for tl in scored])
            return scored


def cached(inner, store: JsonlStore) -> CachedBackend:
    """Wrap a backend with a read-through record store."""
    return CachedBackend(inner, store)


class BudgetCappedBackend:
    """Caps the number of requests forwarded to the wrapped backend."""

    def __init__(self, inner, max_requests: int) -> None:
        self.inner = inner
        self.max_requests = max_requests
        self._spent = 0
        self._lock = threading.Lock()

    def _charge(self) -> None:
        with self._lock:
            if self._spent >= self.max_requests:
                raise BudgetExceeded(f"request budget of {self.max_requests} spent")
            self._spent += 1

    def complete(self, request: ChatRequest) -> str:
        self._charge()
        return self.inner.complete(request)

    def score_continuation(
        self, context: str, continuation: str, model_name: str
    ) -> list[TokenLogprob]:
        self._charge()
        return self.inner.score_continuation(context, continuation, model_name)


_MASK64 = (1 << 64) - 1


def _mix64(value: int) -> int:
    """splitmix64 finalizer: a fast, platform-independent integer hash."""
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


class ToyScorer:
    """A deterministic character-level scorer for tests and demos.

    Each continuation character is one token. Its log-probability is a
    pure integer-hash function of (digest of the full context, previous
    character, character), mapped into ``[-5, -0.05]``. Conditioning on the
    context digest — not just the preceding character — matters: it makes
    different contexts score the same continuation differently, so ranking
    by score is non-degenerate. The values are not a normalized
    distribution; every test that uses this scorer only needs determinism
    and context sensitivity.
    """

    model_name = "toy-scorer"

    @staticmethod
    def _salt(context: str) -> int:
        digest = hashlib.sha256(context.strip().encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")

    @staticmethod
    def char_logprob(salt: int, prev: str, char: str) -> float:
        mixed = _mix64(salt ^ _mix64((ord(prev) << 21) ^ ord(char)))
        return -0.05 - 4.95 * (mixed / 2**64)

    def score_continuation(
        self, context: str, continuation: str, model_name: str = ""
    ) -> list[TokenLogprob]:
        cont = continuation.strip()
        if not cont:
            raise EmptyScore("continuation is empty")
        salt = self._salt(context)
        full = _score_prompt(context, continuation)
        start = len(full) - len(cont)
        out: list[TokenLogprob] = []
        for index in range(start, len(full)):
            out.append(
                TokenLogprob(
                    token_text=full[index],
                    logprob=self.char_logprob(salt, full[index - 1], full[index]),
                )
            )
        return out

    def sequence_logprob(self, context: str, continuation: str) -> float:
        """Total log-probability of the continuation; its own oracle."""
        return sum(tl.logprob for tl in self.score_continuation(context, continuation))
