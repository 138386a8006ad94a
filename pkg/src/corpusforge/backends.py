"""Clients for the three external model services: translation, QE scoring,
and text generation.

The HTTP clients speak a minimal JSON protocol (POST /translate, /score,
/generate) with exponential-backoff retries on transport failures. The mock
implementations are pure functions of their inputs so pipelines can run
offline and deterministically.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence, TypeVar

import httpx

from .manifest import LanguageTag

SystemId = str


class BackendError(Exception):
    """Non-retryable backend failure (error status, bad payload)."""


class TransportError(BackendError):
    """Connection or timeout failure; retryable."""


class RetriesExhaustedError(TransportError):
    """All retry attempts failed with transport errors."""


class ProtocolError(BackendError):
    """Server response violates the wire contract."""


@dataclass(frozen=True)
class GenerationParams:
    max_new_tokens: int = 256
    temperature: float = 0.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class RetryPolicy:
    base_delay_s: float = 0.25
    factor: float = 2.0
    max_attempts: int = 5


class Translator(Protocol):
    system: SystemId

    def translate(
        self, source_text: str, source_lang: LanguageTag, target_lang: LanguageTag
    ) -> str: ...


class QeScorer(Protocol):
    def score(
        self,
        source_text: str,
        hypothesis: str,
        source_lang: LanguageTag,
        target_lang: LanguageTag,
    ) -> float: ...


class Generator(Protocol):
    def generate(self, prompt: str, params: GenerationParams) -> str: ...


def _check_translate_inputs(
    source_text: str, source_lang: LanguageTag, target_lang: LanguageTag
) -> None:
    if not source_text:
        raise ValueError("source_text must be non-empty")
    if source_lang is target_lang:
        raise ValueError("source_lang and target_lang must differ")


class _HttpBase:
    """Shared POST-with-retries machinery for the HTTP clients."""

    def __init__(
        self,
        base_url: str,
        *,
        token: str | None = None,
        retry: RetryPolicy | None = None,
        timeout_s: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.retry = retry or RetryPolicy()
        self._sleep = sleep
        headers = {}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            timeout=timeout_s, headers=headers, transport=transport
        )

    def _post(self, path: str, payload: dict) -> dict:
        url = self.base_url + path
        delay = self.retry.base_delay_s
        last_exc: Exception | None = None
        for attempt in range(self.retry.max_attempts):
            if attempt > 0:
                self._sleep(delay)
                delay *= self.retry.factor
            try:
                resp = self._client.post(url, json=payload)
            except httpx.TransportError as exc:
                last_exc = exc
                continue
            if resp.status_code < 200 or resp.status_code >= 300:
                raise BackendError(
                    f"{url} returned status {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned non-JSON body") from exc
        raise RetriesExhaustedError(
            f"{url} failed after {self.retry.max_attempts} attempts: {last_exc}"
        )

    def close(self) -> None:
        self._client.close()


class HttpTranslator(_HttpBase):
    def __init__(self, system: SystemId, base_url: str, **kwargs):
        super().__init__(base_url, **kwargs)
        self.system = system

    def translate(
        self, source_text: str, source_lang: LanguageTag, target_lang: LanguageTag
    ) -> str:
        _check_translate_inputs(source_text, source_lang, target_lang)
        body = self._post(
            "/translate",
            {
                "system": self.system,
                "source_text": source_text,
                "source_lang": source_lang.value,
                "target_lang": target_lang.value,
            },
        )
        output = body.get("output")
        if not isinstance(output, str):
            raise ProtocolError(f"system {self.system!r}: missing 'output' field")
        if not output:
            raise BackendError(f"system {self.system!r} returned an empty hypothesis")
        return output


class HttpQeScorer(_HttpBase):
    def score(
        self,
        source_text: str,
        hypothesis: str,
        source_lang: LanguageTag,
        target_lang: LanguageTag,
    ) -> float:
        if not source_text or not hypothesis:
            raise ValueError("source_text and hypothesis must be non-empty")
        body = self._post(
            "/score",
            {
                "source_text": source_text,
                "hypothesis": hypothesis,
                "source_lang": source_lang.value,
                "target_lang": target_lang.value,
            },
        )
        value = body.get("score")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProtocolError("missing or non-numeric 'score' field")
        if not (0.0 <= value <= 1.0):
            raise ProtocolError(f"score {value} outside [0, 1]")
        return float(value)


class HttpGenerator(_HttpBase):
    def generate(self, prompt: str, params: GenerationParams) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        payload = {
            "prompt": prompt,
            "max_new_tokens": params.max_new_tokens,
            "temperature": params.temperature,
        }
        if params.seed is not None:
            payload["seed"] = params.seed
        body = self._post("/generate", payload)
        output = body.get("output")
        if not isinstance(output, str):
            raise ProtocolError("missing 'output' field")
        return output


class EchoTranslator:
    """Identity-with-prefix mock: ('hello', en, de) -> 'de:hello'."""

    def __init__(self, system: SystemId = "echo"):
        self.system = system

    def translate(
        self, source_text: str, source_lang: LanguageTag, target_lang: LanguageTag
    ) -> str:
        _check_translate_inputs(source_text, source_lang, target_lang)
        return f"{target_lang.value}:{source_text}"


class StampTranslator:
    """Echo mock that stamps the system name, so hypotheses differ per system."""

    def __init__(self, system: SystemId):
        if not system:
            raise ValueError("system name must be non-empty")
        self.system = system

    def translate(
        self, source_text: str, source_lang: LanguageTag, target_lang: LanguageTag
    ) -> str:
        _check_translate_inputs(source_text, source_lang, target_lang)
        return f"{self.system}:{target_lang.value}:{source_text}"


class TableScorer:
    """QE mock backed by a lookup table with a default for unmapped inputs."""

    def __init__(
        self,
        table: dict[tuple[str, str, str, str], float] | None = None,
        default: float = 0.0,
    ):
        self.table = dict(table or {})
        self.default = default

    def score(
        self,
        source_text: str,
        hypothesis: str,
        source_lang: LanguageTag,
        target_lang: LanguageTag,
    ) -> float:
        key = (source_text, hypothesis, source_lang.value, target_lang.value)
        return self.table.get(key, self.default)


def _hash_unit(seed: int, *parts: str) -> float:
    digest = hashlib.sha256(
        ("|".join([str(seed), *parts])).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class HashScorer:
    """Seeded hash-to-[0,1) QE mock for property tests; pure per input."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def score(
        self,
        source_text: str,
        hypothesis: str,
        source_lang: LanguageTag,
        target_lang: LanguageTag,
    ) -> float:
        return _hash_unit(
            self.seed, source_text, hypothesis, source_lang.value, target_lang.value
        )


class ScriptedGenerator:
    """Generator mock replaying a fixed sequence of outputs."""

    def __init__(self, outputs: Sequence[str]):
        self.outputs = list(outputs)
        self.calls = 0

    def generate(self, prompt: str, params: GenerationParams) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        if self.calls >= len(self.outputs):
            raise BackendError("scripted generator ran out of outputs")
        out = self.outputs[self.calls]
        self.calls += 1
        return out


class HashGenerator:
    """Deterministic generator mock: two synthetic questions per prompt."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, prompt: str, params: GenerationParams) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        tag = hashlib.sha256(f"{self.seed}|{prompt}".encode("utf-8")).hexdigest()[:8]
        return f"What does the passage imply about {tag}-a?\nWhy is {tag}-b never mentioned?"


T = TypeVar("T")
R = TypeVar("R")


def map_ordered(
    fn: Callable[[T], R], items: Iterable[T], jobs: int = 1
) -> list[R]:
    """Apply fn to items with bounded parallelism, preserving input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
