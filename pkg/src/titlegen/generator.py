"""Candidate-generation backends: the request/response contract, a seeded
offline mock, and an HTTP client for the inference sidecar.

Wire protocol (UTF-8 JSON):

    POST /generate
        {"input": str, "num_candidates": int, "max_new_tokens": int,
         "strategy": {"kind": "beam"|"sample", "beam_width"?, "temperature"?, "top_p"?},
         "seed"?: int}
        -> 200 {"candidates": [str, ...], "model_id": str}
    GET /health -> 200 {"status": "ok", "model_id": str}

    Errors: 400 malformed request, 503 model not loaded.
"""
from __future__ import annotations

import hashlib
import random
import threading
import time
import uuid
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import requests

from .metrics import normalize_tokens


class GeneratorError(Exception):
    """Base error for generation backends."""


class BackendUnavailableError(GeneratorError):
    pass


class MalformedResponseError(GeneratorError):
    pass


class GenerationTimeoutError(GeneratorError):
    pass


@dataclass(frozen=True)
class DecodingStrategy:
    kind: str
    beam_width: int | None = None
    temperature: float | None = None
    top_p: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("beam", "sample"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.beam_width is not None and self.beam_width < 1:
            raise ValueError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.top_p is not None and not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.temperature is not None and self.temperature <= 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {"kind": self.kind}
        if self.beam_width is not None:
            wire["beam_width"] = self.beam_width
        if self.temperature is not None:
            wire["temperature"] = self.temperature
        if self.top_p is not None:
            wire["top_p"] = self.top_p
        return wire


BEAM_DEFAULT = DecodingStrategy(kind="beam", beam_width=4)
SAMPLE_DEFAULT = DecodingStrategy(kind="sample", temperature=0.8, top_p=0.95)


@dataclass(frozen=True)
class GenerationRequest:
    input: str
    num_candidates: int
    max_new_tokens: int = 48
    strategy: DecodingStrategy = field(default=SAMPLE_DEFAULT)
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.num_candidates < 1:
            raise ValueError(f"num_candidates must be >= 1, got {self.num_candidates}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {
            "input": self.input,
            "num_candidates": self.num_candidates,
            "max_new_tokens": self.max_new_tokens,
            "strategy": self.strategy.to_wire(),
        }
        if self.seed is not None:
            wire["seed"] = self.seed
        return wire


@dataclass(frozen=True)
class GenerationResponse:
    candidates: tuple[str, ...]
    model_id: str


class TitleGenerator:
    """Backend contract: exactly ``num_candidates`` candidates, ranked first-best."""

    model_id: str = "unknown"

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        raise NotImplementedError


# Connective words blended into mock candidates so they read like titles.
_MOCK_CONNECTIVES = ("how", "to", "fix", "error", "in", "with", "when", "not", "working", "using")


class MockGenerator(TitleGenerator):
    """Deterministic offline backend: candidates are seeded recombinations of
    the input's most frequent tokens.

    Candidate 0 is a fixed template of the input alone (no seed influence).
    The ``inject_gold_at`` knob overwrites that index with the gold title
    looked up for the input, enabling oracle-in-candidates tests; the lookup
    is a test/harness side channel, not part of the backend contract.
    """

    def __init__(
        self,
        seed: int = 0,
        inject_gold_at: int | None = None,
        gold_lookup: Callable[[str], str | None] | Mapping[str, str] | None = None,
    ):
        self.seed = seed
        self.inject_gold_at = inject_gold_at
        if isinstance(gold_lookup, Mapping):
            self._gold_lookup: Callable[[str], str | None] | None = gold_lookup.get
        else:
            self._gold_lookup = gold_lookup
        self.model_id = f"mock:{seed}"

    @staticmethod
    def _salient_tokens(text: str, limit: int = 8) -> list[str]:
        tokens = normalize_tokens(text)
        counts = Counter(tokens)
        first_seen = {token: index for index, token in reversed(list(enumerate(tokens)))}
        ordered = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
        return ordered[:limit]

    def _template_candidate(self, salient: list[str]) -> str:
        if not salient:
            return "untitled question"
        return " ".join(salient[:6])

    def _rng_for(self, request: GenerationRequest) -> random.Random:
        material = f"{self.seed}|{request.seed}|{request.input}".encode("utf-8")
        return random.Random(int.from_bytes(hashlib.sha256(material).digest()[:8], "big"))

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        salient = self._salient_tokens(request.input)
        pool = salient if salient else ["untitled"]
        rng = self._rng_for(request)
        candidates = [self._template_candidate(salient)]
        seen = set(candidates)
        for index in range(1, request.num_candidates):
            candidate = ""
            for _ in range(25):
                length = rng.randint(3, 8)
                words = [
                    rng.choice(pool) if rng.random() < 0.7 else rng.choice(_MOCK_CONNECTIVES)
                    for _ in range(length)
                ]
                candidate = " ".join(words)
                if candidate not in seen:
                    break
            if candidate in seen:
                candidate = f"{candidate} variant {index}"
            seen.add(candidate)
            candidates.append(candidate)
        if self.inject_gold_at is not None and self.inject_gold_at < len(candidates):
            if self._gold_lookup is None:
                raise GeneratorError("inject_gold_at set but no gold lookup configured")
            gold = self._gold_lookup(request.input)
            if gold is None:
                raise GeneratorError(f"no gold title known for input {request.input[:60]!r}")
            candidates[self.inject_gold_at] = gold
        return GenerationResponse(candidates=tuple(candidates), model_id=self.model_id)


class HttpGenerator(TitleGenerator):
    """Client for the sidecar's /generate endpoint.

    Transient transport failures are retried up to ``retries`` times only when
    the request is marked idempotent; all attempts of one logical request
    carry the same ``X-Request-Id`` header.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 60.0,
        retries: int = 0,
        idempotent: bool = True,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.idempotent = idempotent
        self.backoff = backoff
        self._session = session or requests.Session()
        self._in_flight = threading.BoundedSemaphore(max_in_flight)
        self.model_id = f"http:{self.endpoint}"

    def _post(self, request: GenerationRequest) -> requests.Response:
        request_id = str(uuid.uuid4())
        attempts = 1 + (self.retries if self.idempotent else 0)
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                with self._in_flight:
                    return self._session.post(
                        f"{self.endpoint}/generate",
                        json=request.to_wire(),
                        headers={"X-Request-Id": request_id},
                        timeout=self.timeout,
                    )
            except requests.Timeout as exc:
                last_error = GenerationTimeoutError(f"{self.endpoint}: request timed out after {self.timeout}s")
                last_error.__cause__ = exc
            except requests.ConnectionError as exc:
                last_error = BackendUnavailableError(f"{self.endpoint}: connection failed")
                last_error.__cause__ = exc
            if attempt + 1 < attempts:
                time.sleep(self.backoff * (2**attempt))
        assert last_error is not None
        raise last_error

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        response = self._post(request)
        if response.status_code == 503:
            raise BackendUnavailableError(f"{self.endpoint}: model not loaded (503)")
        if response.status_code != 200:
            raise MalformedResponseError(f"{self.endpoint}: unexpected status {response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise MalformedResponseError(f"{self.endpoint}: response is not JSON") from exc
        candidates = payload.get("candidates")
        model_id = payload.get("model_id")
        if not isinstance(candidates, list) or not isinstance(model_id, str):
            raise MalformedResponseError(f"{self.endpoint}: response missing candidates/model_id")
        if len(candidates) != request.num_candidates:
            raise MalformedResponseError(
                f"{self.endpoint}: expected {request.num_candidates} candidates, got {len(candidates)}"
            )
        if any(not isinstance(c, str) or not c for c in candidates):
            raise MalformedResponseError(f"{self.endpoint}: candidates must be nonempty strings")
        self.model_id = model_id
        return GenerationResponse(candidates=tuple(candidates), model_id=model_id)

    def health(self) -> dict[str, Any]:
        try:
            response = self._session.get(f"{self.endpoint}/health", timeout=self.timeout)
        except requests.Timeout as exc:
            raise GenerationTimeoutError(f"{self.endpoint}: health check timed out") from exc
        except requests.ConnectionError as exc:
            raise BackendUnavailableError(f"{self.endpoint}: connection failed") from exc
        if response.status_code == 503:
            raise BackendUnavailableError(f"{self.endpoint}: model not loaded (503)")
        if response.status_code != 200:
            raise MalformedResponseError(f"{self.endpoint}: unexpected status {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise MalformedResponseError(f"{self.endpoint}: health response is not JSON") from exc
