"""Model backend interface and the JSON-over-HTTP client.

A backend exposes three capabilities: sentence/token embeddings, text
generation, and question-passage relevance scoring. The in-process mock
(:mod:`nfqa.mockbackend`) and the HTTP client below implement the same
surface, so the whole pipeline runs identically against either.

Wire protocol (all bodies UTF-8 JSON):

* ``POST /v1/embed``    {model_id, texts[], pooling} ->
  {dim, vectors[][]} for sentence pooling, or
  {dim, token_vectors[][][], tokens[][]} for token pooling
* ``POST /v1/generate`` {model_id, prompt, temperature, max_new_tokens, seed} -> {text}
* ``POST /v1/score``    {model_id, pairs[]} -> {logits[]}
* ``GET  /v1/health``   -> model registry

Transient failures are retried 3 times with exponential backoff starting
at 1 second, then surface as :class:`BackendUnavailable`.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class BackendError(Exception):
    """Base class for backend failures."""


class BackendUnavailable(BackendError):
    def __init__(self, url: str, attempts: int, cause: str):
        self.url = url
        self.attempts = attempts
        super().__init__(f"backend at {url} unavailable after {attempts} attempts: {cause}")


class MalformedBackendReply(BackendError):
    def __init__(self, detail: str):
        super().__init__(f"malformed backend reply: {detail}")


class PromptTooLong(BackendError):
    """The backend refused the prompt because it exceeds the model's limit."""

    def __init__(self, model_id: str, limit: int | None = None):
        self.model_id = model_id
        self.limit = limit
        super().__init__(f"prompt exceeds token limit of model {model_id!r}"
                         + (f" ({limit} tokens)" if limit else ""))


@dataclass(frozen=True)
class BackendEndpoint:
    """Address plus the model identifiers used over the wire protocol."""

    url: str
    generate_model: str = "echo"
    score_model: str = "aps"
    sentence_models: tuple[str, ...] = ("use", "labse", "laser")
    token_model: str = "mbert"
    api_key: str | None = None


class Backend:
    """Interface every backend implements; see module docstring."""

    def embed_sentences(self, model_id: str, texts: Sequence[str]) -> np.ndarray:
        """Unit-normalized sentence vectors, one row per input text."""
        raise NotImplementedError

    def embed_tokens(self, model_id: str, texts: Sequence[str]) -> list[tuple[list[str], np.ndarray]]:
        """Per-text (tokens, unit-normalized token vector matrix) pairs."""
        raise NotImplementedError

    def generate(self, model_id: str, prompt: str, temperature: float,
                 max_new_tokens: int, seed: int) -> str:
        raise NotImplementedError

    def score(self, model_id: str, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """One relevance logit in [0, 1] per (question, passage) pair."""
        raise NotImplementedError


RETRY_ATTEMPTS = 3
RETRY_BASE_SECONDS = 1.0


class HttpBackend(Backend):
    """Client for a backend service speaking the wire protocol above.

    ``sleep`` is injectable so tests can exercise the retry path without
    waiting out the backoff.
    """

    def __init__(self, endpoint: BackendEndpoint, timeout: float = 60.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.timeout = timeout
        self._sleep = sleep

    def _request(self, path: str, payload: dict | None) -> dict:
        url = self.endpoint.url.rstrip("/") + path
        headers = {"Content-Type": "application/json"}
        if self.endpoint.api_key:
            headers["Authorization"] = f"Bearer {self.endpoint.api_key}"
        data = json.dumps(payload, ensure_ascii=False).encode("utf-8") if payload is not None else None
        last_error = "unknown"
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                self._sleep(RETRY_BASE_SECONDS * 2 ** (attempt - 1))
            req = urllib.request.Request(url, data=data, headers=headers,
                                         method="POST" if data is not None else "GET")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    body = resp.read().decode("utf-8")
            except urllib.error.HTTPError as exc:
                body = exc.read().decode("utf-8", errors="replace")
                if 400 <= exc.code < 500:
                    self._raise_client_error(body)
                last_error = f"HTTP {exc.code}"
                continue
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                last_error = str(exc)
                continue
            try:
                return json.loads(body)
            except json.JSONDecodeError:
                raise MalformedBackendReply(f"response is not JSON: {body[:200]!r}") from None
        raise BackendUnavailable(url, RETRY_ATTEMPTS, last_error)

    def _raise_client_error(self, body: str):
        try:
            obj = json.loads(body)
        except json.JSONDecodeError:
            raise MalformedBackendReply(f"unreadable error body: {body[:200]!r}") from None
        code = obj.get("error", "")
        if code == "prompt_too_long":
            raise PromptTooLong(obj.get("model_id", "?"), obj.get("limit"))
        raise MalformedBackendReply(f"backend rejected request: {obj}")

    def health(self) -> dict:
        return self._request("/v1/health", None)

    def embed_sentences(self, model_id, texts):
        reply = self._request("/v1/embed", {
            "model_id": model_id, "texts": list(texts), "pooling": "sentence",
        })
        try:
            vectors = np.asarray(reply["vectors"], dtype=np.float64)
        except (KeyError, ValueError) as exc:
            raise MalformedBackendReply(f"bad embed reply: {exc}") from None
        if vectors.shape[0] != len(texts):
            raise MalformedBackendReply(
                f"expected {len(texts)} vectors, got {vectors.shape[0]}")
        return vectors

    def embed_tokens(self, model_id, texts):
        reply = self._request("/v1/embed", {
            "model_id": model_id, "texts": list(texts), "pooling": "token",
        })
        try:
            tokens = reply["tokens"]
            matrices = [np.asarray(m, dtype=np.float64) for m in reply["token_vectors"]]
        except (KeyError, ValueError) as exc:
            raise MalformedBackendReply(f"bad token embed reply: {exc}") from None
        if len(tokens) != len(texts) or len(matrices) != len(texts):
            raise MalformedBackendReply("token embed reply length mismatch")
        return list(zip(tokens, matrices))

    def generate(self, model_id, prompt, temperature, max_new_tokens, seed):
        reply = self._request("/v1/generate", {
            "model_id": model_id, "prompt": prompt, "temperature": temperature,
            "max_new_tokens": max_new_tokens, "seed": seed,
        })
        text = reply.get("text")
        if not isinstance(text, str):
            raise MalformedBackendReply("generate reply has no text field")
        return text

    def score(self, model_id, pairs):
        reply = self._request("/v1/score", {
            "model_id": model_id, "pairs": [[q, p] for q, p in pairs],
        })
        logits = reply.get("logits")
        if not isinstance(logits, list) or len(logits) != len(pairs):
            raise MalformedBackendReply("score reply has wrong logits shape")
        return [float(x) for x in logits]
