"""Relevance scoring of (question, text unit) pairs.

Three scorer families share one calling convention: the built-in BM25,
embedding cosine via a backend, and the cross-encoder that scores how
likely a paragraph answers a question. Backend-backed scores are cached
on disk keyed by the full request, so reruns replay without network
traffic; cache files are written atomically (temp file then rename).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import textproc
from .backends import Backend, MalformedBackendReply


class ScorerError(ValueError):
    """Base class for scoring errors."""


class EmptyCorpus(ScorerError):
    def __init__(self):
        super().__init__("no documents to score")


class ZeroVector(ScorerError):
    def __init__(self):
        super().__init__("cosine undefined for a zero vector")


class DimensionMismatch(ScorerError):
    def __init__(self, a: int, b: int):
        super().__init__(f"vector dimensions differ: {a} vs {b}")


class EmptySelectionA(ScorerError):
    def __init__(self):
        super().__init__("overlap_fraction needs a non-empty first selection")


@dataclass(frozen=True)
class ScoredUnit:
    unit_index: int
    text: str
    score: float


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValueError(f"b must be in [0, 1], got {self.b}")


def bm25_scores(
    query_tokens: Sequence[str],
    docs_tokens: Sequence[Sequence[str]],
    params: Bm25Params = Bm25Params(),
) -> list[float]:
    """Okapi BM25 score of each document against the query.

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is non-negative
    because its argument is always >= 1; each unique query term then
    contributes idf * tf*(k1+1) / (tf + k1*(1 - b + b*|d|/avgdl)).
    """
    if not docs_tokens:
        raise EmptyCorpus()
    n_docs = len(docs_tokens)
    avgdl = sum(len(d) for d in docs_tokens) / n_docs
    doc_freq = Counter()
    term_freqs = [Counter(d) for d in docs_tokens]
    for tf in term_freqs:
        doc_freq.update(tf.keys())

    scores = [0.0] * n_docs
    unique_query = set(query_tokens)
    for term in unique_query:
        df = doc_freq.get(term, 0)
        if df == 0:
            continue
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        for i, tf in enumerate(term_freqs):
            freq = tf.get(term, 0)
            if freq == 0:
                continue
            dl = len(docs_tokens[i])
            denom = freq + params.k1 * (1.0 - params.b + params.b * dl / avgdl)
            scores[i] += idf * freq * (params.k1 + 1.0) / denom
    return scores


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(u.shape[-1], v.shape[-1])
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector()
    return float(np.dot(u, v) / (nu * nv))


class RequestCache:
    """Disk cache of backend replies under ``<root>/<kind>/<sha256>.json``.

    Concurrent readers need no lock; writers go through a temp file and
    an atomic rename, so a failed write never leaves a corrupt entry.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._memory: dict[tuple[str, str], dict] = {}

    def _path(self, kind: str, digest: str) -> Path:
        return self.root / kind / f"{digest}.json"

    @staticmethod
    def digest(request: dict) -> str:
        canon = json.dumps(request, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def get(self, kind: str, digest: str) -> dict | None:
        hit = self._memory.get((kind, digest))
        if hit is not None:
            return hit
        path = self._path(kind, digest)
        try:
            with path.open(encoding="utf-8") as fh:
                value = json.load(fh)
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        self._memory[(kind, digest)] = value
        return value

    def put(self, kind: str, digest: str, value: dict) -> None:
        path = self._path(kind, digest)
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(value, fh, ensure_ascii=False)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            self._memory[(kind, digest)] = value


def cross_encoder_score(
    question: str,
    passage: str,
    backend: Backend,
    model_id: str = "aps",
    cache: RequestCache | None = None,
) -> float:
    """Cross-encoder relevance logit for one pair, cached per request."""
    request = {"kind": "score", "model_id": model_id, "question": question, "passage": passage}
    digest = RequestCache.digest(request)
    if cache is not None:
        hit = cache.get("score", digest)
        if hit is not None:
            return float(hit["value"])
    logit = backend.score(model_id, [(question, passage)])[0]
    if not math.isfinite(logit) or not (0.0 <= logit <= 1.0):
        raise MalformedBackendReply(f"cross-encoder logit outside [0, 1]: {logit}")
    if cache is not None:
        cache.put("score", digest, {"value": logit})
    return float(logit)


def embed_score(
    question: str,
    passage: str,
    backend: Backend,
    model_id: str,
    cache: RequestCache | None = None,
) -> float:
    """Cosine similarity of the sentence embeddings of question and passage."""
    request = {"kind": "embed", "model_id": model_id, "question": question, "passage": passage}
    digest = RequestCache.digest(request)
    if cache is not None:
        hit = cache.get("embed", digest)
        if hit is not None:
            return float(hit["value"])
    vectors = backend.embed_sentences(model_id, [question, passage])
    value = cosine(vectors[0], vectors[1])
    if cache is not None:
        cache.put("embed", digest, {"value": value})
    return value


def select_top_k(units: Sequence[ScoredUnit], k: int) -> list[int]:
    """Indices of the k highest-scoring units, descending score.

    Ties break toward the lower unit index. Callers re-sort the result
    into document order before assembling a context.
    """
    if not units:
        raise EmptyCorpus()
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = sorted(units, key=lambda u: (-u.score, u.unit_index))
    return [u.unit_index for u in ranked[:k]]


def overlap_fraction(selection_a: set, selection_b: set) -> float:
    """|A intersect B| / |A|; report 1 - overlap as the "differed" share."""
    if not selection_a:
        raise EmptySelectionA()
    return len(set(selection_a) & set(selection_b)) / len(set(selection_a))


SCORER_KINDS = ("cross_encoder", "bm25", "embed")


def make_passage_scorer(
    kind: str,
    backend: Backend | None = None,
    model_id: str | None = None,
    cache: RequestCache | None = None,
    bm25_params: Bm25Params | None = None,
) -> Callable[[str, Sequence[str]], list[float]]:
    """Build a ``(question, texts) -> scores`` callable for one scorer kind.

    BM25 treats the given texts as its corpus, which matches selecting
    answer paragraphs from a single question's own context.
    """
    if kind not in SCORER_KINDS:
        raise ValueError(f"unknown scorer kind {kind!r}")
    if kind == "bm25":
        params = bm25_params or Bm25Params()

        def scorer(question: str, texts: Sequence[str]) -> list[float]:
            return bm25_scores(
                textproc.tokenize_words(question),
                [textproc.tokenize_words(t) for t in texts],
                params,
            )

        return scorer
    if backend is None:
        raise ValueError(f"scorer kind {kind!r} requires a backend")
    if kind == "cross_encoder":
        model = model_id or "aps"

        def scorer(question: str, texts: Sequence[str]) -> list[float]:
            return [cross_encoder_score(question, t, backend, model, cache) for t in texts]

        return scorer
    model = model_id or "use"

    def scorer(question: str, texts: Sequence[str]) -> list[float]:
        return [embed_score(question, t, backend, model, cache) for t in texts]

    return scorer


def make_pair_scorer(
    kind: str,
    backend: Backend | None = None,
    model_id: str | None = None,
    cache: RequestCache | None = None,
) -> Callable[[str, str], float]:
    """Single-pair variant of :func:`make_passage_scorer`, for rationales."""
    passage_scorer = make_passage_scorer(kind, backend, model_id, cache)

    def scorer(question: str, passage: str) -> float:
        return passage_scorer(question, [passage])[0]

    return scorer
