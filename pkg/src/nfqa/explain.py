"""Perturbation-based rationales for any question-passage scorer.

Two attribution methods over word tokens of the passage:

* a linear surrogate fitted to scores of randomly masked variants
  (weighted ridge regression, locality kernel on the masked fraction);
* sampled-permutation Shapley values, with exact enumeration replacing
  sampling for passages of at most six tokens.

Masked tokens are removed from the text (scorer backends have no
reserved mask symbol), and masked variants are rendered as the kept
tokens joined by single spaces. The random stream is pre-split per
sample index, so results do not depend on evaluation order and samples
may be scored concurrently.

The coverage analysis buckets rationales by scorer logit decile and
reports, per relevance threshold, the mean share of tokens whose
normalized relevance exceeds it.
"""

from __future__ import annotations

import itertools
import json
import math
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import textproc

PairScorer = Callable[[str, str], float]

DEFAULT_N_SAMPLES = 2000
DEFAULT_MASK_PROB = 0.3
DEFAULT_KERNEL_WIDTH = 0.25
DEFAULT_RIDGE_LAMBDA = 1e-3
DEFAULT_N_PERMUTATIONS = 200
EXACT_SHAPLEY_MAX_TOKENS = 6
DEFAULT_THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
RUNTIME_WARN_SECONDS = 15.0

N_BUCKETS = 10


class ExplainError(ValueError):
    """Base class for rationale errors."""


class ScorerFailure(ExplainError):
    def __init__(self, cause: BaseException):
        self.cause = cause
        super().__init__(f"scorer failed on a perturbed input: {cause!r}")


class DegenerateSamples(ExplainError):
    def __init__(self):
        super().__init__("all sampled masks are identical; cannot fit a surrogate")


class EmptyInput(ExplainError):
    def __init__(self, what: str):
        super().__init__(f"no {what} given")


class TooFewBuckets(ExplainError):
    def __init__(self, occupied: int):
        super().__init__(f"trend check needs >= 2 occupied buckets, have {occupied}")


@dataclass(frozen=True)
class Rationale:
    tokens: tuple[str, ...]
    relevances: tuple[float, ...]
    logit: float
    method: str
    seed: int

    def __post_init__(self):
        if len(self.tokens) != len(self.relevances):
            raise ValueError("tokens and relevances must have equal length")


@dataclass(frozen=True)
class CoverageMatrix:
    """Mean token coverage per (logit decile, relevance threshold) cell.

    ``cells[bucket][t]`` is a percentage in [0, 100], or ``None`` for
    buckets no rationale fell into. The last bucket is closed: a logit
    of exactly 1.0 lands in [90, 100].
    """

    bucket_lows: tuple[int, ...]
    thresholds: tuple[float, ...]
    cells: tuple[tuple[float | None, ...], ...]
    counts: tuple[int, ...]


def _safe_score(scorer: PairScorer, question: str, text: str) -> float:
    try:
        return float(scorer(question, text))
    except Exception as exc:
        raise ScorerFailure(exc) from exc


def _warn_if_slow(started: float, method: str, n_tokens: int) -> None:
    elapsed = time.perf_counter() - started
    if elapsed > RUNTIME_WARN_SECONDS:
        warnings.warn(
            f"{method} rationale over {n_tokens} tokens took {elapsed:.1f} s "
            f"(budget {RUNTIME_WARN_SECONDS:.0f} s)",
            RuntimeWarning,
            stacklevel=3,
        )


def _masked_text(token_texts: Sequence[str], mask: np.ndarray) -> str:
    return " ".join(t for t, keep in zip(token_texts, mask) if keep)


def _sample_masks(n_samples: int, n_tokens: int, mask_prob: float, seed: int) -> np.ndarray:
    masks = np.empty((n_samples, n_tokens), dtype=bool)
    for i in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        masks[i] = rng.random(n_tokens) >= mask_prob
    return masks


def surrogate_rationale(
    question: str,
    passage: str,
    scorer: PairScorer,
    n_samples: int = DEFAULT_N_SAMPLES,
    mask_prob: float = DEFAULT_MASK_PROB,
    kernel_width: float = DEFAULT_KERNEL_WIDTH,
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
    seed: int = 0,
) -> Rationale:
    """Fit a local linear surrogate and use its coefficients as relevances.

    Each sample keeps every token independently with probability
    ``1 - mask_prob``; sample weight is ``exp(-(d / kernel_width)**2)``
    with ``d`` the masked fraction, so near-intact variants dominate the
    fit. The intercept is not penalized.
    """
    started = time.perf_counter()
    tokens = textproc.tokenize(passage)
    if not tokens:
        raise EmptyInput("passage tokens")
    token_texts = [t.text for t in tokens]
    n_tokens = len(tokens)

    masks = _sample_masks(n_samples, n_tokens, mask_prob, seed)
    if bool(np.all(masks == masks[0])):
        raise DegenerateSamples()

    scores = np.array([
        _safe_score(scorer, question, _masked_text(token_texts, mask)) for mask in masks
    ])
    masked_fraction = 1.0 - masks.mean(axis=1)
    weights = np.exp(-((masked_fraction / kernel_width) ** 2))

    design = np.column_stack([np.ones(len(masks)), masks.astype(np.float64)])
    weighted = design * weights[:, None]
    gram = design.T @ weighted
    penalty = np.eye(n_tokens + 1) * ridge_lambda
    penalty[0, 0] = 0.0
    coef = np.linalg.solve(gram + penalty, weighted.T @ scores)

    logit = _safe_score(scorer, question, passage)
    _warn_if_slow(started, "surrogate", n_tokens)
    return Rationale(
        tokens=tuple(token_texts),
        relevances=tuple(float(c) for c in coef[1:]),
        logit=logit,
        method="surrogate",
        seed=seed,
    )


def _subset_value_fn(question: str, token_texts: Sequence[str], scorer: PairScorer):
    cache: dict[int, float] = {}

    def value(bitmask: int) -> float:
        hit = cache.get(bitmask)
        if hit is not None:
            return hit
        kept = [t for i, t in enumerate(token_texts) if bitmask >> i & 1]
        v = _safe_score(scorer, question, " ".join(kept))
        cache[bitmask] = v
        return v

    return value


def shapley_rationale(
    question: str,
    passage: str,
    scorer: PairScorer,
    n_permutations: int = DEFAULT_N_PERMUTATIONS,
    seed: int = 0,
) -> Rationale:
    """Shapley values of tokens: mean marginal contribution over orderings.

    Exact over all permutations for short passages (at most
    ``EXACT_SHAPLEY_MAX_TOKENS`` tokens), sampled otherwise. Subset
    scores are memoized, so exact mode costs at most 2^n scorer calls.
    """
    started = time.perf_counter()
    tokens = textproc.tokenize(passage)
    if not tokens:
        raise EmptyInput("passage tokens")
    token_texts = [t.text for t in tokens]
    n = len(tokens)
    value = _subset_value_fn(question, token_texts, scorer)

    if n <= EXACT_SHAPLEY_MAX_TOKENS:
        permutations = itertools.permutations(range(n))
        total = math.factorial(n)
    else:
        def sampled():
            for i in range(n_permutations):
                rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
                yield tuple(rng.permutation(n))

        permutations = sampled()
        total = n_permutations

    contribution = np.zeros(n)
    for perm in permutations:
        bitmask = 0
        previous = value(0)
        for idx in perm:
            bitmask |= 1 << idx
            current = value(bitmask)
            contribution[idx] += current - previous
            previous = current
    contribution /= total

    logit = _safe_score(scorer, question, passage)
    _warn_if_slow(started, "shapley", n)
    return Rationale(
        tokens=tuple(token_texts),
        relevances=tuple(float(c) for c in contribution),
        logit=logit,
        method="shapley",
        seed=seed,
    )


def load_rationales_jsonl(path: str | Path) -> list[Rationale]:
    """Read rationales in the run-output schema back into objects."""
    rationales = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            rationales.append(Rationale(
                tokens=tuple(row["tokens"]),
                relevances=tuple(float(x) for x in row["relevances"]),
                logit=float(row["logit"]),
                method=row.get("method", "surrogate"),
                seed=int(row.get("seed", 0)),
            ))
    return rationales


def normalize_relevances(relevances: Sequence[float]) -> list[float]:
    """Max-abs scaling into [0, 1]; all-zero relevances stay zero."""
    peak = max((abs(r) for r in relevances), default=0.0)
    if peak == 0.0:
        return [0.0] * len(relevances)
    return [abs(r) / peak for r in relevances]


def coverage_matrix(
    rationales: Sequence[Rationale],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> CoverageMatrix:
    """Bucket rationales by logit decile and average token coverage.

    A rationale's coverage at threshold t is the percentage of its tokens
    whose normalized relevance strictly exceeds t.
    """
    if not rationales:
        raise EmptyInput("rationales")
    thresholds = tuple(thresholds)
    per_bucket: list[list[list[float]]] = [[] for _ in range(N_BUCKETS)]
    for rationale in rationales:
        normed = normalize_relevances(rationale.relevances)
        bucket = min(int(rationale.logit * 100.0) // 10, N_BUCKETS - 1)
        coverage = [
            100.0 * sum(1 for r in normed if r > t) / len(normed) for t in thresholds
        ]
        per_bucket[bucket].append(coverage)

    cells = []
    counts = []
    for bucket_rows in per_bucket:
        counts.append(len(bucket_rows))
        if not bucket_rows:
            cells.append(tuple([None] * len(thresholds)))
            continue
        matrix = np.asarray(bucket_rows)
        cells.append(tuple(float(x) for x in matrix.mean(axis=0)))
    return CoverageMatrix(
        bucket_lows=tuple(range(0, 100, 10)),
        thresholds=thresholds,
        cells=tuple(cells),
        counts=tuple(counts),
    )


def coverage_trend_check(matrix: CoverageMatrix, tolerance: float = 1e-12) -> dict[float, bool]:
    """Whether mean coverage is non-decreasing across occupied buckets,
    per threshold."""
    occupied = [i for i, c in enumerate(matrix.counts) if c > 0]
    if len(occupied) < 2:
        raise TooFewBuckets(len(occupied))
    result = {}
    for t_idx, threshold in enumerate(matrix.thresholds):
        values = [matrix.cells[b][t_idx] for b in occupied]
        result[threshold] = all(
            later >= earlier - tolerance for earlier, later in zip(values, values[1:])
        )
    return result
