"""Answer quality metrics: token-level ROUGE and semantic similarity.

Token-level: ROUGE-1/2/3 n-gram overlap and ROUGE-LCS, each as
precision/recall/F1 over lowercased word tokens (no stemming, no
stopword removal by default). Semantic-level: a BERTScore-style greedy
token matching over contextual token embeddings plus cosine similarity
of three multilingual sentence embeddings, combined into one scalar as
their mean (arithmetic by default, harmonic optional).

All metric computations here are pure; only the semantic scores touch a
backend for embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

import numpy as np

from . import textproc
from .backends import Backend
from .corpus import QARecord
from .scorer import DimensionMismatch, cosine


SENTENCE_EMBED_MODELS = ("use", "labse", "laser")
TOKEN_EMBED_MODEL = "mbert"
TOKEN_METRICS = ("r1", "r2", "r3", "rl")
SEMANTIC_METRIC = "sts_mute"
REPORT_METRICS = TOKEN_METRICS + ("bertscore", "cos_use", "cos_labse", "cos_laser", "sts_mute")


class MetricError(ValueError):
    """Base class for metric computation errors."""


class EmptyTokenSet(MetricError):
    def __init__(self, side: str):
        super().__init__(f"bertscore needs at least one {side} token vector")


class EmptyHypothesis(MetricError):
    def __init__(self):
        super().__init__("hypothesis text has no tokens")


class EmptyReference(MetricError):
    def __init__(self):
        super().__init__("reference text has no tokens")


class HarmonicUndefined(MetricError):
    def __init__(self, component: str, value: float):
        super().__init__(
            f"harmonic mean undefined: component {component} = {value} is not positive")


class EmptyRows(MetricError):
    def __init__(self):
        super().__init__("no rows to aggregate")


class DivisionByZeroMetric(MetricError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"baseline value of metric {name!r} is zero")


class NoCommonIds(MetricError):
    def __init__(self):
        super().__init__("the two row sets share no record ids")


class TooFewRows(MetricError):
    def __init__(self, have: int, need: int):
        super().__init__(f"need at least {need} rows, have {have}")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class RougeScores:
    r1: PRF
    r2: PRF
    r3: PRF
    rl: PRF


@dataclass(frozen=True)
class SemanticScores:
    bertscore_f1: float
    cos_use: float
    cos_labse: float
    cos_laser: float
    sts_mute: float


@dataclass(frozen=True)
class EvalRow:
    record_id: str
    strategy: str
    category: str
    rouge: RougeScores
    semantic: SemanticScores
    answer_text: str

    def metric(self, name: str) -> float:
        if name in TOKEN_METRICS:
            return getattr(self.rouge, name).f1
        if name == "bertscore":
            return self.semantic.bertscore_f1
        return getattr(self.semantic, name)

    def mean_rouge_f1(self) -> float:
        return sum(getattr(self.rouge, m).f1 for m in TOKEN_METRICS) / len(TOKEN_METRICS)


@dataclass(frozen=True)
class Report:
    """Per-strategy arithmetic means of every reported metric."""

    strategies: dict[str, dict[str, float]]
    counts: dict[str, int]


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(ref_tokens: Sequence[str], hyp_tokens: Sequence[str], n: int) -> PRF:
    """Clipped n-gram overlap: min multiplicity per shared n-gram."""
    ref_grams = textproc.ngrams(ref_tokens, n)
    hyp_grams = textproc.ngrams(hyp_tokens, n)
    overlap = sum((ref_grams & hyp_grams).values())
    total_hyp = sum(hyp_grams.values())
    total_ref = sum(ref_grams.values())
    precision = overlap / total_hyp if total_hyp else 0.0
    recall = overlap / total_ref if total_ref else 0.0
    return PRF(precision, recall, _f1(precision, recall))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            curr.append(prev[j - 1] + 1 if x == y else max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_lcs(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> PRF:
    length = _lcs_length(ref_tokens, hyp_tokens)
    precision = length / len(hyp_tokens) if hyp_tokens else 0.0
    recall = length / len(ref_tokens) if ref_tokens else 0.0
    return PRF(precision, recall, _f1(precision, recall))


def rouge_all(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> RougeScores:
    return RougeScores(
        r1=rouge_n(ref_tokens, hyp_tokens, 1),
        r2=rouge_n(ref_tokens, hyp_tokens, 2),
        r3=rouge_n(ref_tokens, hyp_tokens, 3),
        rl=rouge_lcs(ref_tokens, hyp_tokens),
    )


def bertscore(ref_vectors, hyp_vectors) -> PRF:
    """Greedy max-cosine token matching, no idf weighting, no rescaling.

    Recall averages, over reference tokens, the best cosine to any
    hypothesis token; precision is the mirror image.
    """
    ref = np.asarray(ref_vectors, dtype=np.float64)
    hyp = np.asarray(hyp_vectors, dtype=np.float64)
    if ref.size == 0 or len(ref) == 0:
        raise EmptyTokenSet("reference")
    if hyp.size == 0 or len(hyp) == 0:
        raise EmptyTokenSet("hypothesis")
    if ref.shape[1] != hyp.shape[1]:
        raise DimensionMismatch(ref.shape[1], hyp.shape[1])
    ref_norm = ref / np.linalg.norm(ref, axis=1, keepdims=True)
    hyp_norm = hyp / np.linalg.norm(hyp, axis=1, keepdims=True)
    sim = ref_norm @ hyp_norm.T
    recall = float(sim.max(axis=1).mean())
    precision = float(sim.max(axis=0).mean())
    return PRF(precision, recall, _f1(precision, recall))


MEAN_MODES = ("arithmetic", "harmonic")


def combine_components(components: Sequence[float], mean_mode: str = "arithmetic",
                       names: Sequence[str] | None = None) -> float:
    """Mean of the semantic components; harmonic requires all positive."""
    if mean_mode not in MEAN_MODES:
        raise ValueError(f"unknown mean mode {mean_mode!r}")
    values = list(components)
    if mean_mode == "arithmetic":
        return sum(values) / len(values)
    for i, v in enumerate(values):
        if v <= 0.0:
            name = names[i] if names else f"#{i}"
            raise HarmonicUndefined(name, v)
    return len(values) / sum(1.0 / v for v in values)


def sts_mute(
    reference: str,
    hypothesis: str,
    backend: Backend,
    mean_mode: str = "arithmetic",
    sentence_models: Sequence[str] = SENTENCE_EMBED_MODELS,
    token_model: str = TOKEN_EMBED_MODEL,
) -> SemanticScores:
    """Semantic similarity of two texts across several multilingual embeddings.

    Three sentence-embedding cosines plus a token-level BERTScore F1,
    combined into one scalar by the selected mean.
    """
    if not textproc.tokenize_words(reference):
        raise EmptyReference()
    if not textproc.tokenize_words(hypothesis):
        raise EmptyHypothesis()
    cosines: dict[str, float] = {}
    for model in sentence_models:
        vectors = backend.embed_sentences(model, [reference, hypothesis])
        cosines[model] = cosine(vectors[0], vectors[1])
    (ref_tokens, ref_vecs), (hyp_tokens, hyp_vecs) = backend.embed_tokens(
        token_model, [reference, hypothesis])
    bert_f1 = bertscore(ref_vecs, hyp_vecs).f1
    names = ["bertscore"] + [f"cos_{m}" for m in sentence_models]
    combined = combine_components(
        [bert_f1] + [cosines[m] for m in sentence_models], mean_mode, names)
    return SemanticScores(
        bertscore_f1=bert_f1,
        cos_use=cosines.get("use", 0.0),
        cos_labse=cosines.get("labse", 0.0),
        cos_laser=cosines.get("laser", 0.0),
        sts_mute=combined,
    )


def evaluate_pair(
    record: QARecord,
    generated_answer: str,
    backend: Backend,
    strategy: str,
    mean_mode: str = "arithmetic",
    stopwords: frozenset | None = None,
) -> EvalRow:
    """Score one generated answer against the record's silver answer.

    ``stopwords`` filters the token-level metrics only; semantic scores
    always see the full texts.
    """
    ref_tokens = textproc.tokenize_words(record.silver_answer)
    if not ref_tokens:
        raise EmptyReference()
    hyp_tokens = textproc.tokenize_words(generated_answer)
    if not hyp_tokens:
        raise EmptyHypothesis()
    if stopwords:
        ref_tokens = textproc.remove_stopwords(ref_tokens, stopwords)
        hyp_tokens = textproc.remove_stopwords(hyp_tokens, stopwords)
    rouge = rouge_all(ref_tokens, hyp_tokens)
    semantic = sts_mute(record.silver_answer, generated_answer, backend, mean_mode)
    return EvalRow(
        record_id=record.id,
        strategy=strategy,
        category=record.category.value,
        rouge=rouge,
        semantic=semantic,
        answer_text=generated_answer,
    )


def _row_metrics(row: EvalRow) -> dict[str, float]:
    return {name: row.metric(name) for name in REPORT_METRICS}


def aggregate(rows: Sequence[EvalRow]) -> Report:
    """Arithmetic mean of every metric, grouped by strategy."""
    if not rows:
        raise EmptyRows()
    sums: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {}
    for row in rows:
        bucket = sums.setdefault(row.strategy, {name: 0.0 for name in REPORT_METRICS})
        for name, value in _row_metrics(row).items():
            bucket[name] += value
        counts[row.strategy] = counts.get(row.strategy, 0) + 1
    strategies = {
        strat: {name: total / counts[strat] for name, total in bucket.items()}
        for strat, bucket in sums.items()
    }
    return Report(strategies=strategies, counts=counts)


@dataclass(frozen=True)
class Improvement:
    per_metric_pct: dict[str, float]
    semantic_avg_pct: float
    token_avg_pct: float


def improvement(metrics_a: Mapping[str, float], metrics_b: Mapping[str, float]) -> Improvement:
    """Percentage change of A over B per metric: 100 * (A - B) / B.

    The semantic average covers the combined semantic score only; the
    token average covers the four ROUGE metrics.
    """
    if set(metrics_a) != set(metrics_b):
        raise ValueError("metric sets differ")
    per_metric = {}
    for name in metrics_a:
        if metrics_b[name] == 0.0:
            raise DivisionByZeroMetric(name)
        per_metric[name] = 100.0 * (metrics_a[name] - metrics_b[name]) / metrics_b[name]
    semantic_avg = per_metric[SEMANTIC_METRIC]
    token_avg = sum(per_metric[m] for m in TOKEN_METRICS) / len(TOKEN_METRICS)
    return Improvement(per_metric, semantic_avg, token_avg)


def common_superiority(rows_a: Sequence[EvalRow], rows_b: Sequence[EvalRow]) -> tuple[float, float]:
    """Share of common records where A strictly beats B.

    Returns (pct on the combined semantic score, pct on the mean of the
    four ROUGE F1 scores); ties count for neither side.
    """
    by_id_a = {r.record_id: r for r in rows_a}
    by_id_b = {r.record_id: r for r in rows_b}
    common = sorted(by_id_a.keys() & by_id_b.keys())
    if not common:
        raise NoCommonIds()
    sts_wins = sum(
        1 for rid in common
        if by_id_a[rid].semantic.sts_mute > by_id_b[rid].semantic.sts_mute
    )
    rouge_wins = sum(
        1 for rid in common
        if by_id_a[rid].mean_rouge_f1() > by_id_b[rid].mean_rouge_f1()
    )
    return 100.0 * sts_wins / len(common), 100.0 * rouge_wins / len(common)


@dataclass(frozen=True)
class CategoryShare:
    total_pct: float
    best_k_pct: float


def best_k_category_profile(rows: Sequence[EvalRow], k: int = 100) -> dict[str, CategoryShare]:
    """Category mix of all rows versus the k best-scoring rows.

    A row's overall score is the unweighted mean of its combined semantic
    score and its mean ROUGE F1. Rows sort by descending score with
    record id breaking ties.
    """
    if len(rows) < k:
        raise TooFewRows(len(rows), k)
    scored = sorted(
        rows,
        key=lambda r: (-(r.semantic.sts_mute + r.mean_rouge_f1()) / 2.0, r.record_id),
    )
    top = scored[:k]
    categories = sorted({r.category for r in rows})
    out = {}
    for cat in categories:
        total = sum(1 for r in rows if r.category == cat)
        best = sum(1 for r in top if r.category == cat)
        out[cat] = CategoryShare(100.0 * total / len(rows), 100.0 * best / k)
    return out


def format_percent(value: float, decimals: int = 1) -> str:
    """Half-up rounding to a fixed number of decimals, as in the reports."""
    q = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def _trim_number(value: float) -> str:
    text = format_percent(value)
    return text[:-2] if text.endswith(".0") else text


def format_category_cell(total_pct: float, best_pct: float,
                         second_best_pct: float | None = None) -> str:
    """Render one category-profile cell as ``total vs best`` with an
    optional second run's best-k share in parentheses, e.g. ``30 vs 28 (32)``."""
    cell = f"{_trim_number(total_pct)} vs {_trim_number(best_pct)}"
    if second_best_pct is not None:
        cell += f" ({_trim_number(second_best_pct)})"
    return cell
