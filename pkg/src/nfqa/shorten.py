"""Context-handling strategies behind one interface.

Five ways to turn a record's long context into the text fed to the
generator:

* ``B``  keeps every paragraph unchanged (the long-context baseline).
* ``A1`` scores each paragraph against the question and keeps the top k.
* ``A2`` replaces each paragraph by the verbalization of its OIE triples,
  then selects as in A1; paragraphs without triples contribute nothing.
* ``A3`` rewrites pronouns and other mentions to their coreference
  representatives, then selects as in A1.
* ``A4`` groups triples that share a coreference cluster, verbalizes each
  group into one candidate unit, then selects as in A1.

Selected units are re-sorted into document order before assembly so the
generator sees them in discourse order. Strategies are pure given a
scorer handle, so records can be shortened in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from . import textproc
from .corpus import QARecord, TripleRecord
from .scorer import ScoredUnit, select_top_k

STRATEGY_KINDS = ("B", "A1", "A2", "A3", "A4")
ANNOTATION_STRATEGIES = ("A2", "A3", "A4")

ORIGIN_PARAGRAPH = "paragraph"
ORIGIN_VERBALIZED = "verbalized_triples"
ORIGIN_REWRITTEN = "rewritten_paragraph"
ORIGIN_TRIPLE_GROUP = "triple_group"

UNIT_SEPARATOR = "\n\n"

PassageScorer = Callable[[str, Sequence[str]], Sequence[float]]


class ShortenError(ValueError):
    """Base class for strategy errors."""


class MissingAnnotations(ShortenError):
    def __init__(self, strategy: str, record_id: str, what: str):
        self.strategy = strategy
        self.record_id = record_id
        super().__init__(f"strategy {strategy} needs {what} for record {record_id!r}")


@dataclass(frozen=True)
class Strategy:
    kind: str
    scorer_kind: str = "cross_encoder"
    k: int = 1

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class ContextUnit:
    text: str
    origin: str
    unit_index: int
    score: float


@dataclass(frozen=True)
class ShortContext:
    units: tuple[ContextUnit, ...]
    strategy: Strategy
    token_count: int

    @property
    def text(self) -> str:
        return UNIT_SEPARATOR.join(u.text for u in self.units)


def _build(units: list[ContextUnit], strategy: Strategy) -> ShortContext:
    joined = UNIT_SEPARATOR.join(u.text for u in units)
    return ShortContext(
        units=tuple(units),
        strategy=strategy,
        token_count=textproc.count_tokens(joined),
    )


def _score_and_select(
    record: QARecord,
    candidates: list[tuple[int, str]],
    origin: str,
    scorer: PassageScorer,
    k: int,
    strategy: Strategy,
) -> ShortContext:
    texts = [text for _, text in candidates]
    scores = list(scorer(record.question, texts))
    scored = [
        ScoredUnit(unit_index=idx, text=text, score=float(score))
        for (idx, text), score in zip(candidates, scores)
    ]
    chosen = set(select_top_k(scored, k))
    units = [
        ContextUnit(text=u.text, origin=origin, unit_index=u.unit_index, score=u.score)
        for u in scored
        if u.unit_index in chosen
    ]
    units.sort(key=lambda u: u.unit_index)
    return _build(units, strategy)


def strategy_b(record: QARecord) -> ShortContext:
    """Identity: the full context in document order."""
    strategy = Strategy(kind="B")
    units = [
        ContextUnit(text=p, origin=ORIGIN_PARAGRAPH, unit_index=i, score=0.0)
        for i, p in enumerate(record.paragraphs)
    ]
    return _build(units, strategy)


def strategy_a1(record: QARecord, scorer: PassageScorer, k: int = 1,
                strategy: Strategy | None = None) -> ShortContext:
    strategy = strategy or Strategy(kind="A1", k=k)
    candidates = list(enumerate(record.paragraphs))
    return _score_and_select(record, candidates, ORIGIN_PARAGRAPH, scorer, k, strategy)


def strategy_a2(record: QARecord, scorer: PassageScorer, k: int = 1,
                strategy: Strategy | None = None) -> ShortContext:
    strategy = strategy or Strategy(kind="A2", k=k)
    if not record.triples:
        raise MissingAnnotations("A2", record.id, "OIE triples")
    by_paragraph: dict[int, list[TripleRecord]] = {}
    for triple in record.triples:
        by_paragraph.setdefault(triple.paragraph_index, []).append(triple)
    candidates = [
        (p_idx, " ".join(textproc.verbalize_triple(t) for t in by_paragraph[p_idx]))
        for p_idx in sorted(by_paragraph)
    ]
    return _score_and_select(record, candidates, ORIGIN_VERBALIZED, scorer, k, strategy)


def strategy_a3(record: QARecord, scorer: PassageScorer, k: int = 1,
                strategy: Strategy | None = None) -> ShortContext:
    strategy = strategy or Strategy(kind="A3", k=k)
    if record.clusters is None:
        raise MissingAnnotations("A3", record.id, "coreference clusters")
    rewritten = textproc.rewrite_with_coref(record.paragraphs, record.clusters)
    candidates = list(enumerate(rewritten))
    return _score_and_select(record, candidates, ORIGIN_REWRITTEN, scorer, k, strategy)


def strategy_a4(record: QARecord, scorer: PassageScorer, k: int = 1,
                strategy: Strategy | None = None) -> ShortContext:
    strategy = strategy or Strategy(kind="A4", k=k)
    if not record.triples:
        raise MissingAnnotations("A4", record.id, "OIE triples")
    if record.clusters is None:
        raise MissingAnnotations("A4", record.id, "coreference clusters")
    groups = textproc.group_triples_by_cluster(
        record.triples, record.clusters, record.paragraphs)
    candidates = [
        (
            g.group_id,
            " ".join(textproc.verbalize_triple(record.triples[i]) for i in g.triple_indices),
        )
        for g in groups
    ]
    return _score_and_select(record, candidates, ORIGIN_TRIPLE_GROUP, scorer, k, strategy)


def shorten(record: QARecord, strategy: Strategy,
            scorer: PassageScorer | None = None) -> ShortContext:
    """Apply one strategy to one record; the joined unit texts fill the
    context slot of the QA prompt."""
    if strategy.kind == "B":
        return strategy_b(record)
    if scorer is None:
        raise ValueError(f"strategy {strategy.kind} requires a scorer")
    dispatch = {
        "A1": strategy_a1,
        "A2": strategy_a2,
        "A3": strategy_a3,
        "A4": strategy_a4,
    }
    return dispatch[strategy.kind](record, scorer, strategy.k, strategy=strategy)
