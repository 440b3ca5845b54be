"""Dataset loading, validation, annotation attachment, and corpus statistics.

Datasets are UTF-8 JSON-lines files, one record per line, with fields
``id``, ``language``, ``question``, ``category``, ``paragraphs`` (array of
strings), ``silver_answer``, and ``split``. Triple and coreference
annotations live in separate JSONL files keyed by ``record_id`` and are
attached after loading; they are precomputed inputs, never live model
calls, which keeps the engine deterministic.

Loaded records are immutable; loading distinct files from multiple
workers needs no coordination.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import textproc


class CorpusError(ValueError):
    """Base class for dataset and annotation validation errors."""


class MalformedLine(CorpusError):
    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"line {line}: {detail}")


class MissingField(CorpusError):
    def __init__(self, line: int, field: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: missing or empty field {field!r}")


class EmptyContext(CorpusError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"line {line}: record has no paragraphs")


class DuplicateId(CorpusError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"duplicate record id {record_id!r}")


class EmptyCorpus(CorpusError):
    def __init__(self):
        super().__init__("no records")


class UnresolvedRecordId(CorpusError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"annotation references unknown record id {record_id!r}")


class SpanOutOfBounds(CorpusError):
    def __init__(self, record_id: str, cluster_id: int | None, detail: str):
        self.record_id = record_id
        self.cluster_id = cluster_id
        super().__init__(f"record {record_id!r}: {detail}")


class Category(enum.Enum):
    FACTOID = "Factoid"
    EVIDENCE_BASED = "Evidence-Based"
    DEBATE = "Debate"
    REASON = "Reason"
    EXPERIENCE = "Experience"
    UNKNOWN = "Unknown"


_CATEGORY_ALIASES = {
    "factoid": Category.FACTOID,
    "evidence-based": Category.EVIDENCE_BASED,
    "evidencebased": Category.EVIDENCE_BASED,
    "evidence based": Category.EVIDENCE_BASED,
    "debate": Category.DEBATE,
    "reason": Category.REASON,
    "experience": Category.EXPERIENCE,
    "unknown": Category.UNKNOWN,
}


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


class TripleSource(enum.Enum):
    INDIE = "indie"
    GEN2OIE = "gen2oie"
    OTHER = "other"


LONG_CONTEXT_TOKEN_THRESHOLD = 512


@dataclass(frozen=True)
class TripleRecord:
    """One OIE triple anchored to a paragraph of its record."""

    record_id: str
    paragraph_index: int
    head: str
    relation: str
    tail: str
    source: TripleSource = TripleSource.OTHER


@dataclass(frozen=True)
class CorefClusterRecord:
    """Mentions of one entity, as (paragraph_index, char_start, char_end) spans."""

    record_id: str
    cluster_id: int
    mentions: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class QARecord:
    """A question with its paragraph-segmented context and reference answer.

    ``triples`` and ``clusters`` are ``None`` until annotations are
    attached; records seen by :func:`attach_annotations` always carry
    tuples, possibly empty.
    """

    id: str
    language: str
    question: str
    category: Category
    paragraphs: tuple[str, ...]
    silver_answer: str
    split: Split
    triples: tuple[TripleRecord, ...] | None = None
    clusters: tuple[CorefClusterRecord, ...] | None = None


@dataclass(frozen=True)
class CorpusStats:
    record_count: int
    mean_context_tokens: float
    long_context_fraction: float
    per_language: dict[str, int]


def context_token_count(record: QARecord) -> int:
    return sum(textproc.count_tokens(p) for p in record.paragraphs)


def classify_context_length(record: QARecord, threshold: int = LONG_CONTEXT_TOKEN_THRESHOLD) -> str:
    """``"long"`` iff the context strictly exceeds ``threshold`` tokens.

    A context of exactly ``threshold`` tokens still fits a conventional
    512-token encoder window, hence the strict inequality.
    """
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    return "long" if context_token_count(record) > threshold else "short"


def _require(obj: dict, field: str, line: int):
    value = obj.get(field)
    if value is None or (isinstance(value, str) and not value.strip()):
        raise MissingField(line, field)
    return value


def _parse_record(obj: dict, line: int) -> QARecord:
    record_id = str(_require(obj, "id", line))
    language = str(_require(obj, "language", line)).strip().lower()
    question = str(_require(obj, "question", line))
    category = _CATEGORY_ALIASES.get(
        str(_require(obj, "category", line)).strip().lower(), Category.UNKNOWN
    )
    paragraphs = obj.get("paragraphs")
    if paragraphs is None:
        raise MissingField(line, "paragraphs")
    if not isinstance(paragraphs, list) or not all(isinstance(p, str) for p in paragraphs):
        raise MalformedLine(line, "paragraphs must be an array of strings")
    paragraphs = [p for p in paragraphs if p.strip()]
    if not paragraphs:
        raise EmptyContext(line)
    split_raw = str(_require(obj, "split", line)).strip().lower()
    try:
        split = Split(split_raw)
    except ValueError:
        raise MalformedLine(line, f"split must be train or test, got {split_raw!r}") from None
    silver_answer = obj.get("silver_answer", "")
    if not isinstance(silver_answer, str):
        raise MalformedLine(line, "silver_answer must be a string")
    if split is Split.TEST and not silver_answer.strip():
        raise MissingField(line, "silver_answer")
    return QARecord(
        id=record_id,
        language=language,
        question=question,
        category=category,
        paragraphs=tuple(paragraphs),
        silver_answer=silver_answer,
        split=split,
    )


def _iter_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise MalformedLine(line_no, "record must be a JSON object")
            yield line_no, obj


def load_dataset(path: str | Path) -> list[QARecord]:
    """Load and validate all records of a JSONL dataset, in file order."""
    records: list[QARecord] = []
    seen: set[str] = set()
    for line_no, obj in _iter_jsonl(Path(path)):
        record = _parse_record(obj, line_no)
        if record.id in seen:
            raise DuplicateId(record.id)
        seen.add(record.id)
        records.append(record)
    return records


def save_dataset(records: Iterable[QARecord], path: str | Path) -> None:
    """Serialize records back to the on-disk schema (annotations excluded)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "id": r.id,
                        "language": r.language,
                        "question": r.question,
                        "category": r.category.value,
                        "paragraphs": list(r.paragraphs),
                        "silver_answer": r.silver_answer,
                        "split": r.split.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def _load_triples(path: Path, by_id: dict[str, QARecord]) -> dict[str, list[TripleRecord]]:
    out: dict[str, list[TripleRecord]] = {}
    for line_no, obj in _iter_jsonl(path):
        record_id = str(_require(obj, "record_id", line_no))
        record = by_id.get(record_id)
        if record is None:
            raise UnresolvedRecordId(record_id)
        p_idx = obj.get("paragraph_index")
        if not isinstance(p_idx, int) or p_idx < 0:
            raise MalformedLine(line_no, "paragraph_index must be a non-negative integer")
        if p_idx >= len(record.paragraphs):
            raise SpanOutOfBounds(
                record_id, None,
                f"triple paragraph_index {p_idx} >= paragraph count {len(record.paragraphs)}",
            )
        head = str(_require(obj, "head", line_no))
        relation = str(_require(obj, "relation", line_no))
        tail = str(_require(obj, "tail", line_no))
        try:
            source = TripleSource(str(obj.get("source", "other")).strip().lower())
        except ValueError:
            source = TripleSource.OTHER
        out.setdefault(record_id, []).append(
            TripleRecord(record_id, p_idx, head, relation, tail, source)
        )
    return out


def _load_clusters(path: Path, by_id: dict[str, QARecord]) -> dict[str, list[CorefClusterRecord]]:
    out: dict[str, list[CorefClusterRecord]] = {}
    for line_no, obj in _iter_jsonl(path):
        record_id = str(_require(obj, "record_id", line_no))
        record = by_id.get(record_id)
        if record is None:
            raise UnresolvedRecordId(record_id)
        cluster_id = obj.get("cluster_id")
        if not isinstance(cluster_id, int):
            raise MalformedLine(line_no, "cluster_id must be an integer")
        mentions_raw = obj.get("mentions")
        if not isinstance(mentions_raw, list) or len(mentions_raw) < 2:
            raise MalformedLine(line_no, "mentions must be an array of at least 2 spans")
        mentions = []
        for m in mentions_raw:
            if not (isinstance(m, list) and len(m) == 3 and all(isinstance(x, int) for x in m)):
                raise MalformedLine(line_no, "each mention must be [paragraph_index, start, end]")
            p_idx, start, end = m
            if not (0 <= p_idx < len(record.paragraphs)):
                raise SpanOutOfBounds(
                    record_id, cluster_id, f"mention paragraph index {p_idx} out of range"
                )
            if not (0 <= start < end <= len(record.paragraphs[p_idx])):
                raise SpanOutOfBounds(
                    record_id, cluster_id,
                    f"mention span ({start},{end}) outside paragraph {p_idx}",
                )
            mentions.append((p_idx, start, end))
        out.setdefault(record_id, []).append(
            CorefClusterRecord(record_id, cluster_id, tuple(mentions))
        )
    return out


def attach_annotations(
    records: Sequence[QARecord],
    triples_path: str | Path | None = None,
    coref_path: str | Path | None = None,
) -> list[QARecord]:
    """Return records annotated with their triples and coref clusters.

    Records absent from an annotation file carry empty tuples, never
    ``None``, so downstream strategies can tell "attached but empty" from
    "never attached".
    """
    by_id = {r.id: r for r in records}
    triples = _load_triples(Path(triples_path), by_id) if triples_path else {}
    clusters = _load_clusters(Path(coref_path), by_id) if coref_path else {}
    return [
        replace(
            r,
            triples=tuple(triples.get(r.id, ())),
            clusters=tuple(clusters.get(r.id, ())),
        )
        for r in records
    ]


def corpus_stats(records: Sequence[QARecord]) -> CorpusStats:
    """Record count, mean context length, long-context share, language counts."""
    if not records:
        raise EmptyCorpus()
    token_counts = [context_token_count(r) for r in records]
    per_language: dict[str, int] = {}
    for r in records:
        per_language[r.language] = per_language.get(r.language, 0) + 1
    long_count = sum(1 for c in token_counts if c > LONG_CONTEXT_TOKEN_THRESHOLD)
    return CorpusStats(
        record_count=len(records),
        mean_context_tokens=sum(token_counts) / len(records),
        long_context_fraction=long_count / len(records),
        per_language=per_language,
    )
