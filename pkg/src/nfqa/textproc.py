"""Deterministic multilingual text primitives.

Word tokenization, n-gram extraction, paragraph splitting, triple
verbalization, coreference rewriting, and coref-based triple grouping.
Every function here is pure: same input, same output, no I/O.

Tokenization segments on Unicode word boundaries approximated as maximal
runs of letters, combining marks, and digits. Combining marks matter:
``re``'s ``\\w`` splits Indic words at matras, which would wreck token
counts and n-gram overlap for Devanagari, Tamil, Telugu, and Arabic-script
text.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence


class TextprocError(ValueError):
    """Base class for text processing errors."""


class OverlappingMentions(TextprocError):
    """Two mention spans overlap, so substitution order is undefined."""

    def __init__(self, cluster_ids, paragraph_index):
        self.cluster_ids = tuple(cluster_ids)
        self.paragraph_index = paragraph_index
        super().__init__(
            f"overlapping mentions from clusters {self.cluster_ids} "
            f"in paragraph {paragraph_index}"
        )


@dataclass(frozen=True)
class Token:
    """A word token with character offsets into its source string.

    ``text`` is the verbatim source slice, so ``source[char_start:char_end]
    == text`` always holds. ``norm`` is the lowercased form that matching
    and n-gram metrics consume; scripts without case are unaffected.
    """

    text: str
    char_start: int
    char_end: int
    norm: str


@dataclass(frozen=True)
class TripleGroup:
    """A set of triples linked through shared coreference clusters."""

    group_id: int
    triple_indices: tuple[int, ...]
    cluster_ids: tuple[int, ...]


def _is_word_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("L", "M", "N")


def tokenize(text: str) -> list[Token]:
    """Segment ``text`` into word tokens with character offsets.

    Punctuation and whitespace never appear as tokens.
    """
    tokens: list[Token] = []
    start: int | None = None
    for i, ch in enumerate(text):
        if _is_word_char(ch):
            if start is None:
                start = i
        elif start is not None:
            piece = text[start:i]
            tokens.append(Token(piece, start, i, piece.lower()))
            start = None
    if start is not None:
        piece = text[start:]
        tokens.append(Token(piece, start, len(text), piece.lower()))
    return tokens


def tokenize_words(text: str) -> list[str]:
    """Lowercased word tokens; the form used for counting and metrics."""
    return [t.norm for t in tokenize(text)]


def count_tokens(text: str) -> int:
    return len(tokenize_words(text))


def load_stopword_file(path) -> frozenset:
    """One lowercased token per line; blank lines ignored.

    Stopword removal is off by default everywhere; callers opt in by
    passing the loaded set to the metric they want filtered.
    """
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def remove_stopwords(tokens: Sequence[str], stopwords: frozenset) -> list[str]:
    return [t for t in tokens if t not in stopwords]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    """Contiguous n-grams of ``tokens`` with multiplicity.

    Empty when ``len(tokens) < n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


_PARA_BREAK = re.compile(r"\n[ \t\r\f\v]*\n[\s]*")


def split_paragraphs(raw: str) -> list[str]:
    """Split on blank lines; trims each segment and drops empty ones."""
    return [p.strip() for p in _PARA_BREAK.split(raw) if p.strip()]


def verbalize_triple(triple) -> str:
    """Render a (head, relation, tail) triple as one flat sentence.

    The template is ``"{head} {relation} {tail}."`` with slot texts kept
    verbatim; language-agnostic and trivially reversible.
    """
    for slot in ("head", "relation", "tail"):
        if not getattr(triple, slot):
            raise ValueError(f"triple has empty {slot}: {triple!r}")
    return f"{triple.head} {triple.relation} {triple.tail}."


def _cluster_spans(paragraphs: Sequence[str], clusters) -> list[tuple[int, int, int, int]]:
    """Flatten clusters to (paragraph, start, end, cluster_id) spans, validated."""
    spans = []
    for cluster in clusters:
        for p_idx, start, end in cluster.mentions:
            if not (0 <= p_idx < len(paragraphs)):
                raise ValueError(
                    f"cluster {cluster.cluster_id}: paragraph index {p_idx} out of range"
                )
            if not (0 <= start < end <= len(paragraphs[p_idx])):
                raise ValueError(
                    f"cluster {cluster.cluster_id}: span ({start},{end}) outside paragraph {p_idx}"
                )
            spans.append((p_idx, start, end, cluster.cluster_id))
    return spans


def _check_no_overlap(spans: Iterable[tuple[int, int, int, int]]) -> None:
    by_para: dict[int, list[tuple[int, int, int]]] = {}
    for p_idx, start, end, cid in spans:
        by_para.setdefault(p_idx, []).append((start, end, cid))
    for p_idx, para_spans in by_para.items():
        para_spans.sort()
        for (s1, e1, c1), (s2, e2, c2) in zip(para_spans, para_spans[1:]):
            identical = (s1, e1) == (s2, e2)
            if identical and c1 == c2:
                continue  # duplicate mention, deduplicated before substitution
            if s2 < e1:
                raise OverlappingMentions((c1, c2), p_idx)


def rewrite_with_coref(paragraphs: Sequence[str], clusters) -> list[str]:
    """Replace every mention with its cluster's representative mention.

    The representative is the cluster's longest mention text; ties go to
    the earliest mention in (paragraph, offset) order. Replacements are
    applied right to left within each paragraph so earlier offsets stay
    valid. Text outside mention spans is never touched.
    """
    spans = _cluster_spans(paragraphs, clusters)
    _check_no_overlap(spans)

    replacements: dict[int, list[tuple[int, int, str]]] = {}
    for cluster in clusters:
        mention_texts = [
            (paragraphs[p][s:e], p, s) for p, s, e in cluster.mentions
        ]
        rep = max(mention_texts, key=lambda m: (len(m[0]), -m[1], -m[2]))[0]
        for p, s, e in cluster.mentions:
            if paragraphs[p][s:e] != rep:
                replacements.setdefault(p, []).append((s, e, rep))

    out = list(paragraphs)
    for p_idx, repls in replacements.items():
        text = out[p_idx]
        for start, end, rep in sorted(set(repls), reverse=True):
            text = text[:start] + rep + text[end:]
        out[p_idx] = text
    return out


def _contains_token_seq(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    for i in range(len(haystack) - len(needle) + 1):
        if list(haystack[i : i + len(needle)]) == list(needle):
            return True
    return False


def group_triples_by_cluster(triples, clusters, paragraphs: Sequence[str]) -> list[TripleGroup]:
    """Partition triples into groups linked by shared coreference clusters.

    A cluster matches a triple when any of the cluster's mention texts
    occurs, at token boundaries, inside any slot of the triple. All triples
    matched by one cluster are grouped, and grouping is closed transitively
    across clusters. Unmatched triples become singleton groups. Groups are
    ordered by their smallest triple index.
    """
    n = len(triples)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    slot_tokens = [
        tuple(tokenize_words(f"{t.head} {t.relation} {t.tail}")) for t in triples
    ]
    mention_token_seqs: dict[int, list[tuple[str, ...]]] = {}
    for cluster in clusters:
        seqs = []
        for p, s, e in cluster.mentions:
            words = tuple(tokenize_words(paragraphs[p][s:e]))
            if words:
                seqs.append(words)
        mention_token_seqs[cluster.cluster_id] = seqs

    cluster_matches: dict[int, list[int]] = {}
    for cluster in clusters:
        matched = [
            i
            for i in range(n)
            if any(
                _contains_token_seq(slot_tokens[i], seq)
                for seq in mention_token_seqs[cluster.cluster_id]
            )
        ]
        if matched:
            cluster_matches[cluster.cluster_id] = matched
            for other in matched[1:]:
                union(matched[0], other)

    components: dict[int, list[int]] = {}
    for i in range(n):
        components.setdefault(find(i), []).append(i)

    groups = []
    for gid, root in enumerate(sorted(components, key=lambda r: min(components[r]))):
        members = sorted(components[root])
        cids = sorted(
            cid for cid, matched in cluster_matches.items()
            if any(m in members for m in matched)
        )
        groups.append(TripleGroup(gid, tuple(members), tuple(cids)))
    return groups
