"""Deterministic in-process backend for tests and offline runs.

Embeddings are derived from a keyed hash of the text, generation echoes
the context slice of the QA prompt (or plays judge), and relevance
logits come from a plantable score plan with a hash fallback. Everything
is a pure function of (seed, inputs): identical calls return bitwise
identical results under any parallel schedule, with no network and no
stored vectors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import textproc
from .backends import Backend

GENERATOR_MODES = ("echo_context", "fixed_text", "judge_longer", "judge_option1")


class MissingHeaders(ValueError):
    """The prompt lacks the headers the echo generator keys on."""

    def __init__(self, header: str):
        self.header = header
        super().__init__(f"prompt is missing header {header!r}")


@dataclass(frozen=True)
class MockConfig:
    seed: int = 0
    embed_dim: int = 16
    generator_mode: str = "echo_context"
    fixed_text: str = ""
    # (record_id, unit_index) -> logit; units not in the plan fall back to
    # a seeded hash of (question, passage).
    score_plan: Mapping[tuple[str, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.generator_mode not in GENERATOR_MODES:
            raise ValueError(f"unknown generator_mode {self.generator_mode!r}")
        for key, value in self.score_plan.items():
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"score_plan value for {key} outside [0, 1]: {value}")


def _hash_bytes(seed: int, parts: Sequence[str], counter: int) -> bytes:
    h = hashlib.blake2b(digest_size=64, key=seed.to_bytes(8, "little", signed=True))
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    h.update(counter.to_bytes(4, "little"))
    return h.digest()


def _hash_unit_interval(seed: int, parts: Sequence[str]) -> float:
    digest = _hash_bytes(seed, parts, 0)
    return int.from_bytes(digest[:8], "big") / 2.0**64


def _hash_vector(seed: int, parts: Sequence[str], dim: int) -> np.ndarray:
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        digest = _hash_bytes(seed, parts, counter)
        for i in range(0, len(digest), 8):
            values.append(int.from_bytes(digest[i : i + 8], "big") / 2.0**63 - 1.0)
        counter += 1
    vec = np.array(values[:dim], dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


class MockBackend(Backend):
    """Backend built from hashes; see module docstring.

    ``records`` lets score-plan lookups resolve a (question, passage)
    pair back to (record_id, paragraph_index): questions are matched
    exactly, passages against the record's paragraphs.
    """

    def __init__(self, config: MockConfig = MockConfig(), records: Sequence | None = None):
        self.config = config
        self._question_to_record = {}
        for record in records or ():
            self._question_to_record.setdefault(record.question, record)

    # -- embeddings --

    def embed_sentences(self, model_id, texts):
        dim = self.config.embed_dim
        return np.stack([
            _hash_vector(self.config.seed, ("sentence", model_id, t), dim) for t in texts
        ]) if texts else np.zeros((0, dim))

    def embed_tokens(self, model_id, texts):
        dim = self.config.embed_dim
        out = []
        for text in texts:
            tokens = textproc.tokenize_words(text)
            if tokens:
                matrix = np.stack([
                    _hash_vector(self.config.seed, ("token", model_id, tok), dim)
                    for tok in tokens
                ])
            else:
                matrix = np.zeros((0, dim))
            out.append((tokens, matrix))
        return out

    # -- generation --

    def generate(self, model_id, prompt, temperature, max_new_tokens, seed):
        mode = self.config.generator_mode
        if mode == "fixed_text":
            return self.config.fixed_text
        if mode == "judge_longer":
            opt1, opt2 = _extract_options(prompt)
            return "option1" if len(opt1) >= len(opt2) else "option2"
        if mode == "judge_option1":
            return "option1"
        return _truncate_tokens(_extract_context(prompt), max_new_tokens)

    # -- scoring --

    def score(self, model_id, pairs):
        return [self._score_one(q, p) for q, p in pairs]

    def _score_one(self, question: str, passage: str) -> float:
        record = self._question_to_record.get(question)
        if record is not None and self.config.score_plan:
            for idx, paragraph in enumerate(record.paragraphs):
                if paragraph == passage and (record.id, idx) in self.config.score_plan:
                    return self.config.score_plan[(record.id, idx)]
        return _hash_unit_interval(self.config.seed, ("score", question, passage))


def _extract_context(prompt: str) -> str:
    start_marker = "##Context\n"
    end_marker = "\n##Answer"
    start = prompt.find(start_marker)
    if start < 0:
        raise MissingHeaders("##Context")
    start += len(start_marker)
    end = prompt.find(end_marker, start)
    if end < 0:
        raise MissingHeaders("##Answer")
    return prompt[start:end]


def _extract_options(prompt: str) -> tuple[str, str]:
    # Option texts may span lines; option1 ends where the option2 header
    # starts and option2 runs to the end of the prompt.
    marker1, marker2 = "##Option1: ", "\n##Option2: "
    start1 = prompt.find(marker1)
    if start1 < 0:
        raise MissingHeaders("##Option1")
    start1 += len(marker1)
    end1 = prompt.find(marker2, start1)
    if end1 < 0:
        raise MissingHeaders("##Option2")
    return prompt[start1:end1], prompt[end1 + len(marker2):]


def _truncate_tokens(text: str, max_tokens: int) -> str:
    tokens = textproc.tokenize(text)
    if len(tokens) <= max_tokens:
        return text
    return text[: tokens[max_tokens - 1].char_end]
