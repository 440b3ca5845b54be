"""Prompt assembly, answer generation, and the two-option judge protocol.

The QA prompt and the judge prompt are fixed byte-exact templates; tests
pin them against golden files. Generation results are cached keyed by
the full request, and wall-clock seconds per call are recorded so runs
can report per-question latency.

Judge calls assign candidate answers to option slots by item parity
(even item index keeps the (x, y) order, odd swaps it), which spreads
any position bias of the judging model evenly across both sides and
stays reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .backends import Backend, PromptTooLong
from .scorer import RequestCache

QA_PROMPT_TEMPLATE = (
    "Answer the question based on the given context.\n"
    "##Question\n"
    "{question}\n"
    "##Context\n"
    "{context}\n"
    "##Answer\n"
)

JUDGE_PROMPT_TEMPLATE = (
    "Given the following question, you are given a ground-truth answer and two options. "
    "Choose the option that is closest to the ground truth. "
    "You are only allowed to choose one option. "
    'Print either "option1" or "option2". Print nothing else.\n'
    "##Question {question}\n"
    "##Ground_Truth: {ground_truth}\n"
    "##Option1: {option1}\n"
    "##Option2: {option2}"
)

DEFAULT_TEMPERATURE = 0.001
DEFAULT_MAX_NEW_TOKENS = 512


class GenClientError(ValueError):
    """Base class for prompt and judge errors."""


class EmptyQuestion(GenClientError):
    def __init__(self):
        super().__init__("question is empty")


class EmptyContext(GenClientError):
    def __init__(self):
        super().__init__("context is empty")


class EmptyField(GenClientError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"judge prompt field {name!r} is empty")


class UnparseableVerdict(GenClientError):
    def __init__(self, raw_reply: str):
        self.raw_reply = raw_reply
        super().__init__(f"cannot parse judge reply: {raw_reply!r}")


class ContextTooLong(GenClientError):
    def __init__(self, model_id: str, limit: int | None = None):
        self.model_id = model_id
        self.limit = limit
        super().__init__(f"context exceeds the token limit of model {model_id!r}")


@dataclass(frozen=True)
class GenerationRequest:
    model_id: str
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")


@dataclass
class Telemetry:
    """Per-call wall-clock seconds; workers keep their own and merge at the end."""

    samples: list[float] = field(default_factory=list)

    def record(self, seconds: float) -> None:
        self.samples.append(seconds)

    def merge(self, other: "Telemetry") -> None:
        self.samples.extend(other.samples)

    def stats(self) -> dict:
        if not self.samples:
            return {"count": 0, "total_s": 0.0, "mean_s": 0.0, "max_s": 0.0}
        return {
            "count": len(self.samples),
            "total_s": sum(self.samples),
            "mean_s": sum(self.samples) / len(self.samples),
            "max_s": max(self.samples),
        }


@dataclass(frozen=True)
class JudgeVerdict:
    winner: str  # "option1" | "option2"
    option1_source: str
    option2_source: str
    raw_reply: str
    tie_inputs: bool

    @property
    def winner_source(self) -> str:
        return self.option1_source if self.winner == "option1" else self.option2_source


def build_qa_prompt(question: str, context: str, answer: str | None = None) -> str:
    """Fill the QA template; the answer slot is appended only in training mode.

    The inference prompt keeps the trailing answer header as the
    generation cue, so the no-answer prompt is always a prefix of the
    with-answer prompt.
    """
    if not question.strip():
        raise EmptyQuestion()
    if not context.strip():
        raise EmptyContext()
    prompt = QA_PROMPT_TEMPLATE.format(question=question, context=context)
    if answer is not None:
        prompt += answer
    return prompt


def generate(
    req: GenerationRequest,
    backend: Backend,
    cache: RequestCache | None = None,
    telemetry: Telemetry | None = None,
) -> str:
    """Run one generation request, replaying from cache when possible."""
    request_key = {
        "kind": "generate",
        "model_id": req.model_id,
        "prompt": req.prompt,
        "temperature": req.temperature,
        "max_new_tokens": req.max_new_tokens,
        "seed": req.seed,
    }
    digest = RequestCache.digest(request_key)
    started = time.perf_counter()
    if cache is not None:
        hit = cache.get("generate", digest)
        if hit is not None:
            if telemetry is not None:
                telemetry.record(time.perf_counter() - started)
            return hit["text"]
    try:
        text = backend.generate(
            req.model_id, req.prompt, req.temperature, req.max_new_tokens, req.seed)
    except PromptTooLong as exc:
        raise ContextTooLong(req.model_id, exc.limit) from exc
    if telemetry is not None:
        telemetry.record(time.perf_counter() - started)
    if cache is not None:
        cache.put("generate", digest, {"text": text})
    return text


def build_judge_prompt(question: str, ground_truth: str, option1: str, option2: str) -> str:
    fields = {
        "question": question,
        "ground_truth": ground_truth,
        "option1": option1,
        "option2": option2,
    }
    for name, value in fields.items():
        if not value.strip():
            raise EmptyField(name)
    return JUDGE_PROMPT_TEMPLATE.format(**fields)


def parse_judge_output(raw: str) -> str:
    """Map a judge reply to "option1" or "option2".

    Exact case-insensitive match first, then a unique-substring fallback;
    replies naming both options or neither are unparseable.
    """
    cleaned = raw.strip().lower()
    if cleaned in ("option1", "option2"):
        return cleaned
    has1 = "option1" in cleaned
    has2 = "option2" in cleaned
    if has1 == has2:
        raise UnparseableVerdict(raw)
    return "option1" if has1 else "option2"


def judge(
    question: str,
    ground_truth: str,
    answer_x: str,
    answer_y: str,
    item_index: int,
    backend: Backend,
    model_id: str,
    source_x: str,
    source_y: str,
    cache: RequestCache | None = None,
    telemetry: Telemetry | None = None,
    seed: int = 0,
) -> JudgeVerdict:
    """Ask the judge model which answer is closer to the ground truth.

    Option order alternates with item parity so neither source is pinned
    to one slot; the verdict maps back to the winning source strategy.
    """
    if item_index % 2 == 0:
        option1, option2 = answer_x, answer_y
        source1, source2 = source_x, source_y
    else:
        option1, option2 = answer_y, answer_x
        source1, source2 = source_y, source_x
    prompt = build_judge_prompt(question, ground_truth, option1, option2)
    raw = generate(
        GenerationRequest(model_id=model_id, prompt=prompt, seed=seed),
        backend, cache, telemetry,
    )
    winner = parse_judge_output(raw)
    return JudgeVerdict(
        winner=winner,
        option1_source=source1,
        option2_source=source2,
        raw_reply=raw,
        tie_inputs=(answer_x == answer_y),
    )
