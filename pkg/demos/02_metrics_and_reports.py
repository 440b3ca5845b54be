"""Score generated answers token-wise and semantically, then aggregate.

Token-level quality is ROUGE-1/2/3 and ROUGE-LCS over word tokens.
Semantic quality combines three sentence-embedding cosines with a
token-level greedy-matching F1 into a single scalar (arithmetic mean by
default). The mock backend makes the semantic side deterministic so this
demo is reproducible anywhere.
"""

from nfqa.corpus import Category, QARecord, Split
from nfqa.metrics import (
    aggregate,
    evaluate_pair,
    improvement,
    rouge_lcs,
    rouge_n,
)
from nfqa.mockbackend import MockBackend, MockConfig
from nfqa.textproc import tokenize_words

# --- token-level metrics on a hand-sized example ------------------------

reference = tokenize_words("the river floods the valley every spring")
hypothesis = tokenize_words("the river floods the valley")

for n in (1, 2, 3):
    prf = rouge_n(reference, hypothesis, n)
    print(f"rouge-{n}: p={prf.precision:.3f} r={prf.recall:.3f} f1={prf.f1:.3f}")
prf = rouge_lcs(reference, hypothesis)
print(f"rouge-lcs: p={prf.precision:.3f} r={prf.recall:.3f} f1={prf.f1:.3f}")
print()

# --- full evaluation rows and per-strategy aggregation -------------------

backend = MockBackend(MockConfig(seed=3))


def record(record_id, answer):
    return QARecord(
        id=record_id, language="ta", question="what happens in spring?",
        category=Category.REASON, paragraphs=("context paragraph.",),
        silver_answer=answer, split=Split.TEST,
    )


rows = [
    # a perfect answer and a partial answer, under two strategy labels
    evaluate_pair(record("q1", "the valley floods in spring"),
                  "the valley floods in spring", backend, strategy="A1"),
    evaluate_pair(record("q2", "the river freezes over in winter"),
                  "the river freezes", backend, strategy="A1"),
    evaluate_pair(record("q1", "the valley floods in spring"),
                  "many unrelated words entirely", backend, strategy="B"),
    evaluate_pair(record("q2", "the river freezes over in winter"),
                  "the river freezes over in winter maybe", backend, strategy="B"),
]

report = aggregate(rows)
for strategy, values in sorted(report.strategies.items()):
    print(f"strategy {strategy}: "
          + " ".join(f"{k}={v:.3f}" for k, v in sorted(values.items())))

# Percentage change of A1 over B, split into semantic and token averages.
change = improvement(report.strategies["A1"], report.strategies["B"])
print(f"\nsemantic avg change: {change.semantic_avg_pct:+.1f}%")
print(f"token avg change:    {change.token_avg_pct:+.1f}%")
