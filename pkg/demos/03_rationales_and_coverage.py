"""Explain a passage scorer's decision, token by token.

Two perturbation-based attributions: a linear surrogate fitted on
randomly masked passage variants, and sampled-permutation Shapley values
(exact for short passages). The coverage analysis then buckets many
rationales by scorer logit and asks how widely relevance spreads over
tokens at each threshold.
"""

import numpy as np

from nfqa.explain import (
    coverage_matrix,
    coverage_trend_check,
    shapley_rationale,
    surrogate_rationale,
)

# --- a transparent toy scorer ------------------------------------------
# Score = how much of the passage overlaps the question, plus a bonus for
# the word "flood". The rationale methods only see a black box.

QUESTION = "why does the valley flood"


def toy_scorer(question, passage):
    q_words = set(question.split())
    p_words = passage.split()
    if not p_words:
        return 0.05
    overlap = sum(1 for w in p_words if w in q_words) / len(p_words)
    bonus = 0.3 if "flood" in p_words else 0.0
    return min(1.0, 0.1 + 0.6 * overlap + bonus)


PASSAGE = "spring rain makes the valley flood"

surrogate = surrogate_rationale(QUESTION, PASSAGE, toy_scorer, n_samples=1500, seed=0)
shapley = shapley_rationale(QUESTION, PASSAGE, toy_scorer, seed=0)

print(f"scorer logit: {surrogate.logit:.3f}\n")
print(f"{'token':<10} {'surrogate':>10} {'shapley':>10}")
for token, s_rel, sh_rel in zip(surrogate.tokens, surrogate.relevances,
                                shapley.relevances):
    print(f"{token:<10} {s_rel:>10.4f} {sh_rel:>10.4f}")
# Both methods should agree that "valley" and "flood" carry the score.

# --- coverage analysis over many synthetic rationales -------------------
# Construct rationales whose logit equals their mean relevance; coverage
# must then grow with the logit bucket at every threshold.

rng = np.random.default_rng(1)
rationales = []
for _ in range(300):
    center = rng.uniform(0.05, 0.95)
    relevances = [1.0] + list(np.clip(rng.normal(center, 0.05, size=9), 0.0, 1.0))
    logit = float(np.mean(relevances))
    rationales.append(type(surrogate)(
        tokens=tuple(f"t{i}" for i in range(10)),
        relevances=tuple(float(r) for r in relevances),
        logit=logit, method="surrogate", seed=0,
    ))

matrix = coverage_matrix(rationales)
print("\nbucket  count  coverage@0.5")
t_half = matrix.thresholds.index(0.5)
for low, count, cells in zip(matrix.bucket_lows, matrix.counts, matrix.cells):
    cell = "-" if cells[t_half] is None else f"{cells[t_half]:5.1f}%"
    print(f"{low:>3}-{low + 10:<3} {count:>5}  {cell}")

trend = coverage_trend_check(matrix)
print(f"\ncoverage non-decreasing across buckets at every threshold: "
      f"{all(trend.values())}")
