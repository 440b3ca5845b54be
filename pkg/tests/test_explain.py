import numpy as np
import pytest

from nfqa.explain import (
    DegenerateSamples,
    EmptyInput,
    Rationale,
    ScorerFailure,
    TooFewBuckets,
    _sample_masks,
    coverage_matrix,
    coverage_trend_check,
    normalize_relevances,
    shapley_rationale,
    surrogate_rationale,
)

from oracles import oracle_shapley_exact, oracle_weighted_ridge


def presence_scorer(values):
    """Score a text by which marker tokens appear in it."""

    def scorer(question, text):
        present = frozenset(w for w in values if w in text.split())
        return values[present] if present in values else values.get(present, 0.0)

    return scorer


class TestSurrogateRationale:
    def test_constant_scorer_zero_relevance(self):
        rationale = surrogate_rationale(
            "q", "one two three four", lambda q, t: 0.7, n_samples=500, seed=1)
        assert all(abs(r) <= 1e-6 for r in rationale.relevances)
        assert rationale.logit == 0.7

    def test_linear_scorer_recovers_equal_weights(self):
        def scorer(question, text):
            return len(text.split()) / 4.0

        rationale = surrogate_rationale("q", "a b c d", scorer, n_samples=2000, seed=42)
        for coef in rationale.relevances:
            assert abs(coef - 0.25) <= 0.025

    def test_single_token_matches_exact_enumeration(self):
        def scorer(question, text):
            return 0.9 if text.strip() else 0.2

        n_samples, seed = 400, 7
        masks = _sample_masks(n_samples, 1, 0.3, seed)
        scores = [scorer("q", "word" if m[0] else "") for m in masks]
        weights = [float(np.exp(-(((1.0 - m.mean()) / 0.25) ** 2))) for m in masks]
        expected = oracle_weighted_ridge(
            [[float(x) for x in m] for m in masks], scores, weights, 1e-3)[0]

        rationale = surrogate_rationale("q", "word", scorer, n_samples=n_samples, seed=seed)
        assert abs(rationale.relevances[0] - expected) <= 1e-6

    def test_deterministic_per_seed(self):
        def scorer(question, text):
            return len(text) / 100.0

        a = surrogate_rationale("q", "v w x y z", scorer, n_samples=300, seed=9)
        b = surrogate_rationale("q", "v w x y z", scorer, n_samples=300, seed=9)
        assert a == b

    def test_positive_affine_scaling_preserves_ranking(self):
        def base(question, text):
            words = set(text.split())
            return 0.6 * ("important" in words) + 0.1 * ("minor" in words)

        def scaled(question, text):
            return 3.0 * base(question, text) + 5.0

        a = surrogate_rationale("q", "important minor filler", base,
                                n_samples=500, seed=3)
        b = surrogate_rationale("q", "important minor filler", scaled,
                                n_samples=500, seed=3)
        assert np.argsort(a.relevances).tolist() == np.argsort(b.relevances).tolist()
        np.testing.assert_allclose(np.array(b.relevances), 3.0 * np.array(a.relevances),
                                   atol=1e-8)

    def test_empty_passage_rejected(self):
        with pytest.raises(EmptyInput):
            surrogate_rationale("q", "...", lambda q, t: 0.5)

    def test_degenerate_masks(self):
        with pytest.raises(DegenerateSamples):
            surrogate_rationale("q", "word", lambda q, t: 0.5,
                                n_samples=2, mask_prob=0.0, seed=0)

    def test_scorer_failure_wrapped(self):
        def broken(question, text):
            raise RuntimeError("backend died")

        with pytest.raises(ScorerFailure):
            surrogate_rationale("q", "a b", broken, n_samples=10, seed=0)


class TestShapleyRationale:
    def test_two_token_fixture(self):
        values = {
            frozenset(): 0.0,
            frozenset(["alpha"]): 0.2,
            frozenset(["beta"]): 0.3,
            frozenset(["alpha", "beta"]): 1.0,
        }

        def scorer(question, text):
            return values[frozenset(text.split())]

        rationale = shapley_rationale("q", "alpha beta", scorer, seed=0)
        assert abs(rationale.relevances[0] - 0.45) <= 1e-9
        assert abs(rationale.relevances[1] - 0.55) <= 1e-9

    def test_additive_scorer_exact(self):
        weights = {"a": 0.1, "b": 0.25, "c": 0.4}

        def scorer(question, text):
            return sum(weights.get(w, 0.0) for w in text.split())

        rationale = shapley_rationale("q", "a b c", scorer, seed=0)
        for token, phi in zip(rationale.tokens, rationale.relevances):
            assert abs(phi - weights[token]) <= 1e-9

    def test_efficiency_axiom(self):
        def scorer(question, text):
            words = text.split()
            return 0.05 + 0.2 * len(words) + 0.3 * ("c" in words and "d" in words)

        rationale = shapley_rationale("q", "a b c d", scorer, seed=0)
        total = scorer("q", "a b c d") - scorer("q", "")
        assert abs(sum(rationale.relevances) - total) <= 1e-9

    def test_matches_permutation_oracle(self):
        def value_of_subset(members):
            return 0.1 * len(members) + (0.5 if members == {0, 2} else 0.0)

        tokens = ["t0", "t1", "t2"]

        def scorer(question, text):
            members = {tokens.index(w) for w in text.split()}
            return value_of_subset(members)

        expected = oracle_shapley_exact(3, lambda s: value_of_subset(set(s)))
        rationale = shapley_rationale("q", "t0 t1 t2", scorer, seed=0)
        for got, want in zip(rationale.relevances, expected):
            assert abs(got - want) <= 1e-9

    def test_symmetry_of_interchangeable_tokens(self):
        def scorer(question, text):
            return len(text.split()) ** 2 / 16.0

        rationale = shapley_rationale("q", "p q r s", scorer, seed=0)
        first = rationale.relevances[0]
        assert all(abs(r - first) <= 1e-12 for r in rationale.relevances)

    def test_sampled_mode_approximates_additive(self):
        tokens = [f"w{i}" for i in range(8)]
        weights = {t: 0.05 * (i + 1) for i, t in enumerate(tokens)}

        def scorer(question, text):
            return sum(weights.get(w, 0.0) for w in text.split())

        rationale = shapley_rationale("q", " ".join(tokens), scorer,
                                      n_permutations=300, seed=11)
        assert rationale.method == "shapley"
        for token, phi in zip(rationale.tokens, rationale.relevances):
            assert abs(phi - weights[token]) <= 0.05

    def test_sampled_mode_deterministic(self):
        def scorer(question, text):
            return len(text) / 50.0

        passage = "one two three four five six seven eight"
        a = shapley_rationale("q", passage, scorer, n_permutations=50, seed=2)
        b = shapley_rationale("q", passage, scorer, n_permutations=50, seed=2)
        assert a == b


class TestNormalizeRelevances:
    def test_max_abs_scaling(self):
        assert normalize_relevances([0.5, -1.0, 0.25]) == [0.5, 1.0, 0.25]

    def test_all_zero(self):
        assert normalize_relevances([0.0, 0.0]) == [0.0, 0.0]


class TestRuntimeWarning:
    def test_slow_rationale_warns(self, monkeypatch):
        monkeypatch.setattr("nfqa.explain.RUNTIME_WARN_SECONDS", 0.0)
        with pytest.warns(RuntimeWarning, match="rationale over"):
            surrogate_rationale("q", "a b", lambda q, t: 0.5, n_samples=20, seed=0)

    def test_fast_rationale_does_not_warn(self, recwarn):
        surrogate_rationale("q", "a b", lambda q, t: 0.5, n_samples=20, seed=0)
        assert not [w for w in recwarn if w.category is RuntimeWarning]


class TestLoadRationalesJsonl:
    def test_roundtrip_via_file(self, tmp_path):
        import json

        from nfqa.explain import load_rationales_jsonl

        rows = [
            {"tokens": ["a", "b"], "relevances": [1.0, 0.2], "logit": 0.35,
             "method": "surrogate", "seed": 3},
        ]
        path = tmp_path / "rationales.jsonl"
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        loaded = load_rationales_jsonl(path)
        assert loaded[0].tokens == ("a", "b")
        assert loaded[0].logit == 0.35
        assert loaded[0].seed == 3


def handwritten_rationale(logit, relevances, method="surrogate", seed=0):
    return Rationale(
        tokens=tuple(f"t{i}" for i in range(len(relevances))),
        relevances=tuple(relevances),
        logit=logit,
        method=method,
        seed=seed,
    )


class TestCoverageMatrix:
    def test_worked_example(self):
        # logit 0.35, 10 tokens, 7 relevances above 0.5 -> bucket 30-40
        # shows 70% coverage at threshold 0.5.
        relevances = [1.0, 0.9, 0.8, 0.7, 0.6, 0.55, 0.51, 0.4, 0.3, 0.2]
        matrix = coverage_matrix([handwritten_rationale(0.35, relevances)])
        bucket = 3
        t_index = matrix.thresholds.index(0.5)
        assert matrix.bucket_lows[bucket] == 30
        assert matrix.cells[bucket][t_index] == 70.0
        assert matrix.counts[bucket] == 1

    def test_all_zero_relevances(self):
        matrix = coverage_matrix([handwritten_rationale(0.5, [0.0] * 4)])
        occupied = matrix.counts.index(1)
        assert all(cell == 0.0 for cell in matrix.cells[occupied])

    def test_full_relevance_full_coverage(self):
        matrix = coverage_matrix([handwritten_rationale(0.91, [1.0, 1.0, 1.0])])
        for threshold, cell in zip(matrix.thresholds, matrix.cells[9]):
            if threshold < 1.0:
                assert cell == 100.0

    def test_logit_one_lands_in_last_bucket(self):
        matrix = coverage_matrix([handwritten_rationale(1.0, [1.0])])
        assert matrix.counts[9] == 1

    def test_empty_buckets_are_absent_not_zero(self):
        matrix = coverage_matrix([handwritten_rationale(0.05, [1.0])])
        assert matrix.counts[0] == 1
        assert all(cell is None for cell in matrix.cells[5])

    def test_duplicating_tokens_keeps_cells(self):
        base = handwritten_rationale(0.42, [1.0, 0.6, 0.2])
        doubled = handwritten_rationale(0.42, [1.0, 0.6, 0.2] * 2)
        a = coverage_matrix([base])
        b = coverage_matrix([doubled])
        assert a.cells == b.cells

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            coverage_matrix([])


class TestCoverageTrendCheck:
    def _mean_relevance_rationales(self, count=200):
        # logit equals the mean relevance by construction; one token is
        # pinned at 1.0 so max-abs normalization changes nothing.
        rationales = []
        for i in range(count):
            m = i / (count - 1)
            relevances = [1.0] + [m] * 9
            rationales.append(handwritten_rationale(sum(relevances) / 10, relevances))
        return rationales

    def test_mean_relevance_mock_is_monotone(self):
        matrix = coverage_matrix(self._mean_relevance_rationales())
        trend = coverage_trend_check(matrix)
        assert all(trend.values())
        assert set(trend) == set(matrix.thresholds)

    def test_constant_relevances_vacuously_true(self):
        rationales = [handwritten_rationale(logit, [0.8, 0.8, 0.8])
                      for logit in (0.1, 0.35, 0.62, 0.9)]
        trend = coverage_trend_check(coverage_matrix(rationales))
        assert all(trend.values())

    def test_inverted_relevances_fail(self):
        # High logits paired with narrow coverage, low logits with broad.
        rationales = [
            handwritten_rationale(0.9, [1.0, 0.01, 0.01, 0.01]),
            handwritten_rationale(0.1, [1.0, 0.9, 0.9, 0.9]),
        ]
        trend = coverage_trend_check(coverage_matrix(rationales))
        assert not all(trend.values())

    def test_too_few_buckets(self):
        matrix = coverage_matrix([handwritten_rationale(0.5, [1.0])])
        with pytest.raises(TooFewBuckets):
            coverage_trend_check(matrix)
