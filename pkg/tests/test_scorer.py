import math
import random

import numpy as np
import pytest

from nfqa.backends import MalformedBackendReply
from nfqa.mockbackend import MockBackend, MockConfig
from nfqa.scorer import (
    Bm25Params,
    DimensionMismatch,
    EmptyCorpus,
    EmptySelectionA,
    RequestCache,
    ScoredUnit,
    ZeroVector,
    bm25_scores,
    cosine,
    cross_encoder_score,
    embed_score,
    make_passage_scorer,
    overlap_fraction,
    select_top_k,
)


class CountingBackend(MockBackend):
    """Mock that counts wire-level calls, for cache contracts."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.score_calls = 0
        self.embed_calls = 0

    def score(self, model_id, pairs):
        self.score_calls += 1
        return super().score(model_id, pairs)

    def embed_sentences(self, model_id, texts):
        self.embed_calls += 1
        return super().embed_sentences(model_id, texts)


class TestBm25:
    def test_empty_query_scores_zero(self):
        docs = [["x", "y"], ["z"]]
        assert bm25_scores([], docs) == [0.0, 0.0]

    def test_single_doc_fixture(self):
        # One doc ["x","y"], query ["x"], defaults k1=1.2 b=0.75:
        # idf = ln(1 + (1-1+0.5)/(1+0.5)) = ln(4/3); tf term reduces to 1.
        scores = bm25_scores(["x"], [["x", "y"]])
        assert abs(scores[0] - math.log(4.0 / 3.0)) < 1e-9

    def test_absent_term_contributes_nothing(self):
        docs = [["x", "y"], ["x"]]
        with_ghost = bm25_scores(["x", "ghost"], docs)
        without = bm25_scores(["x"], docs)
        assert with_ghost == without

    def test_scores_non_negative(self):
        rng = random.Random(11)
        vocab = "abcdef"
        for _ in range(50):
            docs = [[rng.choice(vocab) for _ in range(rng.randrange(1, 8))]
                    for _ in range(rng.randrange(1, 6))]
            query = [rng.choice(vocab) for _ in range(rng.randrange(0, 4))]
            assert all(s >= 0.0 for s in bm25_scores(query, docs))

    def test_duplicate_query_terms_count_once(self):
        docs = [["x", "y"]]
        assert bm25_scores(["x", "x"], docs) == bm25_scores(["x"], docs)

    def test_corpus_duplication_preserves_single_term_ranking(self):
        rng = random.Random(23)
        vocab = "abcd"
        for _ in range(100):
            docs = [[rng.choice(vocab) for _ in range(rng.randrange(1, 9))]
                    for _ in range(rng.randrange(2, 6))]
            term = rng.choice(vocab)
            base = bm25_scores([term], docs)
            doubled = bm25_scores([term], docs + docs)[: len(docs)]
            for i in range(len(docs)):
                for j in range(len(docs)):
                    if base[i] - base[j] > 1e-12:
                        assert doubled[i] > doubled[j]

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            bm25_scores(["x"], [])

    def test_param_validation(self):
        with pytest.raises(ValueError):
            Bm25Params(k1=0.0)
        with pytest.raises(ValueError):
            Bm25Params(b=1.5)


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.3, -1.2, 4.5])
        assert abs(cosine(v, v) - 1.0) < 1e-12

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value(self):
        assert abs(cosine([1.0, 1.0], [1.0, 0.0]) - 1.0 / math.sqrt(2)) < 1e-9

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine([1.0], [1.0, 2.0])


class TestBackendScoring:
    def test_cross_encoder_deterministic(self, tmp_path):
        backend = MockBackend(MockConfig(seed=5))
        a = cross_encoder_score("q", "p", backend)
        b = cross_encoder_score("q", "p", backend)
        assert a == b
        assert 0.0 <= a <= 1.0

    def test_cross_encoder_cache_hits_once(self, tmp_path):
        backend = CountingBackend(MockConfig(seed=5))
        cache = RequestCache(tmp_path / "cache")
        first = cross_encoder_score("q", "p", backend, cache=cache)
        second = cross_encoder_score("q", "p", backend, cache=cache)
        assert first == second
        assert backend.score_calls == 1

    def test_cache_survives_process_restart(self, tmp_path):
        backend = CountingBackend(MockConfig(seed=5))
        value = cross_encoder_score("q", "p", backend, cache=RequestCache(tmp_path / "c"))
        fresh_cache = RequestCache(tmp_path / "c")
        again = cross_encoder_score("q", "p", backend, cache=fresh_cache)
        assert again == value
        assert backend.score_calls == 1

    def test_out_of_range_logit_rejected(self, tmp_path):
        class BadBackend(MockBackend):
            def score(self, model_id, pairs):
                return [1.5] * len(pairs)

        with pytest.raises(MalformedBackendReply):
            cross_encoder_score("q", "p", BadBackend(MockConfig()))

    def test_embed_score_identity(self):
        backend = MockBackend(MockConfig(seed=1))
        assert abs(embed_score("same text", "same text", backend, "use") - 1.0) < 1e-6

    def test_embed_score_cached(self, tmp_path):
        backend = CountingBackend(MockConfig(seed=1))
        cache = RequestCache(tmp_path / "cache")
        a = embed_score("q", "p", backend, "use", cache)
        b = embed_score("q", "p", backend, "use", cache)
        assert a == b
        assert backend.embed_calls == 1

    def test_embed_score_byte_stable(self):
        one = embed_score("q", "p", MockBackend(MockConfig(seed=9)), "use")
        two = embed_score("q", "p", MockBackend(MockConfig(seed=9)), "use")
        assert one == two


class TestSelectTopK:
    def _units(self, scores):
        return [ScoredUnit(i, f"u{i}", s) for i, s in enumerate(scores)]

    def test_tie_breaks_to_lower_index(self):
        assert set(select_top_k(self._units([0.9, 0.2, 0.9]), 2)) == {0, 2}
        assert select_top_k(self._units([0.9, 0.2, 0.9]), 1) == [0]

    def test_k_larger_than_n(self):
        assert set(select_top_k(self._units([0.1, 0.5]), 10)) == {0, 1}

    def test_single_best(self):
        assert select_top_k(self._units([0.1, 0.5, 0.3]), 1) == [1]

    def test_descending_score_order(self):
        assert select_top_k(self._units([0.1, 0.5, 0.3]), 3) == [1, 2, 0]

    def test_deterministic(self):
        units = self._units([0.4, 0.4, 0.1, 0.8])
        assert select_top_k(units, 2) == select_top_k(units, 2)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            select_top_k(self._units([0.1]), 0)


class TestOverlapFraction:
    def test_half(self):
        assert overlap_fraction({1, 2}, {2, 3}) == 0.5

    def test_identical(self):
        assert overlap_fraction({1, 2, 3}, {1, 2, 3}) == 1.0

    def test_disjoint_and_differed(self):
        overlap = overlap_fraction({1, 2}, {3, 4})
        assert overlap == 0.0
        assert 1.0 - overlap == 1.0

    def test_empty_first_selection(self):
        with pytest.raises(EmptySelectionA):
            overlap_fraction(set(), {1})


class TestMakePassageScorer:
    def test_bm25_kind_needs_no_backend(self):
        scorer = make_passage_scorer("bm25")
        scores = scorer("x", ["x y", "z"])
        assert scores[0] > scores[1] == 0.0

    def test_cross_encoder_kind(self):
        scorer = make_passage_scorer("cross_encoder", MockBackend(MockConfig(seed=2)))
        scores = scorer("q", ["a", "b"])
        assert len(scores) == 2 and all(0.0 <= s <= 1.0 for s in scores)

    def test_embed_kind(self):
        scorer = make_passage_scorer("embed", MockBackend(MockConfig(seed=2)), "use")
        scores = scorer("q", ["q", "other"])
        assert abs(scores[0] - 1.0) < 1e-6

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_passage_scorer("tfidf")
