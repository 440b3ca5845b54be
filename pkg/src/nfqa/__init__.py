"""Long-context non-factoid question answering toolkit.

Shortens long contexts with selectable strategies, generates answers
through pluggable backends, evaluates them with token-level and
semantic-level metrics, and explains the passage scorer's decisions with
perturbation-based rationales.
"""

from .backends import Backend, BackendEndpoint, HttpBackend
from .corpus import (
    CorefClusterRecord,
    CorpusStats,
    QARecord,
    TripleRecord,
    attach_annotations,
    classify_context_length,
    corpus_stats,
    load_dataset,
)
from .explain import (
    CoverageMatrix,
    Rationale,
    coverage_matrix,
    coverage_trend_check,
    shapley_rationale,
    surrogate_rationale,
)
from .genclient import (
    GenerationRequest,
    JudgeVerdict,
    build_judge_prompt,
    build_qa_prompt,
    generate,
    judge,
    parse_judge_output,
)
from .metrics import (
    EvalRow,
    Report,
    RougeScores,
    SemanticScores,
    aggregate,
    bertscore,
    best_k_category_profile,
    common_superiority,
    evaluate_pair,
    improvement,
    rouge_lcs,
    rouge_n,
    sts_mute,
)
from .mockbackend import MockBackend, MockConfig
from .scorer import (
    Bm25Params,
    RequestCache,
    ScoredUnit,
    bm25_scores,
    cosine,
    cross_encoder_score,
    embed_score,
    overlap_fraction,
    select_top_k,
)
from .shorten import ShortContext, Strategy, shorten
from .textproc import (
    Token,
    group_triples_by_cluster,
    ngrams,
    rewrite_with_coref,
    split_paragraphs,
    tokenize,
    tokenize_words,
    verbalize_triple,
)

__version__ = "0.1.0"
