"""Walk through the five context-handling strategies on one record.

A question's context arrives as an ordered list of paragraphs. The
baseline (B) hands the generator everything; the other strategies build
a question-specific short context: A1 keeps the top-scoring paragraphs,
A2 swaps paragraphs for verbalized OIE triples, A3 rewrites coreferring
mentions before selecting, and A4 scores coreference-linked groups of
triples. Everything below runs offline with the deterministic mock
backend.
"""

from nfqa.corpus import Category, CorefClusterRecord, QARecord, Split, TripleRecord
from nfqa.mockbackend import MockBackend, MockConfig
from nfqa.scorer import make_passage_scorer
from nfqa.shorten import Strategy, shorten

# --- a record with paragraphs, triples, and one coreference cluster ----

paragraphs = (
    "John Wick lives in a quiet house outside the city.",
    "Helen gifted him a beagle puppy named Daisy.",
    "The nearby river floods the valley every spring.",
)

triples = (
    TripleRecord("r0", 0, "John Wick", "lives-in", "a quiet house"),
    TripleRecord("r0", 1, "Helen", "gifted", "him"),
    TripleRecord("r0", 1, "Daisy", "is-a", "beagle"),
    TripleRecord("r0", 2, "The river", "floods", "the valley"),
)

# "him" (paragraph 1) and "John Wick" (paragraph 0) name the same person.
clusters = (
    CorefClusterRecord("r0", 0, ((0, 0, 9), (1, 13, 16))),
)

record = QARecord(
    id="r0",
    language="hi",
    question="who gifted the puppy?",
    category=Category.FACTOID,
    paragraphs=paragraphs,
    silver_answer=paragraphs[1],
    split=Split.TEST,
    triples=triples,
    clusters=clusters,
)

# --- score paragraphs with the mock cross-encoder ----------------------

backend = MockBackend(MockConfig(seed=7))
scorer = make_passage_scorer("cross_encoder", backend)

for kind in ("B", "A1", "A2", "A3", "A4"):
    short = shorten(record, Strategy(kind=kind, k=1), scorer)
    print(f"=== strategy {kind} ({short.token_count} tokens)")
    for unit in short.units:
        print(f"  [{unit.origin} #{unit.unit_index} score={unit.score:.3f}]")
        print(f"  {unit.text}")
    print()

# B returns every paragraph untouched. A1 keeps the single highest-
# scoring paragraph. A2 shows one synthetic paragraph per source
# paragraph that had triples ("Helen gifted him. Daisy is-a beagle.").
# A3 selects over rewritten paragraphs where "him" became "John Wick".
# A4 merges the two paragraph-1 triples with the paragraph-0 triple into
# one candidate unit because "John Wick"/"him" share a cluster.
