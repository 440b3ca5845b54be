import json

import pytest

from nfqa.corpus import Category, CorefClusterRecord, QARecord, Split, TripleRecord


def make_record(
    record_id="r1",
    language="hi",
    question="what happened?",
    category=Category.REASON,
    paragraphs=("first paragraph.", "second paragraph."),
    silver_answer="second paragraph.",
    split=Split.TEST,
    triples=None,
    clusters=None,
):
    return QARecord(
        id=record_id,
        language=language,
        question=question,
        category=category,
        paragraphs=tuple(paragraphs),
        silver_answer=silver_answer,
        split=split,
        triples=triples,
        clusters=clusters,
    )


def make_triple(record_id="r1", paragraph_index=0, head="Helen",
                relation="wife-of", tail="John Wick"):
    return TripleRecord(record_id, paragraph_index, head, relation, tail)


def make_cluster(record_id="r1", cluster_id=0, mentions=((0, 0, 3), (1, 0, 3))):
    return CorefClusterRecord(record_id, cluster_id, tuple(mentions))


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def dataset_row(record_id="r1", language="hi", question="what happened?",
                category="Reason", paragraphs=("first paragraph.", "second paragraph."),
                silver_answer="second paragraph.", split="test"):
    return {
        "id": record_id,
        "language": language,
        "question": question,
        "category": category,
        "paragraphs": list(paragraphs),
        "silver_answer": silver_answer,
        "split": split,
    }


@pytest.fixture
def tiny_dataset(tmp_path):
    rows = [
        dataset_row("r1", question="who is daisy?",
                    paragraphs=("Daisy is a beagle puppy.", "Helen gifted him a puppy."),
                    silver_answer="Daisy is a beagle puppy."),
        dataset_row("r2", language="ta", question="where did they go?",
                    paragraphs=("They went home.",), silver_answer="They went home."),
    ]
    return write_jsonl(tmp_path / "dataset.jsonl", rows)


TOPIC_WORDS = [
    "rivers flow toward the sea collecting rain",
    "volcanoes erupt and spread ash over valleys",
    "bees pollinate orchards during early spring",
    "glass makers melt sand in very hot kilns",
    "comets carry ancient ice across the system",
    "printing presses changed how ideas traveled",
    "coral reefs shelter thousands of species",
    "windmills grind grain using steady breezes",
]


def build_planted_fixture(tmp_path, n_records=20, n_paragraphs=4):
    """Dataset + mock score plan where one known paragraph holds the answer.

    The planted paragraph scores 0.9 and the rest 0.1, so top-1 selection
    always picks the paragraph equal to the silver answer; with the echo
    generator that makes the shortened pipeline reproduce the silver
    answer exactly while the full-context baseline dilutes it.
    """
    rows = []
    plan = []
    languages = ["hi", "ta", "te", "ur"]
    categories = ["Factoid", "Evidence-Based", "Debate", "Reason", "Experience"]
    for i in range(n_records):
        record_id = f"r{i:02d}"
        answer_idx = i % n_paragraphs
        paragraphs = []
        for j in range(n_paragraphs):
            words = TOPIC_WORDS[(i + j) % len(TOPIC_WORDS)]
            paragraphs.append(f"{words} case {i} part {j}.")
        rows.append(dataset_row(
            record_id,
            language=languages[i % 4],
            question=f"what does example {i} explain?",
            category=categories[i % 5],
            paragraphs=paragraphs,
            silver_answer=paragraphs[answer_idx],
        ))
        for j in range(n_paragraphs):
            plan.append([record_id, j, 0.9 if j == answer_idx else 0.1])
    dataset_path = write_jsonl(tmp_path / "planted.jsonl", rows)
    mock_config_path = tmp_path / "mock_config.json"
    mock_config_path.write_text(
        json.dumps({"seed": 0, "generator_mode": "echo_context", "score_plan": plan}),
        encoding="utf-8",
    )
    return dataset_path, mock_config_path
