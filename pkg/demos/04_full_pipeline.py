"""End-to-end run: dataset -> shorten -> generate -> evaluate -> judge.

Builds a small synthetic dataset where one known paragraph holds each
answer, plants matching scores in the mock backend, and compares the
full-context baseline (B) against top-1 paragraph selection (A1). With
the echo generator, A1 reproduces the silver answer exactly, so its
token metrics come out strictly ahead; the judge run then compares both
answer sets pairwise.

Everything is written under ./demo_runs/ and is byte-reproducible.
"""

import json
import shutil
from pathlib import Path

from nfqa.pipeline import PipelineConfig, run_judge, run_pipeline, selection_overlap

OUT = Path("demo_runs")
if OUT.exists():
    shutil.rmtree(OUT)
OUT.mkdir()

# --- synthesize the dataset and the mock's score plan -------------------

topics = [
    "rivers flow toward the sea collecting rain",
    "volcanoes erupt and spread ash over valleys",
    "bees pollinate orchards during early spring",
    "glass makers melt sand in very hot kilns",
]

dataset_path = OUT / "dataset.jsonl"
plan = []
with dataset_path.open("w", encoding="utf-8") as fh:
    for i in range(12):
        answer_idx = i % 4
        paragraphs = [f"{topics[(i + j) % 4]} case {i} part {j}." for j in range(4)]
        fh.write(json.dumps({
            "id": f"r{i:02d}",
            "language": ["hi", "ta", "te", "ur"][i % 4],
            "question": f"what does example {i} explain?",
            "category": ["Factoid", "Reason", "Debate"][i % 3],
            "paragraphs": paragraphs,
            "silver_answer": paragraphs[answer_idx],
            "split": "test",
        }, ensure_ascii=False) + "\n")
        plan += [[f"r{i:02d}", j, 0.9 if j == answer_idx else 0.1] for j in range(4)]

mock_config = OUT / "mock.json"
mock_config.write_text(json.dumps({"generator_mode": "echo_context",
                                   "score_plan": plan}))


def config(strategy, run_id, scorer="aps"):
    return PipelineConfig(
        dataset=str(dataset_path), backend="mock", mock_config=str(mock_config),
        strategy=strategy, scorer=scorer, top_k=1, seed=0,
        out=str(OUT / "runs"), run_id=run_id)


# --- run both strategies and compare ------------------------------------

result_b = run_pipeline(config("B", "baseline"))
result_a1 = run_pipeline(config("A1", "shortened"))

for result in (result_b, result_a1):
    report = json.loads((result.run_dir / "report.json").read_text())
    for strategy, values in report["strategies"].items():
        print(f"strategy {strategy}: r1={values['r1']:.3f} "
              f"rl={values['rl']:.3f} semantic={values['sts_mute']:.3f}")

# --- judge the two answer sets pairwise ----------------------------------

judge_mock = OUT / "judge_mock.json"
judge_mock.write_text(json.dumps({"generator_mode": "judge_longer"}))
judge_dir = run_judge(
    PipelineConfig(dataset=str(dataset_path), backend="mock",
                   mock_config=str(judge_mock), out=str(OUT / "runs"),
                   judge_model="judge", run_id="verdicts"),
    result_a1.run_dir, result_b.run_dir)
print("\njudge report:")
print((judge_dir / "judge_report.json").read_text())

# The longer-is-better mock judge favors B's echoed full context; a real
# judging model is wired in the same way through the shim backend.

# --- how differently would BM25 have picked paragraphs? ------------------

result_bm25 = run_pipeline(config("A1", "shortened-bm25", scorer="bm25"))
overlap = selection_overlap(result_a1.run_dir, result_bm25.run_dir)
print(f"selection overlap, planted scorer vs bm25: {overlap['mean_overlap']:.2f} "
      f"(differed: {overlap['mean_differed']:.2f})")
