"""End-to-end orchestration: ingest, shorten, generate, evaluate, judge, explain.

One run processes every test record through
shorten -> prompt -> generate -> evaluate, then writes ``rows.csv``,
``report.json``, ``answers.jsonl``, and a manifest into its run
directory. Per-record failures are tallied and never abort the run.
With the mock backend and fixed seeds the result files are byte
reproducible: records are processed independently and all outputs are
sorted by record id before writing.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

from . import corpus, explain, genclient, metrics, runs, textproc
from . import scorer as scorer_mod
from .backends import Backend, BackendEndpoint, HttpBackend
from .genclient import GenerationRequest, Telemetry
from .mockbackend import MockBackend, MockConfig
from .shorten import STRATEGY_KINDS, Strategy, shorten as apply_strategy

BACKEND_URL_ENV = "NFQA_BACKEND_URL"
API_KEY_ENV = "NFQA_API_KEY"

SCORER_NAMES = {"aps": "cross_encoder", "bm25": "bm25", "embed": "embed"}

CSV_COLUMNS = ("record_id", "strategy", "category",
               "r1", "r2", "r3", "rl",
               "bertscore", "cos_use", "cos_labse", "cos_laser", "sts_mute")


class ConfigError(ValueError):
    """Bad configuration or dataset; maps to exit code 1."""


class _StopwordLookup:
    """Lazy per-language stopword sets from `<dir>/<language>.txt` files."""

    def __init__(self, stopword_dir: str | None):
        self._dir = Path(stopword_dir) if stopword_dir else None
        self._cache: dict[str, frozenset | None] = {}
        self._lock = threading.Lock()

    def get(self, language: str) -> frozenset | None:
        if self._dir is None:
            return None
        with self._lock:
            if language not in self._cache:
                path = self._dir / f"{language}.txt"
                self._cache[language] = (
                    textproc.load_stopword_file(path) if path.exists() else None)
            return self._cache[language]


@dataclass
class PipelineConfig:
    dataset: str = ""
    triples: str | None = None
    coref: str | None = None
    strategy: str = "B"
    scorer: str = "aps"
    top_k: int = 1
    backend: str = "mock"
    backend_url: str | None = None
    mock_config: str | None = None
    model: str = "echo"
    judge_model: str = "judge"
    embed_model: str = "use"
    temperature: float = 0.001
    max_new_tokens: int = 512
    seed: int = 0
    mean_mode: str = "arithmetic"
    # Directory of `<language>.txt` stopword lists; token-level metrics
    # filter by the record's language when its file exists. Default off.
    stopword_dir: str | None = None
    workers: int = 1
    out: str = "runs"
    run_id: str | None = None
    explain_method: str = "surrogate"
    explain_samples: int = explain.DEFAULT_N_SAMPLES
    explain_permutations: int = explain.DEFAULT_N_PERMUTATIONS
    explain_max_pairs: int | None = None

    def validate(self) -> None:
        if not self.dataset:
            raise ConfigError("no dataset given")
        if self.strategy not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.scorer not in SCORER_NAMES:
            raise ConfigError(f"unknown scorer {self.scorer!r}; pick one of {sorted(SCORER_NAMES)}")
        if self.backend not in ("mock", "shim"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.top_k < 1:
            raise ConfigError("top-k must be >= 1")
        if self.explain_method not in ("surrogate", "shapley"):
            raise ConfigError(f"unknown explain method {self.explain_method!r}")

    def as_dict(self) -> dict:
        return asdict(self)


def load_config_file(path: str | Path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ConfigError("config file must hold a JSON object")
    return obj


def _load_mock_config(path: str | Path | None, seed: int) -> MockConfig:
    if path is None:
        return MockConfig(seed=seed)
    with Path(path).open(encoding="utf-8") as fh:
        obj = json.load(fh)
    plan = {}
    for entry in obj.get("score_plan", []):
        record_id, unit_index, value = entry
        plan[(str(record_id), int(unit_index))] = float(value)
    return MockConfig(
        seed=int(obj.get("seed", seed)),
        embed_dim=int(obj.get("embed_dim", 16)),
        generator_mode=obj.get("generator_mode", "echo_context"),
        fixed_text=obj.get("fixed_text", ""),
        score_plan=plan,
    )


def make_backend(config: PipelineConfig, records: Sequence[corpus.QARecord] = ()) -> Backend:
    if config.backend == "mock":
        return MockBackend(_load_mock_config(config.mock_config, config.seed), records)
    url = config.backend_url or os.environ.get(BACKEND_URL_ENV)
    if not url:
        raise ConfigError(
            f"shim backend needs --backend-url or {BACKEND_URL_ENV}")
    endpoint = BackendEndpoint(
        url=url,
        generate_model=config.model,
        api_key=os.environ.get(API_KEY_ENV),
    )
    return HttpBackend(endpoint)


def load_records(config: PipelineConfig) -> list[corpus.QARecord]:
    try:
        records = corpus.load_dataset(config.dataset)
        if config.triples or config.coref:
            records = corpus.attach_annotations(records, config.triples, config.coref)
    except (corpus.CorpusError, OSError) as exc:
        raise ConfigError(f"dataset error: {exc}") from exc
    return records


def _make_scorer(config: PipelineConfig, backend: Backend, cache: scorer_mod.RequestCache):
    kind = SCORER_NAMES[config.scorer]
    model_id = config.embed_model if kind == "embed" else "aps"
    return scorer_mod.make_passage_scorer(kind, backend, model_id, cache)


def _row_to_csv(row: metrics.EvalRow) -> str:
    values = [row.record_id, row.strategy, row.category] + [
        repr(row.metric(m)) for m in CSV_COLUMNS[3:]
    ]
    return ",".join(values)


def rows_to_csv_text(rows: Sequence[metrics.EvalRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines += [_row_to_csv(r) for r in rows]
    return "\n".join(lines) + "\n"


def report_to_dict(report: metrics.Report) -> dict:
    return {"strategies": report.strategies, "counts": report.counts}


@dataclass
class RunResult:
    run_dir: Path
    rows: list[metrics.EvalRow] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Execute one full run; see module docstring for the produced files."""
    config.validate()
    records = load_records(config)
    test_records = sorted(
        (r for r in records if r.split is corpus.Split.TEST), key=lambda r: r.id)
    if not test_records:
        raise ConfigError("dataset has no test records")

    run_id = config.run_id or f"{config.strategy}-{config.scorer}-seed{config.seed}"
    run_dir = runs.create_run_dir(config.out, run_id)
    manifest = {
        "run_id": run_id,
        "config": config.as_dict(),
        "config_hash": runs.config_hash(config.as_dict()),
        "dataset_path": config.dataset,
        "dataset_sha256": runs.sha256_file(config.dataset),
        "strategy": config.strategy,
        "scorer": config.scorer,
        "k": config.top_k,
        "backend": {"kind": config.backend, "url": config.backend_url,
                    "model": config.model},
        "seed": config.seed,
        "started_at": runs.utc_now(),
        "status": "running",
    }
    runs.write_manifest(run_dir, manifest)

    backend = make_backend(config, records)
    cache = scorer_mod.RequestCache(run_dir / "cache")
    passage_scorer = None
    if config.strategy != "B":
        passage_scorer = _make_scorer(config, backend, cache)
    strategy = Strategy(
        kind=config.strategy, scorer_kind=SCORER_NAMES[config.scorer], k=config.top_k)
    telemetry = Telemetry()
    stopwords = _StopwordLookup(config.stopword_dir)

    def process(record: corpus.QARecord) -> tuple[metrics.EvalRow, dict]:
        short = apply_strategy(record, strategy, passage_scorer)
        prompt = genclient.build_qa_prompt(record.question, short.text)
        answer = genclient.generate(
            GenerationRequest(
                model_id=config.model,
                prompt=prompt,
                temperature=config.temperature,
                max_new_tokens=config.max_new_tokens,
                seed=config.seed,
            ),
            backend, cache, telemetry,
        )
        row = metrics.evaluate_pair(record, answer, backend, config.strategy,
                                    config.mean_mode, stopwords.get(record.language))
        answer_entry = {
            "record_id": record.id,
            "strategy": config.strategy,
            "question": record.question,
            "silver_answer": record.silver_answer,
            "answer": answer,
            "selected_units": [
                {"unit_index": u.unit_index, "origin": u.origin, "text": u.text}
                for u in short.units
            ],
            "token_count": short.token_count,
        }
        return row, answer_entry

    rows: list[metrics.EvalRow] = []
    answers: list[dict] = []
    failures: list[dict] = []

    def handle(record: corpus.QARecord):
        try:
            return record.id, process(record), None
        except Exception as exc:
            return record.id, None, {"record_id": record.id,
                                     "error": type(exc).__name__, "detail": str(exc)}

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(handle, test_records))
    else:
        outcomes = [handle(r) for r in test_records]

    for _, result, failure in sorted(outcomes, key=lambda o: o[0]):
        if failure is not None:
            failures.append(failure)
        else:
            row, answer_entry = result
            rows.append(row)
            answers.append(answer_entry)

    runs.write_jsonl(run_dir / "answers.jsonl", answers)
    runs.atomic_write_text(run_dir / "rows.csv", rows_to_csv_text(rows))
    report = metrics.aggregate(rows) if rows else metrics.Report({}, {})
    runs.atomic_write_json(run_dir / "report.json", report_to_dict(report))

    manifest.update({
        "finished_at": runs.utc_now(),
        "status": "complete",
        "record_count": len(test_records),
        "row_count": len(rows),
        "failure_count": len(failures),
        "failures": failures,
        "latency": telemetry.stats(),
    })
    runs.write_manifest(run_dir, manifest)
    return RunResult(run_dir=run_dir, rows=rows, failures=failures)


def shorten_only(config: PipelineConfig) -> RunResult:
    """The shorten stage alone; writes ``shortened.jsonl`` to the run dir."""
    config.validate()
    records = load_records(config)
    test_records = sorted(
        (r for r in records if r.split is corpus.Split.TEST), key=lambda r: r.id)
    if not test_records:
        raise ConfigError("dataset has no test records")
    run_id = config.run_id or f"shorten-{config.strategy}-{config.scorer}-seed{config.seed}"
    run_dir = runs.create_run_dir(config.out, run_id)
    manifest = {
        "run_id": run_id,
        "config": config.as_dict(),
        "config_hash": runs.config_hash(config.as_dict()),
        "dataset_sha256": runs.sha256_file(config.dataset),
        "strategy": config.strategy,
        "scorer": config.scorer,
        "k": config.top_k,
        "seed": config.seed,
        "started_at": runs.utc_now(),
        "status": "running",
    }
    runs.write_manifest(run_dir, manifest)

    backend = make_backend(config, records)
    cache = scorer_mod.RequestCache(run_dir / "cache")
    passage_scorer = _make_scorer(config, backend, cache) if config.strategy != "B" else None
    strategy = Strategy(
        kind=config.strategy, scorer_kind=SCORER_NAMES[config.scorer], k=config.top_k)

    entries = []
    failures = []
    for record in test_records:
        try:
            short = apply_strategy(record, strategy, passage_scorer)
        except Exception as exc:
            failures.append({"record_id": record.id,
                             "error": type(exc).__name__, "detail": str(exc)})
            continue
        entries.append({
            "record_id": record.id,
            "strategy": config.strategy,
            "token_count": short.token_count,
            "units": [
                {"unit_index": u.unit_index, "origin": u.origin,
                 "score": u.score, "text": u.text}
                for u in short.units
            ],
        })
    runs.write_jsonl(run_dir / "shortened.jsonl", entries)
    manifest.update({"finished_at": runs.utc_now(), "status": "complete",
                     "failure_count": len(failures), "failures": failures})
    runs.write_manifest(run_dir, manifest)
    return RunResult(run_dir=run_dir, failures=failures)


def run_judge(config: PipelineConfig, run_a: str | Path, run_b: str | Path) -> Path:
    """Pairwise judging of two runs' answers over their common records.

    Writes ``judge_report.json`` plus a verbatim ``judge.log`` into a new
    run directory. Identical answers are flagged as input ties and kept
    out of the win percentages.
    """
    answers_a = {row["record_id"]: row for row in runs.read_jsonl(Path(run_a) / "answers.jsonl")}
    answers_b = {row["record_id"]: row for row in runs.read_jsonl(Path(run_b) / "answers.jsonl")}
    common = sorted(answers_a.keys() & answers_b.keys())
    if not common:
        raise metrics.NoCommonIds()

    run_id = config.run_id or f"judge-{Path(run_a).name}-vs-{Path(run_b).name}"
    run_dir = runs.create_run_dir(config.out, run_id)
    manifest = {
        "run_id": run_id,
        "config": config.as_dict(),
        "config_hash": runs.config_hash(config.as_dict()),
        "run_a": str(run_a),
        "run_b": str(run_b),
        "judge_model": config.judge_model,
        "started_at": runs.utc_now(),
        "status": "running",
    }
    runs.write_manifest(run_dir, manifest)

    backend = make_backend(config)
    cache = scorer_mod.RequestCache(run_dir / "cache")
    telemetry = Telemetry()

    wins: dict[str, int] = {}
    ties = 0
    unparseable = 0
    log_lines = []
    for item_index, record_id in enumerate(common):
        entry_a, entry_b = answers_a[record_id], answers_b[record_id]
        try:
            verdict = genclient.judge(
                question=entry_a["question"],
                ground_truth=entry_a["silver_answer"],
                answer_x=entry_a["answer"],
                answer_y=entry_b["answer"],
                item_index=item_index,
                backend=backend,
                model_id=config.judge_model,
                source_x=entry_a["strategy"],
                source_y=entry_b["strategy"],
                cache=cache,
                telemetry=telemetry,
                seed=config.seed,
            )
        except genclient.UnparseableVerdict as exc:
            unparseable += 1
            log_lines.append(json.dumps({
                "record_id": record_id, "item_index": item_index,
                "raw_reply": exc.raw_reply, "verdict": "unparseable",
            }, ensure_ascii=False, sort_keys=True))
            continue
        log_lines.append(json.dumps({
            "record_id": record_id, "item_index": item_index,
            "option1_source": verdict.option1_source,
            "option2_source": verdict.option2_source,
            "raw_reply": verdict.raw_reply,
            "winner": verdict.winner,
            "winner_source": verdict.winner_source,
            "tie_inputs": verdict.tie_inputs,
        }, ensure_ascii=False, sort_keys=True))
        if verdict.tie_inputs:
            ties += 1
            continue
        wins[verdict.winner_source] = wins.get(verdict.winner_source, 0) + 1

    compared = sum(wins.values())
    win_pct = {src: 100.0 * n / compared for src, n in wins.items()} if compared else {}
    report = {
        "total": len(common),
        "compared": compared,
        "ties": ties,
        "unparseable": unparseable,
        "all_ties": ties == len(common) and len(common) > 0,
        "wins": wins,
        "win_pct": win_pct,
    }
    runs.atomic_write_text(run_dir / "judge.log", "".join(l + "\n" for l in log_lines))
    runs.atomic_write_json(run_dir / "judge_report.json", report)
    manifest.update({"finished_at": runs.utc_now(), "status": "complete",
                     "latency": telemetry.stats()})
    runs.write_manifest(run_dir, manifest)
    return run_dir


def run_explain(config: PipelineConfig, run: str | Path) -> Path:
    """Rationales for each (question, selected unit) pair of a finished run.

    Writes ``rationales.jsonl``, ``coverage.csv``, and ``trend.json``
    into the source run directory.
    """
    run_dir = Path(run)
    answers = runs.read_jsonl(run_dir / "answers.jsonl")
    records = load_records(config)
    backend = make_backend(config, records)
    cache = scorer_mod.RequestCache(run_dir / "cache")
    kind = SCORER_NAMES[config.scorer]
    model_id = config.embed_model if kind == "embed" else "aps"
    pair_scorer = scorer_mod.make_pair_scorer(kind, backend, model_id, cache)

    pairs = []
    for entry in answers:
        for unit in entry["selected_units"]:
            pairs.append((entry["record_id"], entry["question"],
                          unit["unit_index"], unit["text"]))
    if config.explain_max_pairs is not None:
        pairs = pairs[: config.explain_max_pairs]

    rationales = []
    rationale_rows = []
    for record_id, question, unit_index, text in pairs:
        if config.explain_method == "shapley":
            rationale = explain.shapley_rationale(
                question, text, pair_scorer,
                n_permutations=config.explain_permutations, seed=config.seed)
        else:
            rationale = explain.surrogate_rationale(
                question, text, pair_scorer,
                n_samples=config.explain_samples, seed=config.seed)
        rationales.append(rationale)
        rationale_rows.append({
            "record_id": record_id,
            "unit_index": unit_index,
            "method": rationale.method,
            "seed": rationale.seed,
            "logit": rationale.logit,
            "tokens": list(rationale.tokens),
            "relevances": list(rationale.relevances),
        })

    runs.write_jsonl(run_dir / "rationales.jsonl", rationale_rows)
    matrix = explain.coverage_matrix(rationales)
    runs.atomic_write_text(run_dir / "coverage.csv", coverage_to_csv_text(matrix))
    try:
        trend = explain.coverage_trend_check(matrix)
        trend_obj = {repr(t): ok for t, ok in sorted(trend.items())}
    except explain.TooFewBuckets as exc:
        trend_obj = {"error": str(exc)}
    runs.atomic_write_json(run_dir / "trend.json", trend_obj)
    return run_dir


def coverage_to_csv_text(matrix: explain.CoverageMatrix) -> str:
    header = ["bucket", "count"] + [repr(t) for t in matrix.thresholds]
    lines = [",".join(header)]
    for i, low in enumerate(matrix.bucket_lows):
        high = low + 10
        label = f"{low}-{high}"
        cells = matrix.cells[i]
        rendered = ["" if c is None else repr(c) for c in cells]
        lines.append(",".join([label, str(matrix.counts[i])] + rendered))
    return "\n".join(lines) + "\n"


def load_rows_csv(run: str | Path) -> list[metrics.EvalRow]:
    """Read a run's rows.csv back into EvalRow objects.

    Only F1 values are stored per ROUGE metric, so precision/recall come
    back as NaN; the derived reports (superiority, best-k profile) use
    F1 and the semantic scores only.
    """
    path = Path(run)
    if path.is_dir():
        path = path / "rows.csv"
    nan = float("nan")
    rows = []
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != list(CSV_COLUMNS):
            raise ConfigError(f"{path}: unexpected rows.csv header")
        for line in fh:
            if not line.strip():
                continue
            values = line.rstrip("\n").split(",")
            record_id, strategy, category = values[:3]
            r1, r2, r3, rl, bert, c_use, c_labse, c_laser, sts = map(float, values[3:])
            rows.append(metrics.EvalRow(
                record_id=record_id,
                strategy=strategy,
                category=category,
                rouge=metrics.RougeScores(
                    r1=metrics.PRF(nan, nan, r1),
                    r2=metrics.PRF(nan, nan, r2),
                    r3=metrics.PRF(nan, nan, r3),
                    rl=metrics.PRF(nan, nan, rl),
                ),
                semantic=metrics.SemanticScores(
                    bertscore_f1=bert, cos_use=c_use, cos_labse=c_labse,
                    cos_laser=c_laser, sts_mute=sts,
                ),
                answer_text="",
            ))
    return rows


def common_superiority_report(run_a: str | Path, run_b: str | Path) -> dict:
    """Share of common records where run A strictly beats run B."""
    pct_sts, pct_rouge = metrics.common_superiority(
        load_rows_csv(run_a), load_rows_csv(run_b))
    return {
        "pct_sts_mute": pct_sts,
        "pct_rouge": pct_rouge,
        "formatted": {
            "sts_mute": metrics.format_percent(pct_sts),
            "rouge": metrics.format_percent(pct_rouge),
        },
    }


def best_k_report(run: str | Path, k: int = 100,
                  second_run: str | Path | None = None) -> dict:
    """Category mix of all answers versus the k best-scoring ones.

    With ``second_run``, each category also carries the second run's
    best-k share, rendered as a ``total vs best (second)`` cell.
    """
    profile = metrics.best_k_category_profile(load_rows_csv(run), k)
    second_profile = (
        metrics.best_k_category_profile(load_rows_csv(second_run), k)
        if second_run is not None else {})
    categories = {}
    for category, share in sorted(profile.items()):
        second = second_profile.get(category)
        entry = {"total_pct": share.total_pct, "best_k_pct": share.best_k_pct}
        if second is not None:
            entry["second_best_k_pct"] = second.best_k_pct
        entry["cell"] = metrics.format_category_cell(
            share.total_pct, share.best_k_pct,
            second.best_k_pct if second is not None else None)
        categories[category] = entry
    return {"k": k, "categories": categories}


def coverage_from_rationales(path: str | Path) -> dict:
    """Recompute the coverage analysis from a rationales file.

    ``path`` may be a rationales.jsonl file (hand-written ones work too)
    or a run directory containing one.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "rationales.jsonl"
    matrix = explain.coverage_matrix(explain.load_rationales_jsonl(path))
    out: dict = {
        "bucket_lows": list(matrix.bucket_lows),
        "thresholds": list(matrix.thresholds),
        "counts": list(matrix.counts),
        "cells": [list(row) for row in matrix.cells],
    }
    try:
        trend = explain.coverage_trend_check(matrix)
        out["trend"] = {repr(t): ok for t, ok in sorted(trend.items())}
    except explain.TooFewBuckets as exc:
        out["trend"] = {"error": str(exc)}
    return out


def selection_overlap(run_a: str | Path, run_b: str | Path) -> dict:
    """Mean top-k selection overlap between two runs, plus the differed share."""
    units_a = _selected_units_by_id(run_a)
    units_b = _selected_units_by_id(run_b)
    common = sorted(units_a.keys() & units_b.keys())
    if not common:
        raise metrics.NoCommonIds()
    per_record = {}
    total = 0.0
    for rid in common:
        overlap = scorer_mod.overlap_fraction(units_a[rid], units_b[rid])
        per_record[rid] = overlap
        total += overlap
    mean_overlap = total / len(common)
    return {
        "record_count": len(common),
        "mean_overlap": mean_overlap,
        "mean_differed": 1.0 - mean_overlap,
        "per_record_overlap": per_record,
    }


def _selected_units_by_id(run: str | Path) -> dict[str, set[int]]:
    run_dir = Path(run)
    path = run_dir / "answers.jsonl"
    if not path.exists():
        path = run_dir / "shortened.jsonl"
    rows = runs.read_jsonl(path)
    out = {}
    for row in rows:
        units = row.get("selected_units") or row.get("units") or []
        out[row["record_id"]] = {u["unit_index"] for u in units}
    return out


def ingest_stats(config: PipelineConfig) -> dict:
    """Load, validate, and summarize a dataset (the ingest command)."""
    records = load_records(config)
    stats = corpus.corpus_stats(records)
    return {
        "record_count": stats.record_count,
        "mean_context_tokens": stats.mean_context_tokens,
        "long_context_fraction": stats.long_context_fraction,
        "per_language": stats.per_language,
        "splits": {
            split.value: sum(1 for r in records if r.split is split)
            for split in corpus.Split
        },
    }
