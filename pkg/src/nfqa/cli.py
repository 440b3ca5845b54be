"""Command-line entry point.

Subcommands mirror the pipeline stages: ``ingest``, ``shorten``, ``run``,
``judge``, ``explain``, ``report``. Options can come from a JSON config
file (``--config``); flags given on the command line win over the file.
Exit codes: 0 success, 1 configuration or dataset error, 2 run finished
with per-record backend failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import metrics, pipeline, runs
from .pipeline import ConfigError, PipelineConfig


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--dataset", help="JSONL dataset path")
    parser.add_argument("--triples", help="JSONL OIE triples annotation file")
    parser.add_argument("--coref", help="JSONL coreference annotation file")
    parser.add_argument("--strategy", choices=("B", "A1", "A2", "A3", "A4"))
    parser.add_argument("--scorer", choices=("aps", "bm25", "embed"))
    parser.add_argument("--top-k", type=int, dest="top_k")
    parser.add_argument("--backend", choices=("mock", "shim"))
    parser.add_argument("--backend-url", dest="backend_url")
    parser.add_argument("--mock-config", dest="mock_config")
    parser.add_argument("--model")
    parser.add_argument("--judge-model", dest="judge_model")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--max-new-tokens", type=int, dest="max_new_tokens")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mean-mode", choices=("arithmetic", "harmonic"), dest="mean_mode")
    parser.add_argument("--stopword-dir", dest="stopword_dir",
                        help="directory of <language>.txt stopword lists (token metrics only)")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out")
    parser.add_argument("--run-id", dest="run_id")
    parser.add_argument("--explain-method", choices=("surrogate", "shapley"),
                        dest="explain_method")
    parser.add_argument("--explain-samples", type=int, dest="explain_samples")
    parser.add_argument("--explain-permutations", type=int, dest="explain_permutations")
    parser.add_argument("--explain-max-pairs", type=int, dest="explain_max_pairs")


def build_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(pipeline.load_config_file(args.config))
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    return PipelineConfig(**values)


def _print_json(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2))


def cmd_ingest(args) -> int:
    config = build_config(args)
    stats = pipeline.ingest_stats(config)
    if args.out:
        runs.atomic_write_json(Path(args.out) / "ingest_stats.json", stats)
    _print_json(stats)
    return 0


def cmd_shorten(args) -> int:
    config = build_config(args)
    result = pipeline.shorten_only(config)
    print(f"wrote {result.run_dir / 'shortened.jsonl'}")
    if result.failures:
        print(f"{len(result.failures)} records failed", file=sys.stderr)
    return result.exit_code


def cmd_run(args) -> int:
    config = build_config(args)
    result = pipeline.run_pipeline(config)
    print(f"run directory: {result.run_dir}")
    if result.failures:
        print(f"{len(result.failures)} records failed", file=sys.stderr)
    return result.exit_code


def cmd_judge(args) -> int:
    config = build_config(args)
    run_dir = pipeline.run_judge(config, args.run_a, args.run_b)
    with (run_dir / "judge_report.json").open(encoding="utf-8") as fh:
        _print_json(json.load(fh))
    return 0


def cmd_explain(args) -> int:
    config = build_config(args)
    run_dir = pipeline.run_explain(config, args.run)
    print(f"rationales written to {run_dir}")
    return 0


def cmd_report(args) -> int:
    if args.overlap:
        result = pipeline.selection_overlap(args.overlap[0], args.overlap[1])
        _print_json(result)
        return 0
    if args.improvement:
        report_a = _load_report_metrics(args.improvement[0])
        report_b = _load_report_metrics(args.improvement[1])
        imp = metrics.improvement(report_a, report_b)
        _print_json({
            "per_metric_pct": imp.per_metric_pct,
            "semantic_avg_pct": imp.semantic_avg_pct,
            "token_avg_pct": imp.token_avg_pct,
        })
        return 0
    if args.coverage:
        _print_json(pipeline.coverage_from_rationales(args.coverage))
        return 0
    if args.common:
        _print_json(pipeline.common_superiority_report(args.common[0], args.common[1]))
        return 0
    if args.best_k:
        _print_json(pipeline.best_k_report(args.best_k, args.k, args.best_k_second))
        return 0
    raise ConfigError(
        "report needs --overlap, --improvement, --coverage, --common, or --best-k")


def _load_report_metrics(run: str) -> dict:
    with (Path(run) / "report.json").open(encoding="utf-8") as fh:
        report = json.load(fh)
    strategies = report.get("strategies", {})
    if len(strategies) != 1:
        raise ConfigError(
            f"{run}: expected a single-strategy report, found {sorted(strategies)}")
    return next(iter(strategies.values()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfqa",
        description="Long-context QA pipeline: shorten contexts, generate, evaluate, explain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and print corpus statistics")
    _add_common(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("shorten", help="run only the context-shortening stage")
    _add_common(p)
    p.set_defaults(fn=cmd_shorten)

    p = sub.add_parser("run", help="full pipeline: shorten, generate, evaluate")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("judge", help="pairwise judging of two runs' answers")
    _add_common(p)
    p.add_argument("--run-a", required=True, dest="run_a")
    p.add_argument("--run-b", required=True, dest="run_b")
    p.set_defaults(fn=cmd_judge)

    p = sub.add_parser("explain", help="token rationales for a run's selections")
    _add_common(p)
    p.add_argument("--run", required=True)
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("report", help="derived reports over finished runs")
    p.add_argument("--overlap", nargs=2, metavar=("RUN_A", "RUN_B"),
                   help="selection overlap between two runs")
    p.add_argument("--improvement", nargs=2, metavar=("RUN_A", "RUN_B"),
                   help="per-metric percentage change of run A over run B")
    p.add_argument("--coverage", metavar="RATIONALES",
                   help="coverage matrix from a rationales.jsonl file or run dir")
    p.add_argument("--common", nargs=2, metavar=("RUN_A", "RUN_B"),
                   help="share of common records where run A strictly beats run B")
    p.add_argument("--best-k", dest="best_k", metavar="RUN",
                   help="category profile of the k best-scoring answers")
    p.add_argument("--best-k-second", dest="best_k_second", metavar="RUN",
                   help="second run whose best-k share is added in parentheses")
    p.add_argument("-k", type=int, default=100, help="k for --best-k (default 100)")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, runs.RunExists, metrics.MetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
