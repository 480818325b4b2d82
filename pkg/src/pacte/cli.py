"""Command-line entry point.

Every subcommand takes a JSON config (--config) whose fields mirror
PipelineConfig; flags override config values, and PACTE_WORKDIR overrides the
configured workdir unless --workdir is given. Stages are cached by content
hash, so repeated invocations only recompute what changed.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path

from .pipeline import PipelineConfig, run_pipeline
from .topics import select_k

_STAGE_OF = {
    "preprocess": "preprocess",
    "select-k": "selectk",
    "lda": "lda",
    "train": "train",
    "embed": "embed",
    "rank": "rank",
    "loe": "loe",
    "eval": "eval",
    "report": "report",
    "pipeline": "report",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", required=True, help="JSON config file")
    parser.add_argument("--workdir", help="override the configured workdir")
    parser.add_argument("--corpus", dest="corpus_path", help="override corpus_path")
    parser.add_argument("--annotations", dest="annotations_path", help="override annotations_path")
    parser.add_argument("--seed", type=int, help="override the seed")
    parser.add_argument("--variant", help="PaCTE, NoFinetune, ShuffledLabels, or DocEmbedding")
    parser.add_argument("--n-topics", dest="n_topics", type=int, help="override n_topics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pacte", description="Rank polarized topics between partisan corpora"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("preprocess", "ingest, normalize, fit bigrams, build the vocabulary"),
        ("lda", "train the topic model (runs model selection if n_topics is unset)"),
        ("select-k", "score the coherence of each K in k_grid"),
        ("train", "finetune the encoder on partisanship labels"),
        ("embed", "encode the top documents into an embedding store"),
        ("rank", "score and rank topics by polarization"),
        ("loe", "run the leave-out frequency baseline"),
        ("eval", "compute recall against annotated ground truth"),
        ("report", "write report.json, report.md and pca.csv"),
        ("pipeline", "run everything end to end"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        _add_common(cmd)
        if name == "preprocess":
            cmd.add_argument(
                "--export-tokens",
                metavar="PATH",
                help="also copy the processed tokens JSONL to this path",
            )
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        key: getattr(args, key)
        for key in ("corpus_path", "annotations_path", "seed", "variant", "n_topics")
        if getattr(args, key, None) is not None
    }
    workdir = args.workdir or os.environ.get("PACTE_WORKDIR")
    if workdir:
        overrides["workdir"] = workdir
    return PipelineConfig.load(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "select-k":
            result = run_pipeline(config, until="preprocess")
            from .pipeline import _read_docs_jsonl, _read_vocab

            pre_dir = result.workdir / "preprocess"
            corpus = _read_docs_jsonl(pre_dir / "docs.jsonl")
            vocabulary = _read_vocab(pre_dir / "vocab.json")
            from .corpus import Corpus

            modeled = Corpus([d for d in corpus if any(t in vocabulary for t in d.tokens)])
            chosen, scores = select_k(
                modeled,
                vocabulary,
                config.k_grid,
                iterations=config.lda_iterations,
                seed=config.seed,
                m=config.m_keywords,
                alpha=config.lda_alpha,
                beta=config.lda_beta,
            )
            for k in sorted(scores):
                print(f"K={k}: coherence {scores[k]:.6f}")
            print(f"selected K={chosen}")
            return 0
        result = run_pipeline(config, until=_STAGE_OF[args.command])
        if args.command == "preprocess" and args.export_tokens:
            shutil.copyfile(result.workdir / "preprocess" / "tokens.jsonl", args.export_tokens)
            print(f"tokens written to {args.export_tokens}")
        for stage, status in result.statuses.items():
            print(f"{stage}: {status}")
        if result.report_path is not None:
            print(f"report: {result.report_path}")
        return 0
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
