#!/usr/bin/env python3
"""End-to-end demo on a small synthetic two-outlet news corpus.

Builds a corpus with three token families — immigration coverage framed
differently by each outlet, plus market and weather coverage shared by both —
then runs the full pipeline twice:

  1. up to the topic model, to discover which learned topic captures which
     family (topic ids depend on the sampler, so annotations are written
     against the learned ids);
  2. to completion, producing rankings, leave-out scores, recall against the
     synthetic annotations, and the report artifacts.

The polarized immigration topic should rank first for the finetuned variant.

Usage:
    python3 scripts/run_demo.py [--outdir DIR] [--seed N] [--variant NAME]
"""

from __future__ import annotations

import argparse
import json
import random
import shutil
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pacte import PipelineConfig, run_pipeline

LEFT_OUTLET = "Metro Ledger"
RIGHT_OUTLET = "Valley Sentinel"

FAMILIES = {
    "immigration": ["border", "migrant", "asylum", "visa"],
    "markets": ["market", "stocks", "earnings", "trade"],
    "weather": ["rain", "storm", "forecast", "temperature"],
}
# Context words: the immigration family is framed differently per outlet; the
# other two families read the same on both sides.
CONTEXT = {
    "immigration": {
        LEFT_OUTLET: ["sanctuary", "rights", "families"],
        RIGHT_OUTLET: ["wall", "illegal", "crackdown"],
    },
    "markets": {
        LEFT_OUTLET: ["profit", "index", "quarterly"],
        RIGHT_OUTLET: ["profit", "index", "quarterly"],
    },
    "weather": {
        LEFT_OUTLET: ["weekend", "coastal", "inland"],
        RIGHT_OUTLET: ["weekend", "coastal", "inland"],
    },
}
DOCS_PER_FAMILY = 12  # per outlet


def build_corpus(path: Path, seed: int) -> None:
    rng = random.Random(seed)
    records = []
    doc_id = 0
    for outlet in (LEFT_OUTLET, RIGHT_OUTLET):
        for family, core in FAMILIES.items():
            for i in range(DOCS_PER_FAMILY):
                words = []
                for r, word in enumerate(core):
                    words.extend([word] * (2 + (i + r) % 3))
                words.extend(CONTEXT[family][outlet] * 2)
                rng.shuffle(words)
                records.append(
                    {
                        "id": f"doc{doc_id:04d}",
                        "source": outlet,
                        "date": f"2021-{(i % 12) + 1:02d}-{(doc_id % 27) + 1:02d}",
                        "text": " ".join(words),
                    }
                )
                doc_id += 1
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def family_of_topic(keywords: dict[str, list]) -> dict[int, str]:
    """Map each learned topic id to the family whose core words it captures best."""
    assignment = {}
    for topic_id, entries in keywords.items():
        top_tokens = {token for _, token in entries}
        best = max(FAMILIES, key=lambda fam: len(top_tokens & set(FAMILIES[fam])))
        assignment[int(topic_id)] = best
    return assignment


def write_annotations(path: Path, topic_families: dict[int, str]) -> None:
    """Synthetic annotator labels: immigration docs split cleanly by outlet,
    the shared families get mixed labels (no leaning)."""

    def doc(doc_id, source, labels):
        return {"doc_id": doc_id, "source": source, "labels": list(labels), "resolution": None}

    topics = []
    for topic_id, family in sorted(topic_families.items()):
        if family == "immigration":
            docs = [
                doc(f"t{topic_id}a", LEFT_OUTLET, (1, 1, 1)),
                doc(f"t{topic_id}b", LEFT_OUTLET, (1, 1, 0)),
                doc(f"t{topic_id}c", RIGHT_OUTLET, (0, 0, 0)),
                doc(f"t{topic_id}d", RIGHT_OUTLET, (0, 0, 1)),
            ]
        else:
            docs = [
                doc(f"t{topic_id}a", LEFT_OUTLET, (1, 0, 1)),
                doc(f"t{topic_id}b", LEFT_OUTLET, (0, 1, 0)),
                doc(f"t{topic_id}c", RIGHT_OUTLET, (1, 0, 1)),
                doc(f"t{topic_id}d", RIGHT_OUTLET, (0, 1, 0)),
            ]
        topics.append({"id": topic_id, "stance0": "against", "stance1": "for", "docs": docs})
    path.write_text(json.dumps({"topics": topics}, indent=2), encoding="utf-8")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--outdir", type=Path, default=Path("demo_run"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--variant",
        default="PaCTE",
        choices=["PaCTE", "NoFinetune", "ShuffledLabels", "DocEmbedding"],
    )
    parser.add_argument("--force", action="store_true", help="wipe the output directory first")
    args = parser.parse_args()

    if args.force and args.outdir.exists():
        shutil.rmtree(args.outdir)
    args.outdir.mkdir(parents=True, exist_ok=True)
    corpus_path = args.outdir / "corpus.jsonl"
    build_corpus(corpus_path, args.seed)
    print(f"corpus: {corpus_path} ({DOCS_PER_FAMILY * len(FAMILIES) * 2} documents)")

    config = PipelineConfig.from_dict(
        {
            "corpus_path": str(corpus_path),
            "workdir": str(args.outdir / "work"),
            "source_map": {LEFT_OUTLET: "Liberal", RIGHT_OUTLET: "Conservative"},
            "bigrams": False,
            "n_topics": 3,
            "lda_iterations": 120,
            "seed": args.seed,
            "m_keywords": 6,
            "n_docs": 8,
            "d_model": 16,
            "n_heads": 2,
            "n_layers": 1,
            "ffn_dim": 32,
            "max_len": 32,
            "learning_rate": 5e-3,
            "epochs": 6,
            "batch_size": 8,
            "variant": args.variant,
            "pairs": [[LEFT_OUTLET, RIGHT_OUTLET]],
            "recall_k": 1,
        }
    )

    # Pass 1: learn topics so annotations can reference the learned ids.
    run_pipeline(config, until="lda")
    keywords = json.loads(
        (Path(config.workdir) / "lda" / "keywords.json").read_text(encoding="utf-8")
    )
    topic_families = family_of_topic(keywords)
    print("\nlearned topics:")
    for topic_id in sorted(topic_families):
        words = ", ".join(token for _, token in keywords[str(topic_id)])
        print(f"  topic {topic_id} ({topic_families[topic_id]:>11}): {words}")

    annotations_path = args.outdir / "annotations.json"
    write_annotations(annotations_path, topic_families)
    config = replace(config, annotations_path=str(annotations_path))

    # Pass 2: full pipeline (topic stages are served from cache).
    result = run_pipeline(config)
    print("\nstage statuses:")
    for stage, status in result.statuses.items():
        print(f"  {stage:>10}: {status}")

    report = json.loads(result.report_path.read_text(encoding="utf-8"))
    slug = next(iter(report["rankings"]))
    ranking = report["rankings"][slug]
    beta_by_topic = {row["topic"]: row["beta"] for row in ranking["scores"]}
    print(f"\n{config.variant} ranking for {ranking['pair'][0]} vs {ranking['pair'][1]}:")
    for position, topic_id in enumerate(ranking["ranking"], start=1):
        family = topic_families[topic_id]
        print(f"  {position}. topic {topic_id} ({family:>11})  beta={beta_by_topic[topic_id]:.4f}")
    loe = report["loe"][slug]
    print("\nleave-out estimates:")
    for topic_id in sorted(topic_families):
        print(f"  topic {topic_id}: pi={loe['pi'][str(topic_id)]:.4f}")
    recall = report["recall"]["pairs"][slug]
    print(f"\nground truth ranking (by annotation polarization): {recall['gt_ranking']}")
    print(f"recall@{report['recall']['k']}: "
          f"{config.variant}={recall[config.variant]:.2f}  LOE={recall['LOE']:.2f}")
    print(f"\nreport: {result.report_path}")
    print(f"markdown: {Path(config.workdir) / 'report' / 'report.md'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
