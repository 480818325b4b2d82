#!/usr/bin/env python3
"""Variant comparison on a planted corpus with one side-framed topic.

Constructs a corpus where topic A's words appear in contexts that differ by
side (liberal docs frame them one way, conservative docs another) while topic
B's words appear in contexts shared by both sides. A useful polarization
ranker should score topic A well above topic B.

For each variant the encoder is finetuned with that variant's label mode and
the polarization score beta = (1 - cos)/2 is computed per topic, over several
seeds. Expected outcome: the finetuned variant separates A from B cleanly;
removing finetuning or shuffling the labels collapses or degrades the gap;
the pooled-document variant scores both topics identically (its topic
embedding ignores the topic).

Usage:
    python3 scripts/planted_polarization.py [--seeds N] [--docs-per-cell N]
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pacte import (
    Corpus,
    Document,
    EncoderConfig,
    Side,
    TrainConfig,
    VariantMode,
    build_vocabulary,
    encode_corpus,
    run_variant,
    top_keywords,
    train_lda,
    train_partisanship,
)

TOPIC_A = ("asylum", "border", "migrant", "visa")
TOPIC_B = ("market", "stocks", "earnings", "trade")
LIB_CTX = ("sanctuary", "rights", "families")
CON_CTX = ("wall", "illegal", "crackdown")
SHARED_CTX = ("profit", "index", "quarterly")


def planted_corpus(seed: int, docs_per_cell: int) -> Corpus:
    rng = np.random.default_rng(seed)
    documents = []
    i = 0
    for side, a_ctx in ((Side.LIBERAL, LIB_CTX), (Side.CONSERVATIVE, CON_CTX)):
        for topic_words, ctx in ((TOPIC_A, a_ctx), (TOPIC_B, SHARED_CTX)):
            for _ in range(docs_per_cell):
                words = list(rng.choice(topic_words, size=5)) + list(rng.choice(ctx, size=4))
                rng.shuffle(words)
                documents.append(
                    Document(
                        id=f"p{i:04d}",
                        source="L" if side is Side.LIBERAL else "R",
                        side=side,
                        date="2020-01-01",
                        raw_text=" ".join(words),
                        tokens=words,
                    )
                )
                i += 1
    return Corpus(documents)


def run_seed(seed: int, docs_per_cell: int) -> dict[str, tuple[float, float]] | None:
    """Return {variant: (beta_A, beta_B)} for one seed, or None if LDA failed
    to separate the two planted topics."""
    corpus = planted_corpus(seed, docs_per_cell)
    vocabulary = build_vocabulary(corpus)
    lda = train_lda(corpus, vocabulary, 2, iterations=100, seed=seed)
    keyword_sets = {t: set(top_keywords(lda, t, 6).tokens) for t in (0, 1)}
    a_learned = max((0, 1), key=lambda t: len(keyword_sets[t] & set(TOPIC_A)))
    b_learned = 1 - a_learned
    if (
        len(keyword_sets[a_learned] & set(TOPIC_A)) < 3
        or len(keyword_sets[b_learned] & set(TOPIC_B)) < 3
    ):
        return None

    encoder_config = EncoderConfig(
        vocab_size=len(vocabulary), d_model=16, n_heads=2, n_layers=1,
        ffn_dim=32, max_len=16,
    )
    out: dict[str, tuple[float, float]] = {}
    encodings_by_label_mode: dict[str, dict] = {}
    for mode in VariantMode:
        # Variants that share a label mode share the trained encoder.
        if mode.label_mode not in encodings_by_label_mode:
            train_config = TrainConfig(
                learning_rate=5e-3, weight_decay=5e-4, batch_size=16,
                epochs=10, seed=seed, label_mode=mode.label_mode,
            )
            model, _ = train_partisanship(
                encoder_config, corpus, Corpus([]), train_config, vocabulary
            )
            encodings_by_label_mode[mode.label_mode] = encode_corpus(model, corpus)
        encodings = encodings_by_label_mode[mode.label_mode]
        ranking = run_variant(mode, corpus, lda, encodings, pair=("L", "R"), m=6, n=10)
        betas = {s.topic_id: s.beta for s in ranking.scores}
        out[mode.value] = (betas[a_learned], betas[b_learned])
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--docs-per-cell", type=int, default=20)
    args = parser.parse_args()

    start = time.monotonic()
    per_variant: dict[str, list[tuple[float, float]]] = {m.value: [] for m in VariantMode}
    skipped = 0
    for seed in range(args.seeds):
        result = run_seed(seed, args.docs_per_cell)
        if result is None:
            skipped += 1
            print(f"seed {seed}: topic model did not separate the planted topics; skipped")
            continue
        for variant, betas in result.items():
            per_variant[variant].append(betas)
        row = "  ".join(
            f"{variant}: A={a:.3f} B={b:.3f}" for variant, (a, b) in sorted(result.items())
        )
        print(f"seed {seed}: {row}")

    print(f"\n{'variant':>15} | {'beta(A) mean±sd':>17} | {'beta(B) mean±sd':>17} | A ranked first")
    print("-" * 75)
    for variant, rows in per_variant.items():
        if not rows:
            continue
        a_vals = [a for a, _ in rows]
        b_vals = [b for _, b in rows]
        wins = sum(a > b for a, b in rows)
        a_sd = statistics.stdev(a_vals) if len(a_vals) > 1 else 0.0
        b_sd = statistics.stdev(b_vals) if len(b_vals) > 1 else 0.0
        print(
            f"{variant:>15} | {statistics.mean(a_vals):.3f} ± {a_sd:.3f}     "
            f"| {statistics.mean(b_vals):.3f} ± {b_sd:.3f}     "
            f"| {wins}/{len(rows)}"
        )
    if skipped:
        print(f"\n({skipped} seed(s) skipped for unseparated topic models)")
    print(f"\nelapsed: {time.monotonic() - start:.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
