#!/usr/bin/env python3
"""Topic recovery and model selection on a synthetic corpus.

Generates a corpus from known topic-word distributions, then:
  1. sweeps the number of topics K and reports mean NPMI coherence — the
     planted K should be selected (ties break toward the smaller K);
  2. trains at the planted K and reports, per planted topic, the overlap
     between its true top keywords and the best greedily-matched learned
     topic's keywords.

Usage:
    python3 scripts/lda_recovery.py [--topics K] [--vocab V] [--docs D] [--seed N]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pacte import generate_synthetic_corpus, select_k, top_keywords, train_lda


def true_top_keywords(true_phi: np.ndarray, topic: int, m: int) -> set[int]:
    order = np.lexsort((np.arange(true_phi.shape[1]), -true_phi[topic]))
    return set(order[:m].tolist())


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--topics", type=int, default=4)
    parser.add_argument("--vocab", type=int, default=40)
    parser.add_argument("--docs", type=int, default=400)
    parser.add_argument("--doc-len", type=int, default=60)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--keywords", type=int, default=5)
    args = parser.parse_args()

    start = time.monotonic()
    corpus, vocabulary, true_phi, _ = generate_synthetic_corpus(
        n_topics=args.topics,
        vocab_size=args.vocab,
        n_docs=args.docs,
        doc_len=args.doc_len,
        seed=args.seed,
    )
    print(
        f"synthetic corpus: {len(corpus)} docs, vocab {len(vocabulary)}, "
        f"planted K={args.topics}"
    )

    # --- model selection sweep ----------------------------------------------
    k_grid = [k for k in range(2, args.topics + 4)]
    chosen, coherences = select_k(
        corpus, vocabulary, k_grid, iterations=200, seed=args.seed, m=args.keywords
    )
    print("\ncoherence by K:")
    for k in k_grid:
        marker = "  <- selected" if k == chosen else ""
        print(f"  K={k}: {coherences[k]:+.4f}{marker}")
    verdict = "matches" if chosen == args.topics else "differs from"
    print(f"selected K={chosen} {verdict} planted K={args.topics}")

    # --- keyword recovery at the planted K -----------------------------------
    model = train_lda(corpus, vocabulary, args.topics, iterations=500, seed=args.seed)
    learned_tops = {
        t: set(vocabulary.index(tok) for tok in top_keywords(model, t, args.keywords).tokens)
        for t in range(args.topics)
    }
    remaining = set(range(args.topics))
    print(f"\ntop-{args.keywords} keyword recovery (greedy matching):")
    overlaps = []
    for true_topic in range(args.topics):
        truth = true_top_keywords(true_phi, true_topic, args.keywords)
        best = max(remaining, key=lambda t: len(learned_tops[t] & truth))
        remaining.discard(best)
        overlap = len(learned_tops[best] & truth) / args.keywords
        overlaps.append(overlap)
        truth_words = ", ".join(sorted(vocabulary.tokens[i] for i in truth))
        print(f"  planted topic {true_topic} -> learned topic {best}: "
              f"overlap {overlap:.2f}  (true keywords: {truth_words})")
    print(f"\nmean overlap: {sum(overlaps) / len(overlaps):.2f}")
    print(f"elapsed: {time.monotonic() - start:.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
