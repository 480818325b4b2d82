"""Leave-out estimator of partisanship from token frequency profiles.

For each document the posterior that a token came from the right-leaning party is
estimated from party mean frequencies, excluding the document itself from its own
party's mean. The topic score pi averages, per side, each document's frequency-
weighted posterior mass on its own party; 0.5 means indistinguishable sides.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, Document, Side
from .topics import LdaModel, top_documents


@dataclass
class TokenFrequencyVector:
    """Normalized counts of a document's tokens over a restricted vocabulary."""

    doc_id: str
    values: dict[str, float]


@dataclass
class LeaveOutResult:
    topic_id: int | None
    pi: float
    posteriors: dict[str, float]  # doc id -> own-party posterior mass


def token_frequency(doc: Document, vocabulary: Sequence[str] | set[str]) -> TokenFrequencyVector:
    allowed = set(vocabulary)
    counts = Counter(t for t in doc.tokens if t in allowed)
    if not counts:
        raise ValueError(
            f"document {doc.id!r} has no tokens in the restricted vocabulary"
        )
    total = sum(counts.values())
    return TokenFrequencyVector(
        doc_id=doc.id, values={t: c / total for t, c in sorted(counts.items())}
    )


def leave_out_estimator(
    left: Sequence[TokenFrequencyVector],
    right: Sequence[TokenFrequencyVector],
    topic_id: int | None = None,
) -> LeaveOutResult:
    """pi = 0.5 * (mean over left docs of q_i . (1 - rho_{-i})
                 + mean over right docs of q_i . rho_{-i})

    where rho_{-i}(w) = qR(w) / (qR(w) + qL(w)) with the held-out document removed
    from its own party's mean; 0/0 cells fall back to 0.5.
    """
    if len(left) < 2 or len(right) < 2:
        raise ValueError(
            f"need at least 2 documents per side, got {len(left)} left and {len(right)} right"
        )
    vocab = sorted({w for vec in (*left, *right) for w in vec.values})
    index = {w: i for i, w in enumerate(vocab)}

    def matrix(vectors: Sequence[TokenFrequencyVector]) -> np.ndarray:
        mat = np.zeros((len(vectors), len(vocab)))
        for r, vec in enumerate(vectors):
            for w, value in vec.values.items():
                mat[r, index[w]] = value
        return mat

    lmat, rmat = matrix(left), matrix(right)
    lmean, rmean = lmat.mean(axis=0), rmat.mean(axis=0)
    posteriors: dict[str, float] = {}

    def own_party_mass(mat: np.ndarray, own_mean: np.ndarray, other_mean: np.ndarray, own_is_right: bool) -> float:
        n = mat.shape[0]
        acc = 0.0
        for i in range(n):
            held_out_mean = np.maximum(own_mean * n - mat[i], 0.0) / (n - 1)
            if own_is_right:
                num, denom = held_out_mean, held_out_mean + other_mean
            else:
                num, denom = other_mean, other_mean + held_out_mean
            rho = np.divide(num, denom, out=np.full_like(denom, 0.5), where=denom > 0)
            own = rho if own_is_right else 1.0 - rho
            value = float(mat[i] @ own)
            doc_id = (right if own_is_right else left)[i].doc_id
            posteriors[doc_id] = value
            acc += value
        return acc / n

    left_mass = own_party_mass(lmat, lmean, rmean, own_is_right=False)
    right_mass = own_party_mass(rmat, rmean, lmean, own_is_right=True)
    # pi is a convex combination of values in [0, 1]; clamp away dot-product
    # rounding dust so downstream scores stay in range.
    pi = min(1.0, max(0.0, 0.5 * (left_mass + right_mass)))
    return LeaveOutResult(topic_id=topic_id, pi=pi, posteriors=posteriors)


def topic_leave_out(
    model: LdaModel, corpus: Corpus, topic_id: int, n: int = 10
) -> LeaveOutResult:
    """Score one topic on the pooled top-n documents per side.

    The restricted vocabulary is the union of tokens across the pooled documents.
    """
    sides = {}
    for side in (Side.LIBERAL, Side.CONSERVATIVE):
        ranked = top_documents(model, corpus, side, topic_id, n)
        sides[side] = [corpus.get(doc_id) for doc_id in ranked.doc_ids]
    vocab = {t for docs in sides.values() for doc in docs for t in doc.tokens}
    vectors = {
        side: [token_frequency(doc, vocab) for doc in docs] for side, docs in sides.items()
    }
    return leave_out_estimator(
        vectors[Side.LIBERAL], vectors[Side.CONSERVATIVE], topic_id=topic_id
    )
