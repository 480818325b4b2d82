"""Topic polarization scores from contextualized embeddings, plus PCA projection.

The score for a topic is beta = 0.5 * (1 - cos(left, right)) where each side's
corpus-contextualized (CC) topic embedding is a weighted mean of per-document
document-contextualized (DC) topic embeddings, themselves weighted means of
contextualized keyword vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, Side
from .store import ContextualEncoding
from .topics import LdaModel, TopicDocuments, TopicKeywords, top_documents, top_keywords

_ZERO_NORM = 1e-12


class VariantMode(Enum):
    PACTE = "PaCTE"
    NO_FINETUNE = "NoFinetune"
    SHUFFLED_LABELS = "ShuffledLabels"
    DOC_EMBEDDING = "DocEmbedding"

    @classmethod
    def parse(cls, value: "VariantMode | str") -> "VariantMode":
        if isinstance(value, VariantMode):
            return value
        for mode in cls:
            if value == mode.value:
                return mode
        raise ValueError(
            f"unknown variant {value!r}; expected one of {[m.value for m in cls]}"
        )

    @property
    def label_mode(self) -> str:
        # How the encoder must have been finetuned for this variant.
        if self is VariantMode.NO_FINETUNE:
            return "none"
        if self is VariantMode.SHUFFLED_LABELS:
            return "shuffled_labels"
        return "true_labels"


@dataclass
class DcTopicEmbedding:
    """A topic embedded in one document's context."""

    doc_id: str
    topic_id: int
    vector: np.ndarray
    used_keywords: tuple[str, ...]


@dataclass
class PolarizationScore:
    topic_id: int
    cosine: float
    beta: float


@dataclass
class TopicRanking:
    """Topics ordered most-polarized first (beta descending, ties by topic id)."""

    pair: tuple[str, str]
    variant: str
    scores: list[PolarizationScore]

    @property
    def topic_order(self) -> list[int]:
        return [s.topic_id for s in self.scores]


def dc_keyword_embedding(encoding: ContextualEncoding, keyword: str) -> np.ndarray | None:
    """Mean of the vectors at positions where the keyword occurs; None if absent."""
    rows = [i for i, token in enumerate(encoding.tokens) if token == keyword]
    if not rows:
        return None
    return np.asarray(encoding.token_vectors[rows], dtype=np.float64).mean(axis=0)


def dc_topic_embedding(
    encoding: ContextualEncoding, keywords: TopicKeywords
) -> DcTopicEmbedding | None:
    """Keyword-weighted mean over the keywords present in the document.

    Weights are renormalized over the present subset; None if no keyword occurs.
    """
    present: list[tuple[float, str, np.ndarray]] = []
    for weight, token in keywords.entries:
        vec = dc_keyword_embedding(encoding, token)
        if vec is not None:
            present.append((weight, token, vec))
    if not present:
        return None
    total = sum(w for w, _, _ in present)
    vector = np.zeros(encoding.dim, dtype=np.float64)
    for weight, _, vec in present:
        vector += (weight / total) * vec
    return DcTopicEmbedding(
        doc_id=encoding.doc_id,
        topic_id=keywords.topic_id,
        vector=vector,
        used_keywords=tuple(t for _, t, _ in present),
    )


def cc_topic_embedding(
    dc_embeddings: Sequence[DcTopicEmbedding | None], topic_docs: TopicDocuments
) -> np.ndarray:
    """Mixture-weighted mean of DC embeddings over a side's top documents.

    `dc_embeddings` aligns with `topic_docs.entries`; None entries (documents
    where the topic is unrepresented) are dropped and weights renormalized.
    """
    if len(dc_embeddings) != len(topic_docs.entries):
        raise ValueError(
            f"got {len(dc_embeddings)} DC embeddings for {len(topic_docs.entries)} documents"
        )
    kept: list[tuple[float, np.ndarray]] = [
        (weight, dc.vector)
        for (weight, _), dc in zip(topic_docs.entries, dc_embeddings)
        if dc is not None
    ]
    if not kept:
        raise ValueError(
            f"topic {topic_docs.topic_id} is unrepresentable for side "
            f"{topic_docs.side.value}: no top document contains its keywords"
        )
    total = sum(w for w, _ in kept)
    vector = np.zeros_like(kept[0][1])
    for weight, vec in kept:
        vector += (weight / total) * vec
    return vector


def polarization_score(topic_id: int, left: np.ndarray, right: np.ndarray) -> PolarizationScore:
    """beta = 0.5 * (1 - cosine), in [0, 1]; zero-norm inputs are an error."""
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape:
        raise ValueError(f"embedding shapes differ: {left.shape} vs {right.shape}")
    norm_l = float(np.linalg.norm(left))
    norm_r = float(np.linalg.norm(right))
    if norm_l < _ZERO_NORM or norm_r < _ZERO_NORM:
        raise ValueError(
            f"zero-norm embedding for topic {topic_id} (norms {norm_l:.3e}, {norm_r:.3e})"
        )
    cosine = float(np.dot(left, right) / (norm_l * norm_r))
    cosine = min(1.0, max(-1.0, cosine))
    return PolarizationScore(topic_id=topic_id, cosine=cosine, beta=0.5 * (1.0 - cosine))


def rank_topics(
    scores: Sequence[PolarizationScore],
    pair: tuple[str, str],
    variant: str = VariantMode.PACTE.value,
    exclude: Sequence[int] = (),
) -> TopicRanking:
    excluded = set(exclude)
    kept = [s for s in scores if s.topic_id not in excluded]
    kept.sort(key=lambda s: (-s.beta, s.topic_id))
    return TopicRanking(pair=tuple(pair), variant=variant, scores=kept)


def dc_embedding_for_mode(
    mode: VariantMode, encoding: ContextualEncoding, keywords: TopicKeywords
) -> DcTopicEmbedding | None:
    """DocEmbedding mode uses the pooled vector for every topic; others use keywords."""
    if mode is VariantMode.DOC_EMBEDDING:
        return DcTopicEmbedding(
            doc_id=encoding.doc_id,
            topic_id=keywords.topic_id,
            vector=np.asarray(encoding.pooled, dtype=np.float64).copy(),
            used_keywords=(),
        )
    return dc_topic_embedding(encoding, keywords)


def score_topic(
    mode: VariantMode,
    topic_id: int,
    model: LdaModel,
    corpus: Corpus,
    encodings: Mapping[str, ContextualEncoding],
    m: int = 10,
    n: int = 10,
) -> PolarizationScore:
    keywords = top_keywords(model, topic_id, m)
    sides = {}
    for side in (Side.LIBERAL, Side.CONSERVATIVE):
        docs = top_documents(model, corpus, side, topic_id, n)
        dcs = [dc_embedding_for_mode(mode, encodings[doc_id], keywords) for doc_id in docs.doc_ids]
        sides[side] = cc_topic_embedding(dcs, docs)
    return polarization_score(topic_id, sides[Side.LIBERAL], sides[Side.CONSERVATIVE])


def run_variant(
    mode: VariantMode | str,
    corpus: Corpus,
    model: LdaModel,
    encodings: Mapping[str, ContextualEncoding],
    pair: tuple[str, str],
    m: int = 10,
    n: int = 10,
    topic_ids: Sequence[int] | None = None,
    exclude: Sequence[int] = (),
) -> TopicRanking:
    """Score and rank topics for one left/right corpus pair.

    The encoder behind `encodings` must already match the variant (finetuned on
    true labels, shuffled labels, or left untrained); this function only controls
    how DC embeddings are formed.
    """
    mode = VariantMode.parse(mode)
    ids = list(topic_ids) if topic_ids is not None else list(range(model.n_topics))
    excluded = set(exclude)
    scores = [
        score_topic(mode, t, model, corpus, encodings, m=m, n=n)
        for t in ids
        if t not in excluded
    ]
    return rank_topics(scores, pair=pair, variant=mode.value)


def _orthogonal_unit(basis: list[np.ndarray], dim: int) -> np.ndarray:
    # Deterministic unit vector orthogonal to the given (orthonormal) basis.
    for i in range(dim):
        v = np.zeros(dim)
        v[i] = 1.0
        for b in basis:
            v -= (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            return v / norm
    raise ValueError("no orthogonal direction left; target_dim exceeds the rank")


def _fix_sign(v: np.ndarray) -> np.ndarray:
    for x in v:
        if abs(x) > _ZERO_NORM:
            return v if x > 0 else -v
    return v


def power_iteration_components(
    matrix: np.ndarray, n_components: int, tol: float = 1e-10, max_iter: int = 10000
) -> tuple[np.ndarray, np.ndarray]:
    """Leading eigenpairs of a symmetric PSD matrix by power iteration with deflation.

    Returns (eigenvalues, components) with components as rows, each sign-fixed so
    its first non-negligible entry is positive.
    """
    a = np.asarray(matrix, dtype=np.float64).copy()
    dim = a.shape[0]
    if a.shape != (dim, dim):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if not 1 <= n_components <= dim:
        raise ValueError(f"n_components must be in [1, {dim}], got {n_components}")
    values = np.zeros(n_components)
    components = np.zeros((n_components, dim))
    basis: list[np.ndarray] = []
    for j in range(n_components):
        v = np.ones(dim) / math.sqrt(dim)
        for b in basis:
            v -= (v @ b) * b
        norm = np.linalg.norm(v)
        v = v / norm if norm > 1e-8 else _orthogonal_unit(basis, dim)
        converged = False
        lam = 0.0
        for _ in range(max_iter):
            w = a @ v
            for b in basis:
                w -= (w @ b) * b
            norm = np.linalg.norm(w)
            if norm < 1e-30:
                v = _orthogonal_unit(basis, dim)
                lam = 0.0
                converged = True
                break
            v = w / norm
            lam = float(v @ (a @ v))
            # Judge convergence in the orthogonal complement of the found basis:
            # the iterate is confined there, and residual components along
            # already-extracted directions only reflect their own (converged)
            # deflation error, not this component's progress.
            r = a @ v - lam * v
            for b in basis:
                r -= (r @ b) * b
            residual = float(np.linalg.norm(r))
            if residual <= tol * max(1.0, abs(lam)):
                converged = True
                break
        if not converged:
            raise ValueError(
                f"power iteration did not converge for component {j} within {max_iter} "
                f"iterations (tol {tol})"
            )
        values[j] = lam
        components[j] = _fix_sign(v)
        basis.append(v)
        a -= lam * np.outer(v, v)
    return values, components


def pca_project(
    vectors: Sequence[np.ndarray] | np.ndarray,
    n_components: int = 2,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> np.ndarray:
    """Project centered rows onto the leading principal components."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D array with at least 2 rows, got shape {x.shape}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    _, components = power_iteration_components(cov, n_components, tol=tol, max_iter=max_iter)
    return centered @ components.T
