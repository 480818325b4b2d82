"""Collapsed Gibbs LDA, topic summaries, NPMI coherence, and model selection."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .corpus import Corpus, Document, Side, Vocabulary

# xorshift64* with a splitmix64 seed scramble: deterministic and platform-independent,
# unlike library generators whose streams may change across versions.
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
_SPLITMIX_MUL2 = 0x94D049BB133111EB
_XORSHIFT_MUL = 0x2545F4914F6CDD1D
_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True)
def _seed_state(seed: np.uint64) -> np.uint64:
    z = np.uint64(seed) + np.uint64(_SPLITMIX_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_SPLITMIX_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_SPLITMIX_MUL2)
    z = z ^ (z >> np.uint64(31))
    if z == np.uint64(0):
        z = np.uint64(_SPLITMIX_GAMMA)
    return z


@njit(cache=True)
def _next_unit(state: np.uint64):
    state ^= state >> np.uint64(12)
    state ^= state << np.uint64(25)
    state ^= state >> np.uint64(27)
    value = state * np.uint64(_XORSHIFT_MUL)
    return state, np.float64(value >> np.uint64(11)) * _UNIT


@njit(cache=True)
def _run_gibbs(doc_of, word_of, n_docs, n_topics, n_words, alpha, beta, iterations, seed):
    n_tokens = word_of.shape[0]
    n_dk = np.zeros((n_docs, n_topics), dtype=np.float64)
    n_kw = np.zeros((n_topics, n_words), dtype=np.float64)
    n_k = np.zeros(n_topics, dtype=np.float64)
    z = np.empty(n_tokens, dtype=np.int64)
    state = _seed_state(np.uint64(seed))
    for i in range(n_tokens):
        state, u = _next_unit(state)
        k = int(u * n_topics)
        if k >= n_topics:
            k = n_topics - 1
        z[i] = k
        n_dk[doc_of[i], k] += 1.0
        n_kw[k, word_of[i]] += 1.0
        n_k[k] += 1.0
    vbeta = n_words * beta
    cum = np.empty(n_topics, dtype=np.float64)
    for _ in range(iterations):
        for i in range(n_tokens):
            d = doc_of[i]
            w = word_of[i]
            k = z[i]
            n_dk[d, k] -= 1.0
            n_kw[k, w] -= 1.0
            n_k[k] -= 1.0
            total = 0.0
            for kk in range(n_topics):
                total += (n_dk[d, kk] + alpha) * (n_kw[kk, w] + beta) / (n_k[kk] + vbeta)
                cum[kk] = total
            state, u = _next_unit(state)
            target = u * total
            knew = 0
            while knew < n_topics - 1 and cum[knew] <= target:
                knew += 1
            z[i] = knew
            n_dk[d, knew] += 1.0
            n_kw[knew, w] += 1.0
            n_k[knew] += 1.0
    return z, n_dk, n_kw, n_k


@dataclass
class LdaModel:
    """Point estimates from the final Gibbs sample."""

    n_topics: int
    alpha: float
    beta: float
    vocabulary: Vocabulary
    doc_ids: list[str]
    phi: np.ndarray  # (K, V) topic-word distributions
    theta: np.ndarray  # (D, K) document-topic mixtures
    seed: int
    iterations: int
    assignments: list[np.ndarray] | None = None

    def __post_init__(self) -> None:
        self._doc_index = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}

    def doc_index(self, doc_id: str) -> int:
        try:
            return self._doc_index[doc_id]
        except KeyError:
            raise KeyError(f"document {doc_id!r} was not in the training corpus") from None

    def theta_for(self, doc_id: str) -> np.ndarray:
        return self.theta[self.doc_index(doc_id)]


def _doc_token_ids(doc: Document, vocabulary: Vocabulary) -> list[int]:
    return [idx for idx in (vocabulary.get(t) for t in doc.tokens) if idx is not None]


def train_lda(
    corpus: Corpus,
    vocabulary: Vocabulary,
    n_topics: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 200,
    seed: int = 0,
) -> LdaModel:
    """Collapsed Gibbs sampling with symmetric priors; defaults alpha=50/K, beta=0.01.

    Deterministic: the same corpus, vocabulary, and parameters give bit-identical
    phi/theta for a given seed.
    """
    if n_topics < 1:
        raise ValueError(f"n_topics must be >= 1, got {n_topics}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    if alpha is None:
        alpha = 50.0 / n_topics
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"priors must be positive, got alpha={alpha}, beta={beta}")

    doc_of: list[int] = []
    word_of: list[int] = []
    for d, doc in enumerate(corpus):
        ids = _doc_token_ids(doc, vocabulary)
        if not ids:
            raise ValueError(f"document {doc.id!r} has no in-vocabulary tokens")
        doc_of.extend([d] * len(ids))
        word_of.extend(ids)
    if n_topics > len(word_of):
        raise ValueError(
            f"n_topics={n_topics} exceeds the corpus token count {len(word_of)}"
        )

    z, n_dk, n_kw, n_k = _run_gibbs(
        np.asarray(doc_of, dtype=np.int64),
        np.asarray(word_of, dtype=np.int64),
        len(corpus),
        n_topics,
        len(vocabulary),
        float(alpha),
        float(beta),
        int(iterations),
        int(seed) & 0xFFFFFFFFFFFFFFFF,
    )
    phi = (n_kw + beta) / (n_k[:, None] + len(vocabulary) * beta)
    n_d = n_dk.sum(axis=1, keepdims=True)
    theta = (n_dk + alpha) / (n_d + n_topics * alpha)

    assignments: list[np.ndarray] = []
    offset = 0
    for d in range(len(corpus)):
        length = int(n_d[d, 0])
        assignments.append(z[offset : offset + length].copy())
        offset += length
    return LdaModel(
        n_topics=n_topics,
        alpha=float(alpha),
        beta=float(beta),
        vocabulary=vocabulary,
        doc_ids=corpus.doc_ids,
        phi=phi,
        theta=theta,
        seed=int(seed),
        iterations=int(iterations),
        assignments=assignments,
    )


@dataclass(frozen=True)
class TopicKeywords:
    """Top-m keywords of a topic with weights renormalized to sum to 1."""

    topic_id: int
    entries: tuple[tuple[float, str], ...]  # (weight, token), weight descending

    @property
    def tokens(self) -> list[str]:
        return [token for _, token in self.entries]

    def weight_of(self, token: str) -> float:
        for weight, tok in self.entries:
            if tok == token:
                return weight
        raise KeyError(f"token {token!r} is not a keyword of topic {self.topic_id}")


@dataclass(frozen=True)
class TopicDocuments:
    """Top-n documents of one side for a topic, weights renormalized to sum to 1."""

    topic_id: int
    side: Side
    entries: tuple[tuple[float, str], ...]  # (weight, doc_id), weight descending

    @property
    def doc_ids(self) -> list[str]:
        return [doc_id for _, doc_id in self.entries]


def _check_topic_id(model: LdaModel, topic_id: int) -> None:
    if not 0 <= topic_id < model.n_topics:
        raise ValueError(f"topic_id {topic_id} out of range [0, {model.n_topics})")


def top_keywords(model: LdaModel, topic_id: int, m: int = 10) -> TopicKeywords:
    """Highest-phi tokens; ties break toward the smaller vocabulary index."""
    _check_topic_id(model, topic_id)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    row = model.phi[topic_id]
    order = np.lexsort((np.arange(row.shape[0]), -row))[: min(m, row.shape[0])]
    weights = row[order]
    weights = weights / weights.sum()
    entries = tuple(
        (float(w), model.vocabulary.token(int(i))) for w, i in zip(weights, order)
    )
    return TopicKeywords(topic_id=topic_id, entries=entries)


def top_documents(
    model: LdaModel, corpus: Corpus, side: Side, topic_id: int, n: int = 10
) -> TopicDocuments:
    """Highest-theta documents of one side; ties break toward the smaller doc id."""
    _check_topic_id(model, topic_id)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    side = Side.parse(side)
    docs = [doc for doc in corpus if doc.side is side]
    if not docs:
        raise ValueError(f"no documents on side {side.value} to rank for topic {topic_id}")
    ranked = sorted(docs, key=lambda d: (-model.theta_for(d.id)[topic_id], d.id))[:n]
    weights = np.array([model.theta_for(d.id)[topic_id] for d in ranked], dtype=np.float64)
    weights = weights / weights.sum()
    entries = tuple((float(w), d.id) for w, d in zip(weights, ranked))
    return TopicDocuments(topic_id=topic_id, side=side, entries=entries)


def pair_npmi(
    n_i: int, n_j: int, n_ij: int, n_docs: int, eps: float = 1e-12
) -> float:
    """NPMI from document frequencies, smoothed so absent/saturated pairs stay finite."""
    if n_docs < 1:
        raise ValueError("need at least one document")
    p_i = min((n_i + eps) / n_docs, 1.0)
    p_j = min((n_j + eps) / n_docs, 1.0)
    p_ij = min((n_ij + eps) / n_docs, 1.0)
    if p_ij >= 1.0:
        return 1.0
    value = math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))
    return min(1.0, max(-1.0, value))


def topic_npmi(corpus: Corpus, keywords: Sequence[str], eps: float = 1e-12) -> float:
    """Mean pairwise NPMI of a keyword list over document co-occurrence counts."""
    if len(keywords) < 2:
        raise ValueError("need at least two keywords to score coherence")
    doc_sets = [set(doc.tokens) for doc in corpus]
    n_docs = len(doc_sets)
    if n_docs == 0:
        raise ValueError("cannot score coherence on an empty corpus")
    df = {w: sum(1 for s in doc_sets if w in s) for w in keywords}
    values = []
    for a in range(len(keywords)):
        for b in range(a + 1, len(keywords)):
            wi, wj = keywords[a], keywords[b]
            co = sum(1 for s in doc_sets if wi in s and wj in s)
            values.append(pair_npmi(df[wi], df[wj], co, n_docs, eps))
    return float(np.mean(values))


def coherence_npmi(model: LdaModel, corpus: Corpus, m: int = 10, eps: float = 1e-12) -> float:
    """Mean topic coherence over all topics, each scored on its top-m keywords."""
    scores = [
        topic_npmi(corpus, top_keywords(model, k, m).tokens, eps)
        for k in range(model.n_topics)
    ]
    return float(np.mean(scores))


def select_k(
    corpus: Corpus,
    vocabulary: Vocabulary,
    k_values: Sequence[int],
    iterations: int = 200,
    seed: int = 0,
    m: int = 10,
    alpha: float | None = None,
    beta: float = 0.01,
) -> tuple[int, dict[int, float]]:
    """Train one model per K and pick the coherence argmax; ties go to the smaller K."""
    if not k_values:
        raise ValueError("k_values must be non-empty")
    scores: dict[int, float] = {}
    for k in sorted(set(int(k) for k in k_values)):
        model = train_lda(
            corpus, vocabulary, k, alpha=alpha, beta=beta, iterations=iterations, seed=seed
        )
        scores[k] = coherence_npmi(model, corpus, m=m)
    best = min(scores, key=lambda k: (-scores[k], k))
    return best, scores


def generate_synthetic_corpus(
    n_topics: int,
    vocab_size: int,
    n_docs: int,
    doc_len: int,
    seed: int = 0,
    topic_concentration: float = 0.05,
    doc_concentration: float = 0.1,
) -> tuple[Corpus, Vocabulary, np.ndarray, np.ndarray]:
    """Sample a corpus from the LDA generative process.

    Returns (corpus, vocabulary, true_phi, true_theta). Low concentrations give
    well-separated topics, which recovery experiments rely on.
    """
    if n_topics < 1:
        raise ValueError(f"n_topics must be >= 1, got {n_topics}")
    if vocab_size < n_topics:
        raise ValueError(f"vocab_size {vocab_size} must be >= n_topics {n_topics}")
    if n_docs < 1:
        raise ValueError(f"n_docs must be >= 1, got {n_docs}")
    if doc_len < 1:
        raise ValueError(f"doc_len must be >= 1, got {doc_len}")
    rng = np.random.default_rng(seed)
    true_phi = rng.dirichlet([topic_concentration] * vocab_size, size=n_topics)
    true_theta = rng.dirichlet([doc_concentration] * n_topics, size=n_docs)
    width = max(3, len(str(vocab_size - 1)))
    tokens = [f"w{i:0{width}d}" for i in range(vocab_size)]
    documents = []
    for d in range(n_docs):
        z = rng.choice(n_topics, size=doc_len, p=true_theta[d])
        words = [tokens[rng.choice(vocab_size, p=true_phi[k])] for k in z]
        side = Side.LIBERAL if d % 2 == 0 else Side.CONSERVATIVE
        documents.append(
            Document(
                id=f"syn{d:05d}",
                source="SynA" if side is Side.LIBERAL else "SynB",
                side=side,
                date="2020-01-01",
                raw_text=" ".join(words),
                tokens=words,
            )
        )
    corpus = Corpus(documents)
    df = Counter()
    for doc in corpus:
        df.update(set(doc.tokens))
    vocabulary = Vocabulary(tokens=tokens, doc_freq={t: df.get(t, 0) for t in tokens})
    return corpus, vocabulary, true_phi, true_theta


def save_lda(model: LdaModel, dir_path: str | Path) -> None:
    """Write header.json plus raw row-major float64 phi/theta binaries."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    header = {
        "version": 1,
        "n_topics": model.n_topics,
        "alpha": model.alpha,
        "beta": model.beta,
        "vocab_size": len(model.vocabulary),
        "n_docs": len(model.doc_ids),
        "seed": model.seed,
        "iterations": model.iterations,
        "vocab_sha256": model.vocabulary.sha256,
        "doc_ids": model.doc_ids,
    }
    (dir_path / "header.json").write_text(
        json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (dir_path / "phi.bin").write_bytes(model.phi.astype("<f8").tobytes())
    (dir_path / "theta.bin").write_bytes(model.theta.astype("<f8").tobytes())


def load_lda(dir_path: str | Path, vocabulary: Vocabulary) -> LdaModel:
    """Load a saved model; the vocabulary must hash-match the one used in training."""
    dir_path = Path(dir_path)
    header = json.loads((dir_path / "header.json").read_text(encoding="utf-8"))
    if header.get("version") != 1:
        raise ValueError(f"unsupported model version {header.get('version')!r}")
    if header["vocab_sha256"] != vocabulary.sha256:
        raise ValueError(
            "vocabulary hash mismatch: model was trained with a different vocabulary"
        )
    if header["vocab_size"] != len(vocabulary):
        raise ValueError(
            f"vocabulary size mismatch: header says {header['vocab_size']}, got {len(vocabulary)}"
        )
    k, v, d = header["n_topics"], header["vocab_size"], header["n_docs"]
    phi = np.frombuffer((dir_path / "phi.bin").read_bytes(), dtype="<f8").reshape(k, v)
    theta = np.frombuffer((dir_path / "theta.bin").read_bytes(), dtype="<f8").reshape(d, k)
    return LdaModel(
        n_topics=k,
        alpha=header["alpha"],
        beta=header["beta"],
        vocabulary=vocabulary,
        doc_ids=list(header["doc_ids"]),
        phi=phi.copy(),
        theta=theta.copy(),
        seed=header["seed"],
        iterations=header["iterations"],
        assignments=None,
    )
