"""Trainable transformer encoder with analytic gradients, in plain numpy.

Pre-LN blocks, a reserved pooled position prepended to every sequence, and a
sigmoid head on the pooled state for partisanship finetuning. Backward passes
are hand-written so they can be checked against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, Document, Side, Vocabulary
from .store import ContextualEncoding

LABEL_MODES = ("true_labels", "shuffled_labels", "none")
_LN_EPS = 1e-5
_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int = 128
    max_len: int = 256

    def __post_init__(self) -> None:
        if self.vocab_size < 1:
            raise ValueError(f"vocab_size must be >= 1, got {self.vocab_size}")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} must be divisible by n_heads {self.n_heads}"
            )
        if self.max_len < 2:
            raise ValueError(f"max_len must be >= 2 (pooled position plus one token)")
        if min(self.d_model, self.n_heads, self.n_layers, self.ffn_dim) < 1:
            raise ValueError("all size parameters must be >= 1")

    @property
    def unk_id(self) -> int:
        return self.vocab_size

    @property
    def pool_id(self) -> int:
        return self.vocab_size + 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    weight_decay: float = 5e-4
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    label_mode: str = "true_labels"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.label_mode not in LABEL_MODES:
            raise ValueError(f"label_mode must be one of {LABEL_MODES}, got {self.label_mode!r}")


@dataclass
class EncoderModel:
    config: EncoderConfig
    params: dict[str, np.ndarray]
    token_index: dict[str, int]

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        kept = list(tokens)[: self.config.max_len - 1]
        ids = [self.config.pool_id]
        ids.extend(self.token_index.get(t, self.config.unk_id) for t in kept)
        return np.asarray(ids, dtype=np.int64)


def init_params(config: EncoderConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    scale = 0.02
    params: dict[str, np.ndarray] = {
        "tok_emb": rng.normal(0.0, scale, (config.vocab_size + 2, config.d_model)),
        "pos_emb": rng.normal(0.0, scale, (config.max_len, config.d_model)),
    }
    for l in range(config.n_layers):
        for name in ("wq", "wk", "wv", "wo"):
            params[f"l{l}.{name}"] = rng.normal(0.0, scale, (config.d_model, config.d_model))
        for name in ("bq", "bk", "bv", "bo"):
            params[f"l{l}.{name}"] = np.zeros(config.d_model)
        params[f"l{l}.ln1.g"] = np.ones(config.d_model)
        params[f"l{l}.ln1.b"] = np.zeros(config.d_model)
        params[f"l{l}.w1"] = rng.normal(0.0, scale, (config.d_model, config.ffn_dim))
        params[f"l{l}.b1"] = np.zeros(config.ffn_dim)
        params[f"l{l}.w2"] = rng.normal(0.0, scale, (config.ffn_dim, config.d_model))
        params[f"l{l}.b2"] = np.zeros(config.d_model)
        params[f"l{l}.ln2.g"] = np.ones(config.d_model)
        params[f"l{l}.ln2.b"] = np.zeros(config.d_model)
    params["lnf.g"] = np.ones(config.d_model)
    params["lnf.b"] = np.zeros(config.d_model)
    params["head.w"] = rng.normal(0.0, scale, (config.d_model,))
    params["head.b"] = np.zeros(1)
    return params


def init_encoder(config: EncoderConfig, vocabulary: Vocabulary, seed: int) -> EncoderModel:
    if len(vocabulary) != config.vocab_size:
        raise ValueError(
            f"config vocab_size {config.vocab_size} does not match vocabulary size "
            f"{len(vocabulary)}"
        )
    token_index = {token: i for i, token in enumerate(vocabulary)}
    return EncoderModel(config=config, params=init_params(config, seed), token_index=token_index)


def _decayed(name: str) -> bool:
    # Decoupled weight decay applies to projection/embedding matrices only.
    return name in ("tok_emb", "pos_emb", "head.w") or (
        "." in name and name.split(".")[-1] in ("wq", "wk", "wv", "wo", "w1", "w2")
    )


def _ln_fwd(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def _ln_bwd(dy: np.ndarray, cache):
    xhat, inv, g = cache
    d = xhat.shape[-1]
    dxhat = dy * g
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dx = (
        inv
        / d
        * (d * dxhat - dxhat.sum(axis=-1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    )
    return dx, dg, db


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(params: Mapping[str, np.ndarray], config: EncoderConfig, ids: np.ndarray):
    """Returns the final hidden states (L, d_model) and a cache for backward."""
    length = ids.shape[0]
    n_heads = config.n_heads
    head_dim = config.d_model // n_heads
    x = params["tok_emb"][ids] + params["pos_emb"][:length]
    layer_caches = []
    for l in range(config.n_layers):
        lc: dict[str, np.ndarray] = {"x": x}
        a, lc["ln1"] = _ln_fwd(x, params[f"l{l}.ln1.g"], params[f"l{l}.ln1.b"])
        lc["a"] = a
        q = a @ params[f"l{l}.wq"] + params[f"l{l}.bq"]
        k = a @ params[f"l{l}.wk"] + params[f"l{l}.bk"]
        v = a @ params[f"l{l}.wv"] + params[f"l{l}.bv"]
        qh = q.reshape(length, n_heads, head_dim).transpose(1, 0, 2)
        kh = k.reshape(length, n_heads, head_dim).transpose(1, 0, 2)
        vh = v.reshape(length, n_heads, head_dim).transpose(1, 0, 2)
        att = _softmax(qh @ kh.transpose(0, 2, 1) / math.sqrt(head_dim))
        oh = att @ vh
        o = oh.transpose(1, 0, 2).reshape(length, config.d_model)
        attn_out = o @ params[f"l{l}.wo"] + params[f"l{l}.bo"]
        x1 = x + attn_out
        lc.update(qh=qh, kh=kh, vh=vh, att=att, o=o, x1=x1)
        bnorm, lc["ln2"] = _ln_fwd(x1, params[f"l{l}.ln2.g"], params[f"l{l}.ln2.b"])
        lc["bnorm"] = bnorm
        h_pre = bnorm @ params[f"l{l}.w1"] + params[f"l{l}.b1"]
        h = np.maximum(h_pre, 0.0)
        lc["h_pre"] = h_pre
        lc["h"] = h
        x = x1 + h @ params[f"l{l}.w2"] + params[f"l{l}.b2"]
        layer_caches.append(lc)
    y, lnf_cache = _ln_fwd(x, params["lnf.g"], params["lnf.b"])
    return y, {"ids": ids, "layers": layer_caches, "lnf": lnf_cache}


def _backward(
    params: Mapping[str, np.ndarray],
    config: EncoderConfig,
    cache,
    dy: np.ndarray,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate parameter gradients for one sequence into `grads`."""
    n_heads = config.n_heads
    head_dim = config.d_model // n_heads
    length = dy.shape[0]
    dx, dg, db = _ln_bwd(dy, cache["lnf"])
    grads["lnf.g"] += dg
    grads["lnf.b"] += db
    for l in reversed(range(config.n_layers)):
        lc = cache["layers"][l]
        # x_out = x1 + relu(LN2(x1) @ w1 + b1) @ w2 + b2
        df = dx
        grads[f"l{l}.w2"] += lc["h"].T @ df
        grads[f"l{l}.b2"] += df.sum(axis=0)
        dh = df @ params[f"l{l}.w2"].T
        dh_pre = dh * (lc["h_pre"] > 0.0)
        grads[f"l{l}.w1"] += lc["bnorm"].T @ dh_pre
        grads[f"l{l}.b1"] += dh_pre.sum(axis=0)
        dbnorm = dh_pre @ params[f"l{l}.w1"].T
        dx1, dg, db = _ln_bwd(dbnorm, lc["ln2"])
        grads[f"l{l}.ln2.g"] += dg
        grads[f"l{l}.ln2.b"] += db
        dx1 = dx1 + dx
        # x1 = x + attention(LN1(x))
        dattn = dx1
        grads[f"l{l}.wo"] += lc["o"].T @ dattn
        grads[f"l{l}.bo"] += dattn.sum(axis=0)
        do = dattn @ params[f"l{l}.wo"].T
        doh = do.reshape(length, n_heads, head_dim).transpose(1, 0, 2)
        datt = doh @ lc["vh"].transpose(0, 2, 1)
        dvh = lc["att"].transpose(0, 2, 1) @ doh
        ds = lc["att"] * (datt - (datt * lc["att"]).sum(axis=-1, keepdims=True))
        ds = ds / math.sqrt(head_dim)
        dqh = ds @ lc["kh"]
        dkh = ds.transpose(0, 2, 1) @ lc["qh"]
        dq = dqh.transpose(1, 0, 2).reshape(length, config.d_model)
        dk = dkh.transpose(1, 0, 2).reshape(length, config.d_model)
        dv = dvh.transpose(1, 0, 2).reshape(length, config.d_model)
        grads[f"l{l}.wq"] += lc["a"].T @ dq
        grads[f"l{l}.bq"] += dq.sum(axis=0)
        grads[f"l{l}.wk"] += lc["a"].T @ dk
        grads[f"l{l}.bk"] += dk.sum(axis=0)
        grads[f"l{l}.wv"] += lc["a"].T @ dv
        grads[f"l{l}.bv"] += dv.sum(axis=0)
        da = dq @ params[f"l{l}.wq"].T + dk @ params[f"l{l}.wk"].T + dv @ params[f"l{l}.wv"].T
        dxa, dg, db = _ln_bwd(da, lc["ln1"])
        grads[f"l{l}.ln1.g"] += dg
        grads[f"l{l}.ln1.b"] += db
        dx = dx1 + dxa
    np.add.at(grads["tok_emb"], cache["ids"], dx)
    grads["pos_emb"][:length] += dx


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _bce_loss(logit: float, label: int) -> float:
    # max(s,0) - s*y + log(1 + exp(-|s|)) is the stable form of BCE-with-logits.
    return max(logit, 0.0) - logit * label + math.log1p(math.exp(-abs(logit)))


def doc_loss_and_grads(
    model: EncoderModel, doc_tokens: Sequence[str], label: int, grads: dict[str, np.ndarray]
) -> float:
    """One forward/backward pass; gradients accumulate into `grads`."""
    ids = model.token_ids(doc_tokens)
    y, cache = _forward(model.params, model.config, ids)
    logit = float(y[0] @ model.params["head.w"] + model.params["head.b"][0])
    dlogit = _sigmoid(logit) - label
    dy = np.zeros_like(y)
    dy[0] = dlogit * model.params["head.w"]
    grads["head.w"] += dlogit * y[0]
    grads["head.b"] += dlogit
    _backward(model.params, model.config, cache, dy, grads)
    return _bce_loss(logit, label)


def predict_logit(model: EncoderModel, doc: Document) -> float:
    if doc.is_empty:
        raise ValueError(f"document {doc.id!r} has no tokens to encode")
    y, _ = _forward(model.params, model.config, model.token_ids(doc.tokens))
    return float(y[0] @ model.params["head.w"] + model.params["head.b"][0])


def encode(model: EncoderModel, doc: Document) -> ContextualEncoding:
    """Final-layer vectors for a document; tokens beyond max_len - 1 are dropped."""
    if doc.is_empty:
        raise ValueError(f"document {doc.id!r} has no tokens to encode")
    kept = list(doc.tokens)[: model.config.max_len - 1]
    y, _ = _forward(model.params, model.config, model.token_ids(kept))
    return ContextualEncoding(
        doc_id=doc.id, tokens=kept, token_vectors=y[1:].copy(), pooled=y[0].copy()
    )


def encode_corpus(model: EncoderModel, corpus: Corpus) -> dict[str, ContextualEncoding]:
    return {doc.id: encode(model, doc) for doc in corpus}


def split_by_topicality(corpus: Corpus, theta_for, threshold: float = 0.15) -> tuple[Corpus, Corpus]:
    """Topical documents (max mixture weight >= threshold) train; the rest validate.

    `theta_for` maps a doc id to its topic mixture, e.g. `LdaModel.theta_for`.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    train_docs, val_docs = [], []
    for doc in corpus:
        if float(np.max(theta_for(doc.id))) >= threshold:
            train_docs.append(doc)
        else:
            val_docs.append(doc)
    return Corpus(train_docs), Corpus(val_docs)


def evaluate_classifier(model: EncoderModel, corpus: Corpus) -> dict[str, float]:
    """Precision/recall/F1/accuracy at threshold 0.5 with Liberal as positive."""
    if len(corpus) == 0:
        raise ValueError("cannot evaluate the classifier on an empty corpus")
    tp = fp = tn = fn = 0
    for doc in corpus:
        pred = 1 if _sigmoid(predict_logit(model, doc)) >= 0.5 else 0
        truth = doc.side.label
        if pred == 1 and truth == 1:
            tp += 1
        elif pred == 1 and truth == 0:
            fp += 1
        elif pred == 0 and truth == 0:
            tn += 1
        else:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "accuracy": (tp + tn) / len(corpus),
        "n": float(len(corpus)),
    }


def train_partisanship(
    config: EncoderConfig,
    train: Corpus,
    validation: Corpus,
    train_config: TrainConfig,
    vocabulary: Vocabulary,
) -> tuple[EncoderModel, list[dict]]:
    """Finetune on side labels with Adam plus decoupled weight decay.

    Checkpoints the epoch with the best validation F1 (final epoch if validation
    is empty). `label_mode="shuffled_labels"` permutes the label multiset with the
    config seed; `label_mode="none"` returns the freshly initialized model untouched.
    """
    model = init_encoder(config, vocabulary, train_config.seed)
    if train_config.label_mode == "none":
        return model, []
    docs = [doc for doc in train if not doc.is_empty]
    if not docs:
        raise ValueError("training corpus has no non-empty documents")
    labels = np.array([doc.side.label for doc in docs], dtype=np.int64)
    rng = np.random.default_rng(train_config.seed)
    if train_config.label_mode == "shuffled_labels":
        labels = rng.permutation(labels)
    if len(np.unique(labels)) < 2:
        raise ValueError("training labels contain a single class; cannot finetune")

    m_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    v_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    step = 0
    best_f1 = -1.0
    best_params: dict[str, np.ndarray] | None = None
    metrics: list[dict] = []
    lr, wd = train_config.learning_rate, train_config.weight_decay

    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(docs))
        loss_sum = 0.0
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start : start + train_config.batch_size]
            grads = {k: np.zeros_like(v) for k, v in model.params.items()}
            batch_loss = 0.0
            for idx in batch:
                batch_loss += doc_loss_and_grads(
                    model, docs[idx].tokens, int(labels[idx]), grads
                )
            batch_loss /= len(batch)
            if not math.isfinite(batch_loss):
                raise ValueError(
                    f"non-finite training loss {batch_loss!r} at epoch {epoch}; "
                    "lower the learning rate"
                )
            step += 1
            bc1 = 1.0 - _ADAM_B1**step
            bc2 = 1.0 - _ADAM_B2**step
            for name, param in model.params.items():
                g = grads[name] / len(batch)
                m_state[name] = _ADAM_B1 * m_state[name] + (1 - _ADAM_B1) * g
                v_state[name] = _ADAM_B2 * v_state[name] + (1 - _ADAM_B2) * g * g
                param -= lr * (m_state[name] / bc1) / (np.sqrt(v_state[name] / bc2) + _ADAM_EPS)
                if wd > 0 and _decayed(name):
                    param -= lr * wd * param
            loss_sum += batch_loss * len(batch)
        row: dict = {"epoch": epoch, "train_loss": loss_sum / len(docs)}
        if len(validation) > 0:
            val = evaluate_classifier(model, validation)
            row.update(
                val_f1=val["f1"],
                val_accuracy=val["accuracy"],
                val_precision=val["precision"],
                val_recall=val["recall"],
            )
            if val["f1"] > best_f1:
                best_f1 = val["f1"]
                best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            row.update(val_f1=None, val_accuracy=None, val_precision=None, val_recall=None)
        metrics.append(row)
    if best_params is not None:
        model.params = best_params
    return model, metrics


def save_encoder(model: EncoderModel, dir_path: str | Path) -> None:
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    tokens = [None] * len(model.token_index)
    for token, idx in model.token_index.items():
        tokens[idx] = token
    meta = {
        "version": 1,
        "config": {
            "vocab_size": model.config.vocab_size,
            "d_model": model.config.d_model,
            "n_heads": model.config.n_heads,
            "n_layers": model.config.n_layers,
            "ffn_dim": model.config.ffn_dim,
            "max_len": model.config.max_len,
        },
        "tokens": tokens,
    }
    (dir_path / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    np.savez(dir_path / "params.npz", **model.params)


def load_encoder(dir_path: str | Path) -> EncoderModel:
    dir_path = Path(dir_path)
    meta = json.loads((dir_path / "meta.json").read_text(encoding="utf-8"))
    if meta.get("version") != 1:
        raise ValueError(f"unsupported encoder version {meta.get('version')!r}")
    config = EncoderConfig(**meta["config"])
    with np.load(dir_path / "params.npz") as data:
        params = {name: data[name].copy() for name in data.files}
    token_index = {token: i for i, token in enumerate(meta["tokens"])}
    return EncoderModel(config=config, params=params, token_index=token_index)
