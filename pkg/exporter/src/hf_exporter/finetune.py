"""Partisanship finetuning of a transformer checkpoint.

A linear head on the final-layer classifier-position state is trained with
binary cross-entropy against each document's side label, using the
train/validation split exported by the upstream pipeline. The checkpoint with
the best validation F1 is saved. Label modes mirror the ranking variants:
"true_labels", "shuffled_labels" (the label multiset is permuted with the
seed), and "none" (the pretrained weights are saved unchanged).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .alignment import align_document
from .jobs import CorpusDoc, ExportJob, FinetuneSettings, read_corpus, read_split


@dataclass(frozen=True)
class FinetuneResult:
    checkpoint_dir: Path
    metrics: list[dict]  # one row per epoch: {"epoch", "train_loss", "val_f1"}
    best_val_f1: float | None


def binary_f1(predictions: list[int], labels: list[int]) -> float:
    tp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 1)
    fp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 0)
    fn = sum(1 for p, y in zip(predictions, labels) if p == 0 and y == 1)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def _batch_tensors(docs: list, tokenizer, max_seq_len: int):
    """Pad a batch of documents to a common length with an attention mask."""
    aligned = [align_document(tokenizer, d.doc_id, d.tokens, max_seq_len) for d in docs]
    width = max(len(a.input_ids) for a in aligned)
    pad_id = tokenizer.pad_token_id
    if pad_id is None:
        raise ValueError("tokenizer must define a padding token for batched finetuning")
    ids = torch.full((len(aligned), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(aligned), width), dtype=torch.long)
    for i, a in enumerate(aligned):
        ids[i, : len(a.input_ids)] = torch.tensor(a.input_ids, dtype=torch.long)
        mask[i, : len(a.input_ids)] = 1
    return ids, mask


def _evaluate(model, head, docs, labels, tokenizer, max_seq_len, batch_size) -> float:
    model.eval()
    predictions: list[int] = []
    with torch.no_grad():
        for i in range(0, len(docs), batch_size):
            ids, mask = _batch_tensors(docs[i : i + batch_size], tokenizer, max_seq_len)
            states = model(input_ids=ids, attention_mask=mask).last_hidden_state
            logits = head(states[:, 0]).squeeze(-1)
            predictions.extend(int(l > 0) for l in logits)
    return binary_f1(predictions, labels)


def _save_checkpoint(model, tokenizer, head, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    if head is not None:
        torch.save(head.state_dict(), out_dir / "classifier_head.pt")


def finetune_partisanship(job: ExportJob) -> FinetuneResult:
    """Finetune job.model on the corpus sides; returns the checkpoint directory.

    The checkpoint under `<output_dir>/checkpoint` can be passed back as the
    `model` of a subsequent export job.
    """
    from transformers import AutoModel, AutoTokenizer

    settings = job.finetune if job.finetune is not None else FinetuneSettings()
    checkpoint_dir = Path(job.output_dir) / "checkpoint"
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModel.from_pretrained(job.model)

    if settings.label_mode == "none":
        _save_checkpoint(model, tokenizer, None, checkpoint_dir)
        return FinetuneResult(checkpoint_dir=checkpoint_dir, metrics=[], best_val_f1=None)

    corpus = {doc.doc_id: doc for doc in read_corpus(job.corpus_path)}
    if settings.split_path is None:
        raise ValueError(
            "finetuning requires the train/validation split file exported by "
            "the upstream pipeline (FinetuneSettings.split_path)"
        )
    train_ids, val_ids = read_split(settings.split_path)
    missing = [d for d in (*train_ids, *val_ids) if d not in corpus]
    if missing:
        raise ValueError(f"split references doc ids missing from the corpus: {missing[:5]}")
    train_docs: list[CorpusDoc] = [corpus[d] for d in train_ids]
    val_docs: list[CorpusDoc] = [corpus[d] for d in val_ids]
    if not train_docs:
        raise ValueError("split contains no training documents")

    labels = [doc.side for doc in train_docs]
    if len(set(labels)) < 2:
        raise ValueError(
            f"training labels are single-class (all {labels[0]}); "
            "finetuning needs both sides present"
        )
    rng = np.random.default_rng(settings.seed)
    if settings.label_mode == "shuffled_labels":
        labels = [labels[i] for i in rng.permutation(len(labels))]
    val_labels = [doc.side for doc in val_docs]

    torch.manual_seed(settings.seed)
    head = torch.nn.Linear(model.config.hidden_size, 1)
    loss_fn = torch.nn.BCEWithLogitsLoss()
    optimizer = torch.optim.AdamW(
        list(model.parameters()) + list(head.parameters()),
        lr=settings.learning_rate,
        weight_decay=settings.weight_decay,
    )

    best_f1 = -1.0
    best_state: tuple[dict, dict] | None = None
    metrics: list[dict] = []
    for epoch in range(1, settings.epochs + 1):
        model.train()
        order = rng.permutation(len(train_docs))
        losses: list[float] = []
        for start in range(0, len(order), settings.batch_size):
            batch_idx = order[start : start + settings.batch_size]
            batch_docs = [train_docs[i] for i in batch_idx]
            batch_labels = torch.tensor(
                [float(labels[i]) for i in batch_idx], dtype=torch.float32
            )
            ids, mask = _batch_tensors(batch_docs, tokenizer, job.max_seq_len)
            states = model(input_ids=ids, attention_mask=mask).last_hidden_state
            logits = head(states[:, 0]).squeeze(-1)
            loss = loss_fn(logits, batch_labels)
            if not torch.isfinite(loss):
                raise ValueError(f"non-finite training loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        val_f1 = (
            _evaluate(model, head, val_docs, val_labels, tokenizer, job.max_seq_len,
                      settings.batch_size)
            if val_docs
            else None
        )
        metrics.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "val_f1": val_f1,
            }
        )
        if val_f1 is not None and val_f1 > best_f1:
            best_f1 = val_f1
            best_state = (
                copy.deepcopy(model.state_dict()),
                copy.deepcopy(head.state_dict()),
            )

    if best_state is not None:
        model.load_state_dict(best_state[0])
        head.load_state_dict(best_state[1])
    _save_checkpoint(model, tokenizer, head, checkpoint_dir)
    (checkpoint_dir / "finetune_metrics.json").write_text(
        json.dumps(metrics, indent=2) + "\n", encoding="utf-8"
    )
    return FinetuneResult(
        checkpoint_dir=checkpoint_dir,
        metrics=metrics,
        best_val_f1=best_f1 if best_f1 >= 0 else None,
    )
