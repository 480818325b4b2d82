"""Export contextualized word embeddings from a transformer checkpoint.

For each document the word-token sequence is aligned to subword pieces, run
through the model once in evaluation mode, and written to the interchange
format: one float32 row per word token (mean of the final-layer states of its
pieces; a single-piece word copies its piece's state verbatim) plus the
final-layer state at the classifier position as the pooled row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import torch

from .alignment import align_document
from .interchange import DocEmbeddings, write_store
from .jobs import ExportJob, read_corpus


@dataclass(frozen=True)
class ExportResult:
    index_path: Path
    dim: int
    n_docs: int
    omitted: dict[str, int]  # doc id -> number of words dropped by truncation


def load_model_and_tokenizer(model_name_or_path: str):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
    model = AutoModel.from_pretrained(model_name_or_path)
    model.eval()
    return model, tokenizer


def encoder_label(model_name_or_path: str) -> str:
    path = Path(model_name_or_path)
    name = path.name if path.exists() else model_name_or_path
    return f"hf:{name}"


def document_embeddings(model, tokenizer, doc_id, tokens, max_seq_len) -> DocEmbeddings:
    """Run one document through the model and pool piece states per word."""
    aligned = align_document(tokenizer, doc_id, tokens, max_seq_len)
    if aligned.omitted:
        warnings.warn(
            f"document {doc_id!r}: omitted {len(aligned.omitted)} of {len(tokens)} "
            f"tokens beyond max sequence length {max_seq_len}",
            UserWarning,
            stacklevel=2,
        )
    input_ids = torch.tensor([aligned.input_ids], dtype=torch.long)
    with torch.no_grad():
        outputs = model(input_ids=input_ids, attention_mask=torch.ones_like(input_ids))
    states = outputs.last_hidden_state[0]  # (seq_len, dim)
    rows = []
    for start, end in aligned.spans:
        if end - start == 1:
            rows.append(states[start])
        else:
            rows.append(states[start:end].mean(dim=0))
    dim = states.shape[1]
    token_vectors = torch.stack(rows) if rows else torch.zeros((0, dim), dtype=states.dtype)
    return DocEmbeddings(
        doc_id=doc_id,
        tokens=aligned.kept,
        token_vectors=token_vectors.cpu().numpy(),
        pooled=states[0].cpu().numpy(),
    )


def export_embeddings(job: ExportJob) -> ExportResult:
    """Export the whole corpus; returns the index path and truncation stats.

    Documents are encoded one at a time so the written floats do not depend on
    how the corpus is batched or sharded.
    """
    docs = read_corpus(job.corpus_path)
    model, tokenizer = load_model_and_tokenizer(job.model)
    omitted: dict[str, int] = {}
    exported: list[DocEmbeddings] = []
    for doc in docs:
        emb = document_embeddings(model, tokenizer, doc.doc_id, doc.tokens, job.max_seq_len)
        if len(emb.tokens) < len(doc.tokens):
            omitted[doc.doc_id] = len(doc.tokens) - len(emb.tokens)
        exported.append(emb)
    index_path = write_store(exported, job.output_dir, encoder_label(job.model))
    return ExportResult(
        index_path=index_path,
        dim=exported[0].dim,
        n_docs=len(exported),
        omitted=omitted,
    )
