"""Writer for the per-document embedding interchange format.

Layout (little-endian):
  magic b"PCTE" | u32 version=1 | u32 n_tokens | u32 dim | u8 has_pooled=1
  n_tokens * (u16 byte_length + UTF-8 token bytes)
  n_tokens * dim float32 token vectors, row-major
  dim float32 pooled vector
plus an index.json listing {"version", "dim", "encoder", "docs": [{"id",
"file", "n_tokens"}]}. Any consumer of this format can rank with the output.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

MAGIC = b"PCTE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIB")


@dataclass
class DocEmbeddings:
    """Exported vectors for one document: one row per word token plus pooled."""

    doc_id: str
    tokens: tuple[str, ...]
    token_vectors: np.ndarray  # (n_tokens, dim) float32
    pooled: np.ndarray  # (dim,) float32

    def __post_init__(self) -> None:
        self.token_vectors = np.asarray(self.token_vectors, dtype=np.float32)
        self.pooled = np.asarray(self.pooled, dtype=np.float32)
        if self.token_vectors.ndim != 2 or self.token_vectors.shape[0] != len(self.tokens):
            raise ValueError(
                f"token_vectors must be (n_tokens, dim); got {self.token_vectors.shape} "
                f"for {len(self.tokens)} tokens"
            )
        if self.pooled.ndim != 1:
            raise ValueError(f"pooled must be 1-D, got shape {self.pooled.shape}")
        if len(self.tokens) > 0 and self.pooled.shape[0] != self.token_vectors.shape[1]:
            raise ValueError(
                f"pooled dim {self.pooled.shape[0]} does not match token vectors "
                f"{self.token_vectors.shape}"
            )

    @property
    def dim(self) -> int:
        return int(self.pooled.shape[0])


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write a temp file in the destination directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_doc(doc: DocEmbeddings) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(doc.tokens), doc.dim, 1)]
    for token in doc.tokens:
        raw = token.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"token too long to serialize ({len(raw)} bytes)")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(doc.token_vectors, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(doc.pooled, dtype="<f4").tobytes())
    return b"".join(parts)


def write_store(docs: Iterable[DocEmbeddings], out_dir: str | Path, encoder_name: str) -> Path:
    """Write one binary file per document plus index.json; returns the index path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    dim: int | None = None
    seen: set[str] = set()
    for i, doc in enumerate(docs):
        if doc.doc_id in seen:
            raise ValueError(f"duplicate doc id {doc.doc_id!r} in export")
        seen.add(doc.doc_id)
        if dim is None:
            dim = doc.dim
        elif doc.dim != dim:
            raise ValueError(
                f"inconsistent embedding dims: {doc.doc_id!r} has {doc.dim}, expected {dim}"
            )
        fname = f"emb_{i:06d}.bin"
        atomic_write_bytes(out_dir / fname, encode_doc(doc))
        entries.append({"id": doc.doc_id, "file": fname, "n_tokens": len(doc.tokens)})
    if dim is None:
        raise ValueError("cannot write an empty embedding store")
    index = {"version": FORMAT_VERSION, "dim": dim, "encoder": encoder_name, "docs": entries}
    index_path = out_dir / "index.json"
    atomic_write_bytes(
        index_path, (json.dumps(index, sort_keys=True, indent=2) + "\n").encode("utf-8")
    )
    return index_path
