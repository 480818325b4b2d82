"""Binary interchange for per-document contextualized embeddings.

Per-document file layout (little-endian):
  magic b"PCTE" | u32 version=1 | u32 n_tokens | u32 dim | u8 has_pooled=1
  n_tokens * (u16 byte_length + UTF-8 token bytes)
  n_tokens * dim float32 token vectors, row-major
  dim float32 pooled vector
An index.json lists {"version", "dim", "encoder", "docs": [{"id", "file", "n_tokens"}]}.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

MAGIC = b"PCTE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIB")


@dataclass
class ContextualEncoding:
    """Final-layer vectors for one document: one row per kept token plus a pooled row."""

    doc_id: str
    tokens: list[str]
    token_vectors: np.ndarray  # (n_tokens, dim)
    pooled: np.ndarray  # (dim,)

    def __post_init__(self) -> None:
        self.token_vectors = np.asarray(self.token_vectors)
        self.pooled = np.asarray(self.pooled)
        if self.token_vectors.ndim != 2 or self.token_vectors.shape[0] != len(self.tokens):
            raise ValueError(
                f"token_vectors must be (n_tokens, dim); got {self.token_vectors.shape} "
                f"for {len(self.tokens)} tokens"
            )
        if self.pooled.shape != (self.token_vectors.shape[1],) and len(self.tokens) > 0:
            raise ValueError(
                f"pooled dim {self.pooled.shape} does not match token vectors "
                f"{self.token_vectors.shape}"
            )

    @property
    def dim(self) -> int:
        return int(self.pooled.shape[0])


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write to a temp file in the same directory, then rename into place."""
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


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_embedding_file(encoding: ContextualEncoding) -> bytes:
    parts = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, len(encoding.tokens), encoding.dim, 1)
    ]
    for token in encoding.tokens:
        raw = token.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"token too long to serialize ({len(raw)} bytes)")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(encoding.token_vectors, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(encoding.pooled, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_embedding_file(data: bytes, doc_id: str, path: str = "<bytes>") -> ContextualEncoding:
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n_tokens, dim, has_pooled = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if has_pooled != 1:
        raise ValueError(f"{path}: has_pooled must be 1, got {has_pooled}")
    offset = _HEADER.size
    tokens: list[str] = []
    for _ in range(n_tokens):
        if offset + 2 > len(data):
            raise ValueError(f"{path}: truncated token table")
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + length > len(data):
            raise ValueError(f"{path}: truncated token table")
        tokens.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    vec_bytes = n_tokens * dim * 4
    if offset + vec_bytes + dim * 4 != len(data):
        raise ValueError(
            f"{path}: payload size mismatch (expected {offset + vec_bytes + dim * 4} "
            f"bytes, file has {len(data)})"
        )
    token_vectors = np.frombuffer(data, dtype="<f4", count=n_tokens * dim, offset=offset)
    token_vectors = token_vectors.reshape(n_tokens, dim).copy()
    offset += vec_bytes
    pooled = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
    return ContextualEncoding(
        doc_id=doc_id, tokens=tokens, token_vectors=token_vectors, pooled=pooled
    )


def write_embedding_store(
    encodings: Iterable[ContextualEncoding], out_dir: str | Path, encoder_name: str
) -> Path:
    """Write one binary file per document plus index.json; returns the index path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    docs = []
    dim: int | None = None
    seen: set[str] = set()
    for i, enc in enumerate(encodings):
        if enc.doc_id in seen:
            raise ValueError(f"duplicate doc id {enc.doc_id!r} in embedding store")
        seen.add(enc.doc_id)
        if dim is None:
            dim = enc.dim
        elif enc.dim != dim:
            raise ValueError(
                f"inconsistent embedding dims: {enc.doc_id!r} has {enc.dim}, expected {dim}"
            )
        fname = f"emb_{i:06d}.bin"
        atomic_write_bytes(out_dir / fname, encode_embedding_file(enc))
        docs.append({"id": enc.doc_id, "file": fname, "n_tokens": len(enc.tokens)})
    if dim is None:
        raise ValueError("cannot write an empty embedding store")
    index = {"version": FORMAT_VERSION, "dim": dim, "encoder": encoder_name, "docs": docs}
    index_path = out_dir / "index.json"
    atomic_write_text(index_path, json.dumps(index, sort_keys=True, indent=2) + "\n")
    return index_path


class EmbeddingStore:
    """Lazily readable store: open validates headers, documents parse on first access."""

    def __init__(
        self, index_path: Path, dim: int, encoder_name: str, entries: dict[str, tuple[Path, int]]
    ):
        self.index_path = index_path
        self.dim = dim
        self.encoder_name = encoder_name
        self._entries = entries
        self._cache: dict[str, ContextualEncoding] = {}

    @classmethod
    def open(cls, index_path: str | Path) -> "EmbeddingStore":
        index_path = Path(index_path)
        index = json.loads(index_path.read_text(encoding="utf-8"))
        if index.get("version") != FORMAT_VERSION:
            raise ValueError(f"{index_path}: unsupported index version {index.get('version')!r}")
        dim = int(index["dim"])
        entries: dict[str, tuple[Path, int]] = {}
        for doc in index["docs"]:
            doc_id, fname, n_tokens = str(doc["id"]), str(doc["file"]), int(doc["n_tokens"])
            if doc_id in entries:
                raise ValueError(f"{index_path}: duplicate doc id {doc_id!r}")
            fpath = index_path.parent / fname
            with open(fpath, "rb") as fh:
                header = fh.read(_HEADER.size)
            if len(header) < _HEADER.size:
                raise ValueError(f"{fpath}: truncated header")
            magic, version, file_tokens, file_dim, has_pooled = _HEADER.unpack(header)
            if magic != MAGIC:
                raise ValueError(f"{fpath}: bad magic {magic!r}, expected {MAGIC!r}")
            if version != FORMAT_VERSION:
                raise ValueError(f"{fpath}: unsupported version {version}")
            if has_pooled != 1:
                raise ValueError(f"{fpath}: has_pooled must be 1, got {has_pooled}")
            if file_dim != dim:
                raise ValueError(f"{fpath}: dim {file_dim} does not match index dim {dim}")
            if file_tokens != n_tokens:
                raise ValueError(
                    f"{fpath}: n_tokens {file_tokens} does not match index value {n_tokens}"
                )
            entries[doc_id] = (fpath, n_tokens)
        return cls(index_path, dim, str(index["encoder"]), entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    @property
    def doc_ids(self) -> list[str]:
        return list(self._entries)

    def get(self, doc_id: str) -> ContextualEncoding:
        if doc_id not in self._entries:
            raise KeyError(f"doc id {doc_id!r} not in embedding store")
        if doc_id not in self._cache:
            path, _ = self._entries[doc_id]
            self._cache[doc_id] = decode_embedding_file(path.read_bytes(), doc_id, str(path))
        return self._cache[doc_id]

    __getitem__ = get


def import_embedding_store(index_path: str | Path) -> EmbeddingStore:
    """Open an embedding store produced by this package or an external exporter."""
    return EmbeddingStore.open(index_path)
