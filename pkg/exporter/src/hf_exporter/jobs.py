"""Job configuration and corpus input for the embedding exporter.

The exporter consumes the token lists already produced by the upstream
pipeline (one JSON object per line: {"id": str, "side": 0|1, "tokens": [str]})
rather than re-tokenizing raw text, so exported rows line up with the word
tokens the pipeline ranks with.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

LABEL_MODES = ("true_labels", "shuffled_labels", "none")


@dataclass(frozen=True)
class FinetuneSettings:
    """Hyperparameters for partisanship finetuning of the base model."""

    learning_rate: float = 1e-5
    weight_decay: float = 5e-4
    batch_size: int = 64
    epochs: int = 30
    label_mode: str = "true_labels"
    seed: int = 0
    split_path: str | None = None  # {"train": [...], "validation": [...]} doc ids

    def __post_init__(self) -> None:
        if not 1 <= self.epochs <= 30:
            raise ValueError(f"epochs must be in [1, 30], got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.label_mode not in LABEL_MODES:
            raise ValueError(
                f"label_mode must be one of {LABEL_MODES}, got {self.label_mode!r}"
            )


@dataclass(frozen=True)
class ExportJob:
    """One export run: which model, which corpus, where to write.

    `model` is a HuggingFace model name or a local checkpoint directory.
    `finetune` enables partisanship finetuning before export; when None the
    model is used as loaded.
    """

    model: str
    corpus_path: str
    output_dir: str
    max_seq_len: int = 512
    finetune: FinetuneSettings | None = None

    def __post_init__(self) -> None:
        if self.max_seq_len < 3:  # room for at least [CLS], one piece, [SEP]
            raise ValueError(f"max_seq_len must be >= 3, got {self.max_seq_len}")


@dataclass(frozen=True)
class CorpusDoc:
    doc_id: str
    side: int  # 1 liberal, 0 conservative
    tokens: tuple[str, ...]


def read_corpus(path: str | Path) -> list[CorpusDoc]:
    """Read the token-list JSONL; validates ids, sides and token types."""
    docs: list[CorpusDoc] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from None
            missing = {"id", "side", "tokens"} - set(record)
            if missing:
                raise ValueError(f"{path}: line {lineno}: missing fields {sorted(missing)}")
            doc_id = str(record["id"])
            if doc_id in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate doc id {doc_id!r}")
            seen.add(doc_id)
            side = int(record["side"])
            if side not in (0, 1):
                raise ValueError(f"{path}: line {lineno}: side must be 0 or 1, got {side}")
            tokens = record["tokens"]
            if not isinstance(tokens, list):
                raise ValueError(f"{path}: line {lineno}: tokens must be a list")
            docs.append(CorpusDoc(doc_id=doc_id, side=side, tokens=tuple(str(t) for t in tokens)))
    if not docs:
        raise ValueError(f"{path}: corpus has no documents")
    return docs


def read_split(path: str | Path) -> tuple[list[str], list[str]]:
    """Read the upstream topicality split file: {"train": [...], "validation": [...]}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    missing = {"train", "validation"} - set(data)
    if missing:
        raise ValueError(f"{path}: split file is missing fields {sorted(missing)}")
    return [str(d) for d in data["train"]], [str(d) for d in data["validation"]]
