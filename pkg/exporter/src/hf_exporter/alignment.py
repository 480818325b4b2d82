"""Word-token to subword-piece alignment.

The upstream pipeline works with word tokens, including merged bigrams joined
with an underscore ("tax_cuts"). The transformer works with subword pieces.
Each word token maps to the concatenation of its parts' piece sequences (a
plain word has one part; a bigram has two), and its exported vector is the
mean of those pieces' final-layer states.
"""

from __future__ import annotations

from dataclasses import dataclass


class AlignmentError(ValueError):
    """A word token could not be mapped to any subword pieces."""


def word_pieces(tokenizer, word: str) -> list[str]:
    """Subword pieces for one word token.

    Bigram tokens "a_b" yield the pieces of a followed by the pieces of b.
    Raises AlignmentError when any part produces no pieces (e.g. characters
    the tokenizer's normalizer strips entirely).
    """
    pieces: list[str] = []
    for part in word.split("_"):
        sub = tokenizer.tokenize(part)
        if not sub:
            raise AlignmentError(f"token {word!r} has no subword pieces")
        pieces.extend(sub)
    return pieces


@dataclass(frozen=True)
class DocAlignment:
    """Piece-level input for one document plus the word-to-piece span map.

    `input_ids` is [CLS] + pieces + [SEP]; `spans[i]` is the half-open
    position range of kept word `kept[i]` within `input_ids`.
    """

    doc_id: str
    input_ids: tuple[int, ...]
    spans: tuple[tuple[int, int], ...]
    kept: tuple[str, ...]
    omitted: tuple[str, ...]


def align_document(
    tokenizer, doc_id: str, tokens: tuple[str, ...] | list[str], max_seq_len: int
) -> DocAlignment:
    """Map a document's word tokens to one transformer input sequence.

    Words are kept in order until the next word's pieces would push the
    sequence (with [CLS] and [SEP]) past max_seq_len; that word and everything
    after it are omitted, mirroring plain sequence truncation.
    """
    cls_id = tokenizer.cls_token_id
    sep_id = tokenizer.sep_token_id
    if cls_id is None or sep_id is None:
        raise ValueError("tokenizer must define [CLS] and [SEP] tokens")
    ids: list[int] = [cls_id]
    spans: list[tuple[int, int]] = []
    kept: list[str] = []
    omitted: list[str] = []
    for word in tokens:
        if omitted:
            omitted.append(word)
            continue
        try:
            pieces = word_pieces(tokenizer, word)
        except AlignmentError as exc:
            raise AlignmentError(f"document {doc_id!r}: {exc}") from None
        if len(ids) + len(pieces) + 1 > max_seq_len:
            omitted.append(word)
            continue
        start = len(ids)
        ids.extend(tokenizer.convert_tokens_to_ids(pieces))
        spans.append((start, len(ids)))
        kept.append(word)
    ids.append(sep_id)
    return DocAlignment(
        doc_id=doc_id,
        input_ids=tuple(ids),
        spans=tuple(spans),
        kept=tuple(kept),
        omitted=tuple(omitted),
    )
