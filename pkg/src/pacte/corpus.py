"""Corpus ingestion, token normalization, bigram phrases, and vocabulary."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Sequence


class Side(Enum):
    """Political side of a source. Liberal is the positive class everywhere."""

    LIBERAL = "Liberal"
    CONSERVATIVE = "Conservative"

    @property
    def label(self) -> int:
        return 1 if self is Side.LIBERAL else 0

    @classmethod
    def parse(cls, value: "Side | str") -> "Side":
        if isinstance(value, Side):
            return value
        for side in cls:
            if value == side.value:
                return side
        raise ValueError(f"unknown side {value!r}; expected 'Liberal' or 'Conservative'")


# Classic English stopword list (lowercase), extended below with outlet names.
STOPWORDS: frozenset[str] = frozenset("""
a about above after again against all am an and any are aren't as at be because
been before being below between both but by can't cannot could couldn't did
didn't do does doesn't doing don't down during each few for from further had
hadn't has hasn't have haven't having he he'd he'll he's her here here's hers
herself him himself his how how's i i'd i'll i'm i've if in into is isn't it
it's its itself let's me more most mustn't my myself no nor not of off on once
only or other ought our ours ourselves out over own same shan't she she'd
she'll she's should shouldn't so some such than that that's the their theirs
them themselves then there there's these they they'd they'll they're they've
this those through to too under until up very was wasn't we we'd we'll we're
we've were weren't what what's when when's where where's which while who who's
whom why why's with won't would wouldn't you you'd you'll you're you've your
yours yourself yourselves
""".split())

# Outlet self-mentions leak the label into the text, so they are stopped by default.
DEFAULT_EXTRA_STOPWORDS: frozenset[str] = frozenset({"cnn", "fox", "huffington", "breitbart"})

# Maximal runs of letters/digits, allowing internal apostrophes ("don't", "o'brien").
TOKEN_PATTERN: re.Pattern[str] = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")


@dataclass
class Document:
    """A single article. `tokens` is empty until `preprocess` fills it."""

    id: str
    source: str
    side: Side
    date: str
    raw_text: str
    tokens: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return len(self.tokens) == 0


@dataclass
class Corpus:
    """An ordered collection of documents with unique ids.

    Side- and source-restricted views are new `Corpus` objects sharing the same
    `Document` instances; documents are never mutated after construction.
    """

    documents: list[Document]
    side_filter: Side | None = None

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise ValueError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
        self._by_id = {doc.id: doc for doc in self.documents}

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise KeyError(f"no document with id {doc_id!r}") from None

    @property
    def doc_ids(self) -> list[str]:
        return [doc.id for doc in self.documents]

    @property
    def sources(self) -> set[str]:
        return {doc.source for doc in self.documents}

    def for_side(self, side: Side) -> "Corpus":
        side = Side.parse(side)
        return Corpus([d for d in self.documents if d.side is side], side_filter=side)

    def for_sources(self, sources: Sequence[str]) -> "Corpus":
        wanted = set(sources)
        unknown = wanted - self.sources
        if unknown:
            raise ValueError(f"unknown sources {sorted(unknown)!r}; corpus has {sorted(self.sources)!r}")
        return Corpus([d for d in self.documents if d.source in wanted])

    def without_empty(self) -> "Corpus":
        return Corpus([d for d in self.documents if not d.is_empty], side_filter=self.side_filter)


@dataclass(frozen=True)
class PreprocessConfig:
    """Normalization settings. Stopword matching is on the lowercased token."""

    stopwords: frozenset[str] = STOPWORDS
    extra_stopwords: frozenset[str] = DEFAULT_EXTRA_STOPWORDS
    lemma_map: Mapping[str, str] | None = None
    lowercase: bool = True


def ingest_jsonl(path: str | Path, source_map: Mapping[str, Side | str]) -> Corpus:
    """Load documents from JSONL records {"id", "source", "date", "text"}.

    Duplicate ids are an error; records whose text exactly duplicates an earlier
    record are dropped. Sources must appear in `source_map`.
    """
    sides = {name: Side.parse(side) for name, side in source_map.items()}
    documents: list[Document] = []
    seen_ids: set[str] = set()
    seen_texts: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from None
            missing = {"id", "source", "date", "text"} - record.keys()
            if missing:
                raise ValueError(f"{path}: line {lineno}: missing fields {sorted(missing)}")
            doc_id = str(record["id"])
            source = str(record["source"])
            if source not in sides:
                raise ValueError(
                    f"{path}: line {lineno}: unknown source {source!r}; "
                    f"known sources: {sorted(sides)}"
                )
            if doc_id in seen_ids:
                raise ValueError(f"{path}: line {lineno}: duplicate document id {doc_id!r}")
            seen_ids.add(doc_id)
            text = str(record["text"])
            if text in seen_texts:
                continue
            seen_texts.add(text)
            documents.append(
                Document(
                    id=doc_id,
                    source=source,
                    side=sides[source],
                    date=str(record["date"]),
                    raw_text=text,
                )
            )
    return Corpus(documents)


def tokenize(text: str, config: PreprocessConfig | None = None) -> list[str]:
    config = config or PreprocessConfig()
    if config.lowercase:
        text = text.lower()
    tokens: list[str] = []
    for match in TOKEN_PATTERN.finditer(text):
        token = match.group(0)
        if config.lemma_map is not None:
            token = config.lemma_map.get(token, token)
        lowered = token.lower()
        if lowered in config.stopwords or lowered in config.extra_stopwords:
            continue
        tokens.append(token)
    return tokens


def preprocess(corpus: Corpus, config: PreprocessConfig | None = None) -> Corpus:
    """Tokenize every document. Documents left with no tokens are kept, not dropped."""
    config = config or PreprocessConfig()
    return Corpus(
        [replace(doc, tokens=tokenize(doc.raw_text, config)) for doc in corpus],
        side_filter=corpus.side_filter,
    )


@dataclass(frozen=True)
class BigramModel:
    """Adjacent token pairs accepted as phrases, merged greedily left to right."""

    min_count: int
    threshold: float
    scored_pairs: Mapping[tuple[str, str], float]

    def merge_tokens(self, tokens: Sequence[str]) -> list[str]:
        merged: list[str] = []
        i = 0
        while i < len(tokens):
            if i + 1 < len(tokens) and (tokens[i], tokens[i + 1]) in self.scored_pairs:
                merged.append(tokens[i] + "_" + tokens[i + 1])
                i += 2
            else:
                merged.append(tokens[i])
                i += 1
        return merged

    def apply(self, corpus: Corpus) -> Corpus:
        return Corpus(
            [replace(doc, tokens=self.merge_tokens(doc.tokens)) for doc in corpus],
            side_filter=corpus.side_filter,
        )


def fit_bigrams(corpus: Corpus, min_count: int = 5, threshold: float = 10.0) -> BigramModel:
    """Score adjacent pairs as (count(a,b) - min_count) * N / (count(a) * count(b)).

    N is the corpus token count; pairs need count >= min_count and score >= threshold.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    unigram: Counter[str] = Counter()
    pairs: Counter[tuple[str, str]] = Counter()
    total = 0
    for doc in corpus:
        total += len(doc.tokens)
        unigram.update(doc.tokens)
        pairs.update(zip(doc.tokens, doc.tokens[1:]))
    scored: dict[tuple[str, str], float] = {}
    for (a, b), count in pairs.items():
        if count < min_count:
            continue
        score = (count - min_count) * total / (unigram[a] * unigram[b])
        if score >= threshold:
            scored[(a, b)] = score
    return BigramModel(min_count=min_count, threshold=threshold, scored_pairs=scored)


def bigram_transform(
    corpus: Corpus, min_count: int = 5, threshold: float = 10.0
) -> tuple[BigramModel, Corpus]:
    model = fit_bigrams(corpus, min_count=min_count, threshold=threshold)
    return model, model.apply(corpus)


@dataclass
class Vocabulary:
    """Sorted token list with dense indices assigned lexicographically."""

    tokens: list[str]
    doc_freq: dict[str, int]

    def __post_init__(self) -> None:
        self._index = {token: i for i, token in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise KeyError(f"token {token!r} not in vocabulary") from None

    def get(self, token: str) -> int | None:
        return self._index.get(token)

    def token(self, idx: int) -> str:
        return self.tokens[idx]

    @property
    def sha256(self) -> str:
        import hashlib

        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


def build_vocabulary(
    corpus: Corpus, min_df: int = 1, max_df_fraction: float = 1.0
) -> Vocabulary:
    """Keep tokens whose document frequency lies in [min_df, max_df_fraction * |D|]."""
    if min_df < 1:
        raise ValueError(f"min_df must be >= 1, got {min_df}")
    if not 0.0 < max_df_fraction <= 1.0:
        raise ValueError(f"max_df_fraction must be in (0, 1], got {max_df_fraction}")
    df: Counter[str] = Counter()
    for doc in corpus:
        df.update(set(doc.tokens))
    limit = max_df_fraction * len(corpus)
    kept = sorted(token for token, count in df.items() if min_df <= count <= limit)
    if not kept:
        raise ValueError(
            f"empty vocabulary: no token has document frequency in "
            f"[{min_df}, {max_df_fraction} * {len(corpus)}]"
        )
    return Vocabulary(tokens=kept, doc_freq={t: df[t] for t in kept})


def write_tokens_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write {"id", "side", "tokens"} records; side is 1 for Liberal, 0 otherwise."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(
                json.dumps(
                    {"id": doc.id, "side": doc.side.label, "tokens": doc.tokens},
                    sort_keys=True,
                )
                + "\n"
            )


def read_tokens_jsonl(path: str | Path) -> Corpus:
    """Inverse of `write_tokens_jsonl`; sources are synthesized from the side."""
    documents: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from None
            side = Side.LIBERAL if int(record["side"]) == 1 else Side.CONSERVATIVE
            documents.append(
                Document(
                    id=str(record["id"]),
                    source=side.value,
                    side=side,
                    date="",
                    raw_text="",
                    tokens=[str(t) for t in record["tokens"]],
                )
            )
    return Corpus(documents)
