"""Human-annotation evaluation: stance leanings, ground-truth rankings, recall.

Annotation JSON schema:
  {"topics": [{"id": int, "stance0": str, "stance1": str,
               "docs": [{"doc_id": str, "source": str,
                         "labels": [int, int, int], "resolution": int|null}]}]}
Labels are 1 (stance1), 0 (stance0), or -1 (abstention / neither).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

VALID_LABELS = (-1, 0, 1)


@dataclass(frozen=True)
class DocAnnotation:
    doc_id: str
    source: str
    labels: tuple[int, ...]
    resolution: int | None = None


@dataclass(frozen=True)
class TopicAnnotation:
    topic_id: int
    stance0: str
    stance1: str
    docs: tuple[DocAnnotation, ...]


@dataclass
class AnnotationSet:
    topics: dict[int, TopicAnnotation]

    @property
    def topic_ids(self) -> list[int]:
        return sorted(self.topics)

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnnotationSet":
        topics: dict[int, TopicAnnotation] = {}
        for topic in data["topics"]:
            topic_id = int(topic["id"])
            if topic_id in topics:
                raise ValueError(f"duplicate annotated topic id {topic_id}")
            docs = []
            for doc in topic["docs"]:
                labels = tuple(int(x) for x in doc["labels"])
                if len(labels) != 3:
                    raise ValueError(
                        f"doc {doc['doc_id']!r}: expected 3 labels, got {len(labels)}"
                    )
                bad = [x for x in labels if x not in VALID_LABELS]
                if bad:
                    raise ValueError(f"doc {doc['doc_id']!r}: invalid labels {bad}")
                resolution = doc.get("resolution")
                if resolution is not None:
                    resolution = int(resolution)
                    if resolution not in VALID_LABELS:
                        raise ValueError(
                            f"doc {doc['doc_id']!r}: invalid resolution label {resolution}"
                        )
                docs.append(
                    DocAnnotation(
                        doc_id=str(doc["doc_id"]),
                        source=str(doc["source"]),
                        labels=labels,
                        resolution=resolution,
                    )
                )
            topics[topic_id] = TopicAnnotation(
                topic_id=topic_id,
                stance0=str(topic["stance0"]),
                stance1=str(topic["stance1"]),
                docs=tuple(docs),
            )
        return cls(topics=topics)


def load_annotations(path: str | Path) -> AnnotationSet:
    return AnnotationSet.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def majority_vote(
    labels: Sequence[int], resolution: int | None = None, doc_id: str | None = None
) -> int:
    """Most common of three labels; pairwise-distinct labels need the resolution label."""
    where = f" for doc {doc_id!r}" if doc_id else ""
    if len(labels) != 3:
        raise ValueError(f"expected 3 labels{where}, got {len(labels)}")
    top_label, top_count = Counter(labels).most_common(1)[0]
    if top_count >= 2:
        return int(top_label)
    if resolution is None:
        raise ValueError(f"three pairwise distinct labels{where} but no resolution label")
    return int(resolution)


def final_label(doc: DocAnnotation) -> int:
    return majority_vote(doc.labels, doc.resolution, doc_id=doc.doc_id)


def leaning(labels: Sequence[int], include_abstentions: bool = True) -> float:
    """(count of 1s - count of 0s) / denominator.

    The denominator is all labels by default; with include_abstentions=False the
    -1 labels are excluded from it.
    """
    n1 = sum(1 for x in labels if x == 1)
    n0 = sum(1 for x in labels if x == 0)
    denom = len(labels) if include_abstentions else n1 + n0
    if denom == 0:
        raise ValueError("no labels to compute a leaning from")
    return (n1 - n0) / denom


@dataclass
class GroundTruth:
    pair: tuple[str, str]
    leanings: dict[int, tuple[float, float]]  # topic -> (left, right)
    alphas: dict[int, float]
    ranking: list[int]  # alpha descending, ties by topic id
    targets: list[int]  # top target_k of the ranking

    @property
    def labeled_topics(self) -> set[int]:
        return set(self.alphas)


def gt_polarization_and_ranking(
    annotations: AnnotationSet,
    pair: tuple[str, str],
    include_abstentions: bool = True,
    target_k: int = 3,
) -> GroundTruth:
    """Per-topic polarization alpha = |leaning(left) - leaning(right)| / 2.

    Every annotated topic must have documents from both sources of the pair.
    """
    if target_k < 1:
        raise ValueError(f"target_k must be >= 1, got {target_k}")
    leanings: dict[int, tuple[float, float]] = {}
    alphas: dict[int, float] = {}
    for topic_id in sorted(annotations.topics):
        topic = annotations.topics[topic_id]
        per_side = []
        for source in pair:
            docs = [d for d in topic.docs if d.source == source]
            if not docs:
                raise ValueError(
                    f"topic {topic_id} has no annotated documents from source {source!r}"
                )
            per_side.append(leaning([final_label(d) for d in docs], include_abstentions))
        leanings[topic_id] = (per_side[0], per_side[1])
        alphas[topic_id] = abs(per_side[0] - per_side[1]) / 2.0
    ranking = sorted(alphas, key=lambda t: (-alphas[t], t))
    if target_k > len(ranking):
        raise ValueError(
            f"target_k {target_k} exceeds the {len(ranking)} annotated topics"
        )
    return GroundTruth(
        pair=tuple(pair),
        leanings=leanings,
        alphas=alphas,
        ranking=ranking,
        targets=ranking[:target_k],
    )


def recall_at_k(predicted: Sequence[int], gt: GroundTruth, k: int = 3) -> float:
    """|top-k of predicted (restricted to labeled topics) intersect targets| / |targets|.

    `predicted` is a topic id list, most polarized first; it must cover every
    labeled topic so the restriction is well defined.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    labeled = gt.labeled_topics
    if k > len(labeled):
        raise ValueError(f"k={k} exceeds the {len(labeled)} labeled topics")
    restricted = [t for t in predicted if t in labeled]
    missing = labeled - set(restricted)
    if missing:
        raise ValueError(f"predicted ranking is missing labeled topics {sorted(missing)}")
    hits = set(restricted[:k]) & set(gt.targets)
    return len(hits) / len(gt.targets)


def aggregate_recall(values: Mapping | Sequence[float]) -> float:
    """Mean recall over pairs."""
    if isinstance(values, Mapping):
        values = list(values.values())
    if len(values) == 0:
        raise ValueError("no recall values to aggregate")
    return float(np.mean([float(v) for v in values]))
