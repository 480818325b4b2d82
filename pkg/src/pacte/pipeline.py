"""End-to-end runs with content-addressed stage caching.

Each stage writes its outputs plus a manifest.json into its own directory under
the workdir. A stage is rebuilt only when its input key (config fields plus the
keys of upstream stages) changes; builds go to a temp directory that is swapped
in whole, so partial outputs are never visible. Reports contain no paths or
timestamps and rerun byte-identically for the same config and seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import shutil
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import loe as loe_mod
from .corpus import (
    Corpus,
    Document,
    PreprocessConfig,
    Side,
    Vocabulary,
    BigramModel,
    bigram_transform,
    build_vocabulary,
    ingest_jsonl,
    preprocess,
    write_tokens_jsonl,
    DEFAULT_EXTRA_STOPWORDS,
)
from .encoder import (
    EncoderConfig,
    EncoderModel,
    TrainConfig,
    encode,
    load_encoder,
    save_encoder,
    split_by_topicality,
    train_partisanship,
)
from .evaluation import aggregate_recall, gt_polarization_and_ranking, load_annotations, recall_at_k
from .polarization import (
    PolarizationScore,
    TopicRanking,
    VariantMode,
    dc_embedding_for_mode,
    pca_project,
    rank_topics,
    run_variant,
)
from .store import EmbeddingStore, atomic_write_text, import_embedding_store, write_embedding_store
from .topics import (
    LdaModel,
    load_lda,
    save_lda,
    select_k,
    top_documents,
    top_keywords,
    train_lda,
)

DEFAULT_K_GRID = (10, 20, 30, 40, 50)
STAGE_ORDER = (
    "preprocess",
    "selectk",
    "lda",
    "split",
    "train",
    "embed",
    "rank",
    "loe",
    "eval",
    "report",
)


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: str
    workdir: str
    source_map: Mapping[str, str]
    # preprocessing
    lowercase: bool = True
    extra_stopwords: tuple[str, ...] = tuple(sorted(DEFAULT_EXTRA_STOPWORDS))
    bigrams: bool = True
    bigram_min_count: int = 5
    bigram_threshold: float = 10.0
    min_df: int = 1
    max_df_fraction: float = 1.0
    # topic model
    n_topics: int | None = None
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    lda_iterations: int = 200
    seed: int = 0
    m_keywords: int = 10
    n_docs: int = 10
    exclude_topics: tuple[int, ...] = ()
    # encoder
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int = 128
    max_len: int = 256
    # finetuning
    learning_rate: float = 1e-5
    weight_decay: float = 5e-4
    batch_size: int = 64
    epochs: int = 30
    topical_threshold: float = 0.15
    # scoring
    variant: str = VariantMode.PACTE.value
    pairs: tuple[tuple[str, str], ...] | None = None
    embedding_store: str | None = None
    # evaluation
    annotations_path: str | None = None
    include_abstentions: bool = True
    recall_k: int = 3

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = {"corpus_path", "workdir", "source_map"} - set(data)
        if missing:
            raise ValueError(f"config is missing required keys: {sorted(missing)}")
        cleaned = dict(data)
        cleaned["source_map"] = dict(data["source_map"])
        if "extra_stopwords" in cleaned:
            cleaned["extra_stopwords"] = tuple(sorted(cleaned["extra_stopwords"]))
        if "k_grid" in cleaned:
            cleaned["k_grid"] = tuple(int(k) for k in cleaned["k_grid"])
        if "exclude_topics" in cleaned:
            cleaned["exclude_topics"] = tuple(int(t) for t in cleaned["exclude_topics"])
        if cleaned.get("pairs") is not None:
            cleaned["pairs"] = tuple((str(a), str(b)) for a, b in cleaned["pairs"])
        config = cls(**cleaned)
        VariantMode.parse(config.variant)
        for source, side in config.source_map.items():
            Side.parse(side)
        return config

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping | None = None) -> "PipelineConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def cache_fields(self) -> dict:
        """Config fields that affect outputs; paths and workdir are replaced by hashes
        elsewhere so runs in different directories can share cache keys."""
        skip = {"corpus_path", "workdir", "annotations_path", "embedding_store"}
        out = {}
        for f in fields(self):
            if f.name in skip:
                continue
            value = getattr(self, f.name)
            if isinstance(value, Mapping):
                value = dict(sorted(value.items()))
            elif isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out


def _canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _hash_material(material) -> str:
    return hashlib.sha256(
        json.dumps(material, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def _hash_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class StageRunner:
    """Builds stages into temp dirs and swaps them in; reuses matching cached dirs."""

    def __init__(self, workdir: str | Path):
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.statuses: dict[str, str] = {}
        self.keys: dict[str, str] = {}
        for stale in self.workdir.glob(".tmp-*"):
            shutil.rmtree(stale, ignore_errors=True)

    def stage_dir(self, name: str) -> Path:
        return self.workdir / name

    def run(self, name: str, key_material, build: Callable[[Path], None]) -> Path:
        key = _hash_material(key_material)
        self.keys[name] = key
        stage_dir = self.stage_dir(name)
        manifest_path = stage_dir / "manifest.json"
        if manifest_path.exists():
            try:
                manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                manifest = None
            if manifest and manifest.get("key") == key:
                self.statuses[name] = "cached"
                return stage_dir
        tmp = self.workdir / f".tmp-{name}"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        build(tmp)
        atomic_write_text(
            tmp / "manifest.json", _canonical_json({"stage": name, "version": 1, "key": key})
        )
        if stage_dir.exists():
            shutil.rmtree(stage_dir)
        tmp.replace(stage_dir)
        self.statuses[name] = "computed"
        return stage_dir

    def skip(self, name: str, status: str = "skipped") -> None:
        self.statuses[name] = status


def _write_docs_jsonl(corpus: Corpus, path: Path) -> None:
    lines = [
        json.dumps(
            {
                "id": doc.id,
                "source": doc.source,
                "side": doc.side.value,
                "date": doc.date,
                "tokens": doc.tokens,
            },
            sort_keys=True,
        )
        for doc in corpus
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def _read_docs_jsonl(path: Path) -> Corpus:
    documents = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            documents.append(
                Document(
                    id=rec["id"],
                    source=rec["source"],
                    side=Side.parse(rec["side"]),
                    date=rec["date"],
                    raw_text="",
                    tokens=list(rec["tokens"]),
                )
            )
    return Corpus(documents)


def _write_vocab(vocabulary: Vocabulary, path: Path) -> None:
    atomic_write_text(
        path,
        _canonical_json(
            {
                "tokens": vocabulary.tokens,
                "doc_freq": [vocabulary.doc_freq[t] for t in vocabulary.tokens],
            }
        ),
    )


def _read_vocab(path: Path) -> Vocabulary:
    data = json.loads(path.read_text(encoding="utf-8"))
    return Vocabulary(
        tokens=list(data["tokens"]),
        doc_freq=dict(zip(data["tokens"], data["doc_freq"])),
    )


def _write_bigrams(model: BigramModel, path: Path) -> None:
    pairs = sorted(
        [[a, b, score] for (a, b), score in model.scored_pairs.items()],
        key=lambda row: (row[0], row[1]),
    )
    atomic_write_text(
        path,
        _canonical_json(
            {"min_count": model.min_count, "threshold": model.threshold, "pairs": pairs}
        ),
    )


def _pair_slug(pair: tuple[str, str]) -> str:
    def clean(name: str) -> str:
        return "".join(c if c.isalnum() else "-" for c in name)

    return f"{clean(pair[0])}_vs_{clean(pair[1])}"


def _resolve_pairs(config: PipelineConfig) -> list[dict]:
    """Each entry: {"pair": (left, right), "sources": (l, r) | None}; None means
    the aggregate Liberal-vs-Conservative comparison over the whole corpus."""
    if config.pairs is None:
        return [{"pair": (Side.LIBERAL.value, Side.CONSERVATIVE.value), "sources": None}]
    out = []
    for left, right in config.pairs:
        for name in (left, right):
            if name not in config.source_map:
                raise ValueError(f"pair source {name!r} is not in source_map")
        if Side.parse(config.source_map[left]) is not Side.LIBERAL:
            raise ValueError(f"pair left source {left!r} must map to Liberal")
        if Side.parse(config.source_map[right]) is not Side.CONSERVATIVE:
            raise ValueError(f"pair right source {right!r} must map to Conservative")
        out.append({"pair": (left, right), "sources": (left, right)})
    return out


def _pair_corpus(corpus: Corpus, entry: dict) -> Corpus:
    if entry["sources"] is None:
        return corpus
    return corpus.for_sources(entry["sources"])


def _ranking_payload(ranking: TopicRanking) -> dict:
    return {
        "pair": list(ranking.pair),
        "variant": ranking.variant,
        "scores": [
            {"topic": s.topic_id, "cosine": s.cosine, "beta": s.beta}
            for s in sorted(ranking.scores, key=lambda s: s.topic_id)
        ],
        "ranking": ranking.topic_order,
    }


@dataclass
class PipelineResult:
    workdir: Path
    statuses: dict[str, str]
    report_path: Path | None = None


def run_pipeline(config: PipelineConfig, until: str = "report") -> PipelineResult:
    if until not in STAGE_ORDER:
        raise ValueError(f"unknown stage {until!r}; expected one of {list(STAGE_ORDER)}")
    stop = STAGE_ORDER.index(until)
    runner = StageRunner(config.workdir)
    variant = VariantMode.parse(config.variant)
    cache_cfg = config.cache_fields()
    corpus_sha = _hash_file(config.corpus_path)

    # --- preprocess ---------------------------------------------------------
    pre_keys = {
        k: cache_cfg[k]
        for k in (
            "lowercase",
            "extra_stopwords",
            "bigrams",
            "bigram_min_count",
            "bigram_threshold",
            "min_df",
            "max_df_fraction",
        )
    }

    def build_preprocess(out: Path) -> None:
        raw = ingest_jsonl(config.corpus_path, dict(config.source_map))
        pre_cfg = PreprocessConfig(
            extra_stopwords=frozenset(config.extra_stopwords), lowercase=config.lowercase
        )
        processed = preprocess(raw, pre_cfg)
        if config.bigrams:
            bigram_model, processed = bigram_transform(
                processed,
                min_count=config.bigram_min_count,
                threshold=config.bigram_threshold,
            )
        else:
            bigram_model = BigramModel(
                min_count=config.bigram_min_count,
                threshold=config.bigram_threshold,
                scored_pairs={},
            )
        vocabulary = build_vocabulary(
            processed, min_df=config.min_df, max_df_fraction=config.max_df_fraction
        )
        _write_docs_jsonl(processed, out / "docs.jsonl")
        write_tokens_jsonl(processed, out / "tokens.jsonl")
        _write_vocab(vocabulary, out / "vocab.json")
        _write_bigrams(bigram_model, out / "bigram.json")
        empty_ids = [doc.id for doc in processed if doc.is_empty]
        atomic_write_text(
            out / "stats.json",
            _canonical_json(
                {
                    "n_documents": len(processed),
                    "n_empty_documents": len(empty_ids),
                    "empty_doc_ids": empty_ids,
                    "vocab_size": len(vocabulary),
                }
            ),
        )

    pre_dir = runner.run("preprocess", {"corpus_sha256": corpus_sha, **pre_keys}, build_preprocess)
    if stop <= STAGE_ORDER.index("preprocess"):
        return PipelineResult(runner.workdir, runner.statuses)

    corpus = _read_docs_jsonl(pre_dir / "docs.jsonl")
    vocabulary = _read_vocab(pre_dir / "vocab.json")

    # --- select K -----------------------------------------------------------
    lda_params = {
        k: cache_cfg[k] for k in ("lda_alpha", "lda_beta", "lda_iterations", "seed", "m_keywords")
    }
    modeled = Corpus(
        [doc for doc in corpus if any(t in vocabulary for t in doc.tokens)]
    )

    if config.n_topics is None:
        def build_selectk(out: Path) -> None:
            chosen, scores = select_k(
                modeled,
                vocabulary,
                config.k_grid,
                iterations=config.lda_iterations,
                seed=config.seed,
                m=config.m_keywords,
                alpha=config.lda_alpha,
                beta=config.lda_beta,
            )
            atomic_write_text(
                out / "selection.json",
                _canonical_json(
                    {"chosen": chosen, "scores": {str(k): v for k, v in scores.items()}}
                ),
            )

        selectk_dir = runner.run(
            "selectk",
            {"preprocess": runner.keys["preprocess"], "k_grid": list(config.k_grid), **lda_params},
            build_selectk,
        )
        selection = json.loads((selectk_dir / "selection.json").read_text(encoding="utf-8"))
        n_topics = int(selection["chosen"])
    else:
        runner.skip("selectk")
        selection = None
        n_topics = int(config.n_topics)
    if stop <= STAGE_ORDER.index("selectk"):
        return PipelineResult(runner.workdir, runner.statuses)

    # --- LDA ----------------------------------------------------------------
    def build_lda(out: Path) -> None:
        model = train_lda(
            modeled,
            vocabulary,
            n_topics,
            alpha=config.lda_alpha,
            beta=config.lda_beta,
            iterations=config.lda_iterations,
            seed=config.seed,
        )
        save_lda(model, out)
        keywords = {
            str(t): [[w, token] for w, token in top_keywords(model, t, config.m_keywords).entries]
            for t in range(model.n_topics)
        }
        atomic_write_text(out / "keywords.json", _canonical_json(keywords))

    lda_dir = runner.run(
        "lda",
        {"preprocess": runner.keys["preprocess"], "n_topics": n_topics, **lda_params},
        build_lda,
    )
    if stop <= STAGE_ORDER.index("lda"):
        return PipelineResult(runner.workdir, runner.statuses)

    model = load_lda(lda_dir, vocabulary)
    topic_ids = [t for t in range(model.n_topics) if t not in set(config.exclude_topics)]
    if not topic_ids:
        raise ValueError("exclude_topics removes every topic")

    # --- topicality split ---------------------------------------------------
    def build_split(out: Path) -> None:
        train_c, val_c = split_by_topicality(
            modeled, model.theta_for, threshold=config.topical_threshold
        )
        atomic_write_text(
            out / "split.json",
            _canonical_json(
                {
                    "threshold": config.topical_threshold,
                    "train": train_c.doc_ids,
                    "validation": val_c.doc_ids,
                }
            ),
        )

    split_dir = runner.run(
        "split",
        {"lda": runner.keys["lda"], "threshold": config.topical_threshold},
        build_split,
    )
    if stop <= STAGE_ORDER.index("split"):
        return PipelineResult(runner.workdir, runner.statuses)

    split_data = json.loads((split_dir / "split.json").read_text(encoding="utf-8"))

    encoder_cfg = EncoderConfig(
        vocab_size=len(vocabulary),
        d_model=config.d_model,
        n_heads=config.n_heads,
        n_layers=config.n_layers,
        ffn_dim=config.ffn_dim,
        max_len=config.max_len,
    )

    external_store = config.embedding_store is not None
    pairs = _resolve_pairs(config)

    if external_store:
        runner.skip("train", "external")
        runner.skip("embed", "external")
        store_key = _hash_file(config.embedding_store)
        if stop <= STAGE_ORDER.index("embed"):
            return PipelineResult(runner.workdir, runner.statuses)
    else:
        # --- finetune -------------------------------------------------------
        train_cfg = TrainConfig(
            learning_rate=config.learning_rate,
            weight_decay=config.weight_decay,
            batch_size=config.batch_size,
            epochs=config.epochs,
            seed=config.seed,
            label_mode=variant.label_mode,
        )

        def build_train(out: Path) -> None:
            by_id = {doc.id: doc for doc in modeled}
            train_c = Corpus([by_id[i] for i in split_data["train"]])
            val_c = Corpus([by_id[i] for i in split_data["validation"]])
            trained, metrics = train_partisanship(
                encoder_cfg, train_c, val_c, train_cfg, vocabulary
            )
            save_encoder(trained, out)
            atomic_write_text(out / "metrics.json", _canonical_json(metrics))

        train_dir = runner.run(
            "train",
            {
                "split": runner.keys["split"],
                "encoder": [
                    encoder_cfg.d_model,
                    encoder_cfg.n_heads,
                    encoder_cfg.n_layers,
                    encoder_cfg.ffn_dim,
                    encoder_cfg.max_len,
                ],
                "train": [
                    train_cfg.learning_rate,
                    train_cfg.weight_decay,
                    train_cfg.batch_size,
                    train_cfg.epochs,
                    train_cfg.seed,
                    train_cfg.label_mode,
                ],
            },
            build_train,
        )
        if stop <= STAGE_ORDER.index("train"):
            return PipelineResult(runner.workdir, runner.statuses)

        # --- embed top documents ---------------------------------------------
        def needed_doc_ids() -> list[str]:
            needed: set[str] = set()
            for entry in pairs:
                sub = _pair_corpus(modeled, entry)
                for topic in topic_ids:
                    for side in (Side.LIBERAL, Side.CONSERVATIVE):
                        ranked = top_documents(model, sub, side, topic, config.n_docs)
                        needed.update(ranked.doc_ids)
            return sorted(needed)

        def build_embed(out: Path) -> None:
            trained = load_encoder(train_dir)
            encodings = (
                encode(trained, modeled.get(doc_id)) for doc_id in needed_doc_ids()
            )
            write_embedding_store(
                encodings, out, encoder_name=f"pacte:{variant.value}:seed{config.seed}"
            )

        embed_dir = runner.run(
            "embed",
            {
                "train": runner.keys["train"],
                "n_docs": config.n_docs,
                "pairs": [list(e["pair"]) for e in pairs],
                "exclude": list(config.exclude_topics),
            },
            build_embed,
        )
        store_key = runner.keys["embed"]
        if stop <= STAGE_ORDER.index("embed"):
            return PipelineResult(runner.workdir, runner.statuses)

    def open_store() -> EmbeddingStore:
        if external_store:
            return import_embedding_store(config.embedding_store)
        return import_embedding_store(embed_dir / "index.json")

    # --- rank topics ----------------------------------------------------------
    def build_rank(out: Path) -> None:
        store = open_store()
        combined = {}
        for entry in pairs:
            sub = _pair_corpus(modeled, entry)
            ranking = run_variant(
                variant,
                sub,
                model,
                store,
                pair=entry["pair"],
                m=config.m_keywords,
                n=config.n_docs,
                topic_ids=topic_ids,
            )
            payload = _ranking_payload(ranking)
            slug = _pair_slug(entry["pair"])
            atomic_write_text(out / f"scores_{slug}.json", _canonical_json(payload))
            combined[slug] = payload
        atomic_write_text(out / "rankings.json", _canonical_json(combined))

    rank_dir = runner.run(
        "rank",
        {
            "lda": runner.keys["lda"],
            "store": store_key,
            "variant": variant.value,
            "m": config.m_keywords,
            "n": config.n_docs,
            "pairs": [list(e["pair"]) for e in pairs],
            "exclude": list(config.exclude_topics),
        },
        build_rank,
    )
    if stop <= STAGE_ORDER.index("rank"):
        return PipelineResult(runner.workdir, runner.statuses)

    # --- leave-out baseline ---------------------------------------------------
    def build_loe(out: Path) -> None:
        combined = {}
        for entry in pairs:
            sub = _pair_corpus(modeled, entry)
            scores = []
            pis = {}
            for topic in topic_ids:
                result = loe_mod.topic_leave_out(model, sub, topic, n=config.n_docs)
                scores.append(
                    PolarizationScore(
                        topic_id=topic, cosine=1.0 - 2.0 * result.pi, beta=result.pi
                    )
                )
                pis[str(topic)] = result.pi
            ranking = rank_topics(scores, pair=entry["pair"], variant="LOE")
            payload = _ranking_payload(ranking)
            payload["pi"] = pis
            slug = _pair_slug(entry["pair"])
            atomic_write_text(out / f"loe_{slug}.json", _canonical_json(payload))
            combined[slug] = payload
        atomic_write_text(out / "loe.json", _canonical_json(combined))

    loe_dir = runner.run(
        "loe",
        {
            "lda": runner.keys["lda"],
            "n": config.n_docs,
            "pairs": [list(e["pair"]) for e in pairs],
            "exclude": list(config.exclude_topics),
        },
        build_loe,
    )
    if stop <= STAGE_ORDER.index("loe"):
        return PipelineResult(runner.workdir, runner.statuses)

    # --- evaluation against annotations ---------------------------------------
    rankings = json.loads((rank_dir / "rankings.json").read_text(encoding="utf-8"))
    loe_rankings = json.loads((loe_dir / "loe.json").read_text(encoding="utf-8"))

    if config.annotations_path is not None:
        annotations_sha = _hash_file(config.annotations_path)

        def build_eval(out: Path) -> None:
            annotations = load_annotations(config.annotations_path)
            per_pair: dict[str, dict] = {}
            for entry in pairs:
                slug = _pair_slug(entry["pair"])
                gt = gt_polarization_and_ranking(
                    annotations,
                    entry["pair"],
                    include_abstentions=config.include_abstentions,
                    target_k=config.recall_k,
                )
                per_pair[slug] = {
                    "pair": list(entry["pair"]),
                    "gt_ranking": gt.ranking,
                    "targets": gt.targets,
                    "alphas": {str(t): gt.alphas[t] for t in sorted(gt.alphas)},
                    variant.value: recall_at_k(
                        rankings[slug]["ranking"], gt, k=config.recall_k
                    ),
                    "LOE": recall_at_k(loe_rankings[slug]["ranking"], gt, k=config.recall_k),
                }
            aggregate = {
                variant.value: aggregate_recall(
                    {slug: row[variant.value] for slug, row in per_pair.items()}
                ),
                "LOE": aggregate_recall({slug: row["LOE"] for slug, row in per_pair.items()}),
            }
            atomic_write_text(
                out / "recall.json",
                _canonical_json(
                    {
                        "k": config.recall_k,
                        "include_abstentions": config.include_abstentions,
                        "pairs": per_pair,
                        "aggregate": aggregate,
                    }
                ),
            )

        eval_dir = runner.run(
            "eval",
            {
                "rank": runner.keys["rank"],
                "loe": runner.keys["loe"],
                "annotations_sha256": annotations_sha,
                "include_abstentions": config.include_abstentions,
                "recall_k": config.recall_k,
            },
            build_eval,
        )
        recall_data = json.loads((eval_dir / "recall.json").read_text(encoding="utf-8"))
    else:
        runner.skip("eval")
        recall_data = None
    if stop <= STAGE_ORDER.index("eval"):
        return PipelineResult(runner.workdir, runner.statuses)

    # --- report ----------------------------------------------------------------
    keywords_data = json.loads((lda_dir / "keywords.json").read_text(encoding="utf-8"))

    def build_report(out: Path) -> None:
        report = {
            "tool": "pacte 0.1.0",
            "config": cache_cfg,
            "inputs": {"corpus_sha256": corpus_sha},
            "n_topics": n_topics,
            "selectk": selection,
            "topic_keywords": keywords_data,
            "rankings": rankings,
            "loe": loe_rankings,
            "recall": recall_data,
        }
        if config.annotations_path is not None:
            report["inputs"]["annotations_sha256"] = _hash_file(config.annotations_path)
        atomic_write_text(out / "report.json", _canonical_json(report))
        atomic_write_text(out / "report.md", _render_markdown(report))
        _write_pca_csv(out / "pca.csv", model, modeled, open_store(), pairs, topic_ids, config)

    report_dir = runner.run(
        "report",
        {
            "rank": runner.keys["rank"],
            "loe": runner.keys["loe"],
            "eval": runner.keys.get("eval"),
            "selectk": runner.keys.get("selectk"),
        },
        build_report,
    )
    return PipelineResult(runner.workdir, runner.statuses, report_dir / "report.json")


def _render_markdown(report: dict) -> str:
    lines = ["# Polarized topic report", ""]
    lines.append(f"Topics: {report['n_topics']}")
    if report.get("selectk"):
        scores = ", ".join(
            f"K={k}: {v:.4f}" for k, v in sorted(report["selectk"]["scores"].items(), key=lambda kv: int(kv[0]))
        )
        lines.append(f"Model selection (NPMI coherence): {scores}")
    lines.append("")
    for slug, payload in sorted(report["rankings"].items()):
        left, right = payload["pair"]
        lines.append(f"## {left} vs {right} ({payload['variant']})")
        lines.append("")
        lines.append("| rank | topic | beta | top keywords |")
        lines.append("|-----:|------:|-----:|:-------------|")
        beta_by_topic = {row["topic"]: row["beta"] for row in payload["scores"]}
        for position, topic in enumerate(payload["ranking"], start=1):
            words = ", ".join(
                token for _, token in report["topic_keywords"][str(topic)][:5]
            )
            lines.append(f"| {position} | {topic} | {beta_by_topic[topic]:.4f} | {words} |")
        lines.append("")
    if report.get("recall"):
        recall = report["recall"]
        methods = sorted(
            {k for row in recall["pairs"].values() for k in row if k in ("LOE",) or k in
             {v.value for v in VariantMode}}
        )
        lines.append(f"## Recall@{recall['k']} against annotated ground truth")
        lines.append("")
        lines.append("| pair | " + " | ".join(methods) + " |")
        lines.append("|:-----|" + "|".join(["----:"] * len(methods)) + "|")
        for slug, row in sorted(recall["pairs"].items()):
            cells = " | ".join(f"{row[m]:.3f}" for m in methods)
            lines.append(f"| {' vs '.join(row['pair'])} | {cells} |")
        aggr = " | ".join(f"{recall['aggregate'][m]:.3f}" for m in methods)
        lines.append(f"| **mean** | {aggr} |")
        lines.append("")
    return "\n".join(lines) + "\n"


def _write_pca_csv(
    path: Path,
    model: LdaModel,
    corpus: Corpus,
    store: EmbeddingStore,
    pairs: list[dict],
    topic_ids: list[int],
    config: PipelineConfig,
) -> None:
    """2-D projection of the DC topic embeddings behind the first pair's scores."""
    entry = pairs[0]
    sub = _pair_corpus(corpus, entry)
    variant = VariantMode.parse(config.variant)
    rows: list[tuple[str, int, str]] = []
    vectors: list[np.ndarray] = []
    for topic in topic_ids:
        keywords = top_keywords(model, topic, config.m_keywords)
        for side in (Side.LIBERAL, Side.CONSERVATIVE):
            ranked = top_documents(model, sub, side, topic, config.n_docs)
            for doc_id in ranked.doc_ids:
                dc = dc_embedding_for_mode(variant, store.get(doc_id), keywords)
                if dc is None:
                    continue
                rows.append((doc_id, topic, side.value))
                vectors.append(dc.vector)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["doc_id", "topic_id", "side", "x", "y"])
    if len(vectors) >= 2 and vectors[0].shape[0] >= 2:
        projected = pca_project(np.stack(vectors), n_components=2)
        for (doc_id, topic, side), point in zip(rows, projected):
            writer.writerow([doc_id, topic, side, f"{point[0]:.10g}", f"{point[1]:.10g}"])
    atomic_write_text(path, buffer.getvalue())
