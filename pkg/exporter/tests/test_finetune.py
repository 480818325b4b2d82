"""Finetuning behavior: label modes, checkpointing, validation F1."""

import json

import pytest
import torch
from transformers import AutoModel

from hf_exporter import (
    ExportJob,
    FinetuneSettings,
    binary_f1,
    export_embeddings,
    finetune_partisanship,
)
from tiny_bert import marker_corpus, write_split, write_tokens_jsonl


@pytest.fixture()
def marker_setup(tmp_path):
    docs = marker_corpus(n_docs=50, seed=3, marker_count=2)
    corpus = write_tokens_jsonl(tmp_path / "tokens.jsonl", docs)
    split = write_split(
        tmp_path / "split.json",
        [d["id"] for d in docs[:40]],
        [d["id"] for d in docs[40:]],
    )
    return corpus, split


def marker_job(model_dir, corpus, tmp_path, split, **settings) -> ExportJob:
    defaults = dict(
        learning_rate=5e-3, batch_size=16, epochs=5, seed=0, split_path=str(split)
    )
    defaults.update(settings)
    return ExportJob(
        model=model_dir,
        corpus_path=str(corpus),
        output_dir=str(tmp_path / "ft"),
        max_seq_len=16,
        finetune=FinetuneSettings(**defaults),
    )


class TestBinaryF1:
    def test_perfect(self):
        assert binary_f1([1, 0, 1], [1, 0, 1]) == 1.0

    def test_all_wrong(self):
        assert binary_f1([0, 1], [1, 0]) == 0.0

    def test_mixed(self):
        # TP=1, FP=1, FN=1 -> F1 = 2/(2+1+1)
        assert binary_f1([1, 1, 0], [1, 0, 1]) == pytest.approx(0.5)

    def test_degenerate_is_zero(self):
        assert binary_f1([0, 0], [0, 0]) == 0.0


class TestFinetune:
    def test_marker_fixture_reaches_f1(self, model_dir, marker_setup, tmp_path):
        corpus, split = marker_setup
        result = finetune_partisanship(marker_job(model_dir, corpus, tmp_path, split))
        assert len(result.metrics) <= 5
        assert result.best_val_f1 >= 0.9
        assert result.best_val_f1 == max(row["val_f1"] for row in result.metrics)
        assert (result.checkpoint_dir / "classifier_head.pt").exists()
        assert json.loads(
            (result.checkpoint_dir / "finetune_metrics.json").read_text(encoding="utf-8")
        ) == result.metrics

    def test_checkpoint_is_exportable(self, model_dir, marker_setup, tmp_path):
        corpus, split = marker_setup
        result = finetune_partisanship(
            marker_job(model_dir, corpus, tmp_path, split, epochs=1)
        )
        export = export_embeddings(
            ExportJob(
                model=str(result.checkpoint_dir),
                corpus_path=str(corpus),
                output_dir=str(tmp_path / "emb"),
                max_seq_len=16,
            )
        )
        assert export.n_docs == 50

    def test_finetuning_changes_weights(self, model_dir, marker_setup, tmp_path):
        corpus, split = marker_setup
        result = finetune_partisanship(
            marker_job(model_dir, corpus, tmp_path, split, epochs=1)
        )
        before = AutoModel.from_pretrained(model_dir).state_dict()
        after = AutoModel.from_pretrained(result.checkpoint_dir).state_dict()
        assert any(not torch.equal(before[k], after[k]) for k in before)

    def test_same_seed_reproduces_metrics(self, model_dir, marker_setup, tmp_path):
        corpus, split = marker_setup
        r1 = finetune_partisanship(
            marker_job(model_dir, corpus, tmp_path / "r1", split, epochs=2)
        )
        r2 = finetune_partisanship(
            marker_job(model_dir, corpus, tmp_path / "r2", split, epochs=2)
        )
        assert r1.metrics == r2.metrics

    def test_shuffled_labels_mode_trains(self, model_dir, marker_setup, tmp_path):
        corpus, split = marker_setup
        result = finetune_partisanship(
            marker_job(model_dir, corpus, tmp_path, split,
                       label_mode="shuffled_labels", epochs=2)
        )
        assert len(result.metrics) == 2


class TestLabelModeNone:
    def test_checkpoint_equals_pretrained_weights(self, model_dir, marker_setup, tmp_path):
        corpus, _ = marker_setup
        result = finetune_partisanship(
            ExportJob(
                model=model_dir,
                corpus_path=str(corpus),
                output_dir=str(tmp_path / "ft"),
                finetune=FinetuneSettings(label_mode="none"),
            )
        )
        assert result.metrics == []
        assert result.best_val_f1 is None
        before = AutoModel.from_pretrained(model_dir).state_dict()
        after = AutoModel.from_pretrained(result.checkpoint_dir).state_dict()
        assert set(before) == set(after)
        assert all(torch.equal(before[k], after[k]) for k in before)


class TestFinetuneErrors:
    def test_single_class_raises(self, model_dir, tmp_path):
        docs = [dict(d, side=1) for d in marker_corpus(n_docs=10)]
        corpus = write_tokens_jsonl(tmp_path / "tokens.jsonl", docs)
        split = write_split(
            tmp_path / "split.json", [d["id"] for d in docs[:8]], [d["id"] for d in docs[8:]]
        )
        with pytest.raises(ValueError, match="single-class"):
            finetune_partisanship(marker_job(model_dir, corpus, tmp_path, split, epochs=1))

    def test_missing_split_raises(self, model_dir, marker_setup, tmp_path):
        corpus, _ = marker_setup
        with pytest.raises(ValueError, match="split"):
            finetune_partisanship(
                marker_job(model_dir, corpus, tmp_path, None, split_path=None, epochs=1)
            )

    def test_split_with_unknown_doc_raises(self, model_dir, marker_setup, tmp_path):
        corpus, _ = marker_setup
        split = write_split(tmp_path / "bad_split.json", ["ghost"], [])
        with pytest.raises(ValueError, match="ghost"):
            finetune_partisanship(marker_job(model_dir, corpus, tmp_path, split, epochs=1))

    def test_epochs_out_of_range_raises(self):
        with pytest.raises(ValueError, match=r"epochs must be in \[1, 30\]"):
            FinetuneSettings(epochs=31)

    def test_bad_label_mode_raises(self):
        with pytest.raises(ValueError, match="label_mode"):
            FinetuneSettings(label_mode="sideways")
