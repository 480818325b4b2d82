"""Export behavior: determinism, truncation, alignment errors, CLI."""

import json

import pytest

from hf_exporter import ExportJob, export_embeddings
from hf_exporter.cli import main
from tiny_bert import write_tokens_jsonl

DOCS = [
    {"id": "a1", "side": 1, "tokens": ["news", "taxes", "tax_budget", "rights"]},
    {"id": "a2", "side": 0, "tokens": ["climate", "policy", "market"]},
    {"id": "a3", "side": 1, "tokens": []},
]


@pytest.fixture()
def corpus_path(tmp_path):
    return write_tokens_jsonl(tmp_path / "tokens.jsonl", DOCS)


def job(model_dir, corpus_path, out_dir, **kwargs) -> ExportJob:
    return ExportJob(
        model=model_dir, corpus_path=str(corpus_path), output_dir=str(out_dir), **kwargs
    )


class TestExportEmbeddings:
    def test_exports_every_document(self, model_dir, corpus_path, tmp_path):
        result = export_embeddings(job(model_dir, corpus_path, tmp_path / "out"))
        assert result.n_docs == 3
        assert result.dim == 32
        assert result.omitted == {}
        index = json.loads(result.index_path.read_text(encoding="utf-8"))
        assert [d["id"] for d in index["docs"]] == ["a1", "a2", "a3"]
        assert [d["n_tokens"] for d in index["docs"]] == [4, 3, 0]
        assert index["encoder"] == "hf:ckpt"

    def test_repeat_export_is_byte_identical(self, model_dir, corpus_path, tmp_path):
        r1 = export_embeddings(job(model_dir, corpus_path, tmp_path / "out1"))
        r2 = export_embeddings(job(model_dir, corpus_path, tmp_path / "out2"))
        files1 = sorted(p.name for p in r1.index_path.parent.iterdir())
        files2 = sorted(p.name for p in r2.index_path.parent.iterdir())
        assert files1 == files2
        for name in files1:
            assert (r1.index_path.parent / name).read_bytes() == (
                r2.index_path.parent / name
            ).read_bytes()

    def test_truncation_warns_and_omits_token_rows(self, model_dir, tmp_path):
        corpus = write_tokens_jsonl(
            tmp_path / "tokens.jsonl",
            [{"id": "long1", "side": 1,
              "tokens": ["news", "taxes", "market", "trade", "vote"]}],
        )
        with pytest.warns(UserWarning, match=r"'long1'.*omitted 1 of 5"):
            result = export_embeddings(
                job(model_dir, corpus, tmp_path / "out", max_seq_len=7)
            )
        assert result.omitted == {"long1": 1}
        index = json.loads(result.index_path.read_text(encoding="utf-8"))
        assert index["docs"][0]["n_tokens"] == 4

    def test_alignment_failure_names_document_and_token(self, model_dir, tmp_path):
        corpus = write_tokens_jsonl(
            tmp_path / "tokens.jsonl",
            [{"id": "bad7", "side": 0, "tokens": ["news", "́"]}],
        )
        with pytest.raises(ValueError, match=r"document 'bad7'.*'́'"):
            export_embeddings(job(model_dir, corpus, tmp_path / "out"))

    def test_unknown_words_export_via_unk_piece(self, model_dir, tmp_path):
        corpus = write_tokens_jsonl(
            tmp_path / "tokens.jsonl",
            [{"id": "u1", "side": 0, "tokens": ["zzzq", "news"]}],
        )
        result = export_embeddings(job(model_dir, corpus, tmp_path / "out"))
        index = json.loads(result.index_path.read_text(encoding="utf-8"))
        assert index["docs"][0]["n_tokens"] == 2


class TestCorpusValidation:
    def test_empty_corpus_raises(self, model_dir, tmp_path):
        path = tmp_path / "tokens.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError, match="no documents"):
            export_embeddings(job(model_dir, path, tmp_path / "out"))

    def test_duplicate_ids_raise_with_line_number(self, model_dir, tmp_path):
        path = write_tokens_jsonl(
            tmp_path / "tokens.jsonl",
            [{"id": "x", "side": 0, "tokens": []}, {"id": "x", "side": 1, "tokens": []}],
        )
        with pytest.raises(ValueError, match="line 2: duplicate doc id 'x'"):
            export_embeddings(job(model_dir, path, tmp_path / "out"))

    def test_missing_field_raises(self, model_dir, tmp_path):
        path = tmp_path / "tokens.jsonl"
        path.write_text(json.dumps({"id": "x", "tokens": []}) + "\n", encoding="utf-8")
        with pytest.raises(ValueError, match=r"missing fields \['side'\]"):
            export_embeddings(job(model_dir, path, tmp_path / "out"))

    def test_bad_side_raises(self, model_dir, tmp_path):
        path = write_tokens_jsonl(
            tmp_path / "tokens.jsonl", [{"id": "x", "side": 2, "tokens": []}]
        )
        with pytest.raises(ValueError, match="side must be 0 or 1"):
            export_embeddings(job(model_dir, path, tmp_path / "out"))

    def test_max_seq_len_too_small_raises(self, model_dir, corpus_path, tmp_path):
        with pytest.raises(ValueError, match="max_seq_len"):
            job(model_dir, corpus_path, tmp_path / "out", max_seq_len=2)


class TestCli:
    def test_export_subcommand(self, model_dir, corpus_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            ["export", "--model", model_dir, "--corpus", str(corpus_path),
             "--out", str(out), "--max-seq-len", "32"]
        )
        assert code == 0
        assert (out / "index.json").exists()
        assert "exported 3 documents" in capsys.readouterr().out

    def test_errors_exit_nonzero(self, model_dir, tmp_path, capsys):
        missing = tmp_path / "nope.jsonl"
        code = main(
            ["export", "--model", model_dir, "--corpus", str(missing),
             "--out", str(tmp_path / "out")]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err
