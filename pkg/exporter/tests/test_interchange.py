"""Binary layout tests for the interchange writer, against hand-packed bytes."""

import json
import struct

import numpy as np
import pytest

from hf_exporter import DocEmbeddings, encode_doc, write_store


def doc(doc_id="d0", tokens=("ab",), vectors=((1.5, -2.0),), pooled=(0.25, 4.0)):
    return DocEmbeddings(
        doc_id=doc_id,
        tokens=tuple(tokens),
        token_vectors=np.array(vectors, dtype=np.float32).reshape(len(tokens), -1),
        pooled=np.array(pooled, dtype=np.float32),
    )


class TestEncodeDoc:
    def test_layout_matches_hand_packed_bytes(self):
        expected = (
            struct.pack("<4sIIIB", b"PCTE", 1, 1, 2, 1)
            + struct.pack("<H", 2)
            + b"ab"
            + np.array([1.5, -2.0, 0.25, 4.0], dtype="<f4").tobytes()
        )
        assert encode_doc(doc()) == expected

    def test_utf8_token_length_is_byte_length(self):
        data = encode_doc(doc(tokens=("naïve",)))
        (length,) = struct.unpack_from("<H", data, struct.calcsize("<4sIIIB"))
        assert length == len("naïve".encode("utf-8")) == 6

    def test_empty_token_list_still_has_pooled_row(self):
        data = encode_doc(
            DocEmbeddings(
                doc_id="d0",
                tokens=(),
                token_vectors=np.zeros((0, 2), dtype=np.float32),
                pooled=np.array([1.0, 2.0], dtype=np.float32),
            )
        )
        header_size = struct.calcsize("<4sIIIB")
        assert len(data) == header_size + 2 * 4

    def test_overlong_token_raises(self):
        with pytest.raises(ValueError, match="too long"):
            encode_doc(doc(tokens=("x" * 70000,)))

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="token_vectors"):
            DocEmbeddings(
                doc_id="d0", tokens=("a", "b"),
                token_vectors=np.zeros((1, 2), dtype=np.float32),
                pooled=np.zeros(2, dtype=np.float32),
            )
        with pytest.raises(ValueError, match="pooled dim"):
            DocEmbeddings(
                doc_id="d0", tokens=("a",),
                token_vectors=np.zeros((1, 3), dtype=np.float32),
                pooled=np.zeros(2, dtype=np.float32),
            )


class TestWriteStore:
    def test_index_lists_docs_in_order(self, tmp_path):
        index_path = write_store(
            [doc(doc_id="a"), doc(doc_id="b")], tmp_path, encoder_name="hf:test"
        )
        index = json.loads(index_path.read_text(encoding="utf-8"))
        assert index["version"] == 1
        assert index["dim"] == 2
        assert index["encoder"] == "hf:test"
        assert [d["id"] for d in index["docs"]] == ["a", "b"]
        assert all((tmp_path / d["file"]).exists() for d in index["docs"])

    def test_duplicate_doc_id_raises(self, tmp_path):
        with pytest.raises(ValueError, match="duplicate doc id 'a'"):
            write_store([doc(doc_id="a"), doc(doc_id="a")], tmp_path, "hf:test")

    def test_inconsistent_dims_raise(self, tmp_path):
        bad = DocEmbeddings(
            doc_id="b",
            tokens=("t",),
            token_vectors=np.zeros((1, 3), dtype=np.float32),
            pooled=np.zeros(3, dtype=np.float32),
        )
        with pytest.raises(ValueError, match="inconsistent embedding dims"):
            write_store([doc(doc_id="a"), bad], tmp_path, "hf:test")

    def test_empty_store_raises(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            write_store([], tmp_path, "hf:test")

    def test_no_temp_files_left_behind(self, tmp_path):
        write_store([doc(doc_id="a")], tmp_path, "hf:test")
        assert not [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
