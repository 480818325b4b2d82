"""Word-to-subword alignment unit tests against the tiny WordPiece vocab."""

import pytest

from hf_exporter import AlignmentError, align_document, word_pieces
from tiny_bert import MULTI_PIECE_WORDS, SINGLE_PIECE_WORDS, make_tokenizer


@pytest.fixture(scope="module")
def tokenizer():
    return make_tokenizer()


class TestWordPieces:
    @pytest.mark.parametrize("word", SINGLE_PIECE_WORDS)
    def test_vocab_words_are_single_piece(self, tokenizer, word):
        assert word_pieces(tokenizer, word) == [word]

    @pytest.mark.parametrize("word,pieces", sorted(MULTI_PIECE_WORDS.items()))
    def test_split_words_decompose(self, tokenizer, word, pieces):
        assert word_pieces(tokenizer, word) == pieces

    def test_bigram_concatenates_part_pieces(self, tokenizer):
        assert word_pieces(tokenizer, "tax_budget") == ["tax", "budget"]

    def test_bigram_with_multi_piece_parts(self, tokenizer):
        assert word_pieces(tokenizer, "climate_policy") == [
            "cli", "##mate", "poli", "##cy",
        ]

    def test_bigram_differs_from_naive_tokenization(self, tokenizer):
        # Tokenizing the joined form directly would split on the underscore
        # and insert an unknown piece for it; the alignment must not.
        assert "[UNK]" in tokenizer.tokenize("tax_budget")
        assert word_pieces(tokenizer, "tax_budget") == ["tax", "budget"]

    def test_out_of_vocabulary_word_maps_to_unknown_piece(self, tokenizer):
        assert word_pieces(tokenizer, "zzzq") == ["[UNK]"]

    def test_word_with_no_pieces_raises(self, tokenizer):
        # A combining accent is stripped entirely by the lowercasing normalizer.
        with pytest.raises(AlignmentError, match="no subword pieces"):
            word_pieces(tokenizer, "́")


class TestAlignDocument:
    def test_sequence_structure(self, tokenizer):
        aligned = align_document(tokenizer, "d0", ["news", "taxes"], max_seq_len=16)
        ids = [tokenizer.cls_token_id]
        ids += tokenizer.convert_tokens_to_ids(["news", "tax", "##es"])
        ids += [tokenizer.sep_token_id]
        assert list(aligned.input_ids) == ids
        assert aligned.spans == ((1, 2), (2, 4))
        assert aligned.kept == ("news", "taxes")
        assert aligned.omitted == ()

    def test_truncation_drops_words_past_the_budget(self, tokenizer):
        aligned = align_document(
            tokenizer, "d0", ["news", "taxes", "market", "trade", "vote"], max_seq_len=7
        )
        assert aligned.kept == ("news", "taxes", "market", "trade")
        assert aligned.omitted == ("vote",)
        assert len(aligned.input_ids) == 7  # [CLS] + 5 pieces + [SEP]

    def test_truncation_is_positional_not_best_fit(self, tokenizer):
        # "immigration" (2 pieces) overflows a 3-position budget; the later
        # 1-piece word would fit but truncation cuts the sequence, not words.
        aligned = align_document(tokenizer, "d0", ["immigration", "news"], max_seq_len=3)
        assert aligned.kept == ()
        assert aligned.omitted == ("immigration", "news")

    def test_alignment_failure_names_document_and_token(self, tokenizer):
        with pytest.raises(AlignmentError, match=r"document 'd9'.*'́'"):
            align_document(tokenizer, "d9", ["news", "́"], max_seq_len=16)

    def test_empty_document_has_only_special_positions(self, tokenizer):
        aligned = align_document(tokenizer, "d0", [], max_seq_len=8)
        assert aligned.spans == ()
        assert list(aligned.input_ids) == [tokenizer.cls_token_id, tokenizer.sep_token_id]
