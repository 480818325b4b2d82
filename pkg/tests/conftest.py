import pytest

from corpus_fixtures import make_doc

from pacte import Corpus, Side


@pytest.fixture
def two_sided_corpus() -> Corpus:
    docs = []
    for i in range(4):
        docs.append(make_doc(f"lib{i}", ["econ", "tax", "budget", f"l{i}"], Side.LIBERAL))
        docs.append(make_doc(f"con{i}", ["econ", "tax", "border", f"c{i}"], Side.CONSERVATIVE))
    return Corpus(docs)
