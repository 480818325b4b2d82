"""Export contextualized word embeddings from HuggingFace transformers in the
embedding interchange format consumed by the topic-polarization pipeline."""

from .alignment import AlignmentError, DocAlignment, align_document, word_pieces
from .export import ExportResult, document_embeddings, export_embeddings
from .finetune import FinetuneResult, binary_f1, finetune_partisanship
from .interchange import DocEmbeddings, atomic_write_bytes, encode_doc, write_store
from .jobs import CorpusDoc, ExportJob, FinetuneSettings, read_corpus, read_split

__version__ = "0.1.0"
