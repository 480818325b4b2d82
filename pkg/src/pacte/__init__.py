"""Partisanship-aware contextualized topic embeddings for polarization ranking."""

from .corpus import (
    BigramModel,
    Corpus,
    DEFAULT_EXTRA_STOPWORDS,
    Document,
    PreprocessConfig,
    Side,
    STOPWORDS,
    Vocabulary,
    bigram_transform,
    build_vocabulary,
    fit_bigrams,
    ingest_jsonl,
    preprocess,
    read_tokens_jsonl,
    tokenize,
    write_tokens_jsonl,
)
from .topics import (
    LdaModel,
    TopicDocuments,
    TopicKeywords,
    coherence_npmi,
    generate_synthetic_corpus,
    load_lda,
    pair_npmi,
    save_lda,
    select_k,
    top_documents,
    top_keywords,
    topic_npmi,
    train_lda,
)
from .encoder import (
    EncoderConfig,
    EncoderModel,
    TrainConfig,
    encode,
    encode_corpus,
    evaluate_classifier,
    init_encoder,
    load_encoder,
    save_encoder,
    split_by_topicality,
    train_partisanship,
)
from .store import (
    ContextualEncoding,
    EmbeddingStore,
    decode_embedding_file,
    encode_embedding_file,
    import_embedding_store,
    write_embedding_store,
)
from .polarization import (
    DcTopicEmbedding,
    PolarizationScore,
    TopicRanking,
    VariantMode,
    cc_topic_embedding,
    dc_embedding_for_mode,
    dc_keyword_embedding,
    dc_topic_embedding,
    pca_project,
    polarization_score,
    power_iteration_components,
    rank_topics,
    run_variant,
    score_topic,
)
from .loe import (
    LeaveOutResult,
    TokenFrequencyVector,
    leave_out_estimator,
    token_frequency,
    topic_leave_out,
)
from .evaluation import (
    AnnotationSet,
    GroundTruth,
    aggregate_recall,
    final_label,
    gt_polarization_and_ranking,
    leaning,
    load_annotations,
    majority_vote,
    recall_at_k,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline

__version__ = "0.1.0"
