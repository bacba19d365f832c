"""Multimodal joint embeddings for multiple-choice fill-in-the-blank tasks.

The toolkit covers the full pipeline on precomputed inputs: scored-box
suppression and top-k selection, order-less pooling of proposal features
into an image representation, a power-scaled canonical-correlation joint
space for image/answer retrieval, and an LSTM trained with a cosine
text-embedding loss. A seeded synthetic data generator and a small CLI
chain the pieces end to end.
"""

from .boxes import ScoredBox, greedy_nms, greedy_nms_indices, iou, select_top_k, top_k_indices
from .cca import CcaModel, canonical_trace, fit_cca, load_cca_model, project, save_cca_model
from .data import (
    FeatureStore,
    ImageFeatures,
    ManifestRecord,
    build_cca_training,
    build_lstm_examples,
    load_feature_store,
    parse_manifest,
    pool_image,
    pool_store,
    read_report_jsonl,
    save_feature_store,
    write_manifest,
    write_report_jsonl,
)
from .errors import (
    DataError,
    EmptyPoolError,
    InsufficientSamplesError,
    InvalidInputError,
    MadlibkitError,
    NoDecisionError,
    ParseError,
    ShapeError,
    UnencodableAnswerError,
    ZeroNormError,
)
from .lstm import (
    AdamState,
    LstmConfig,
    LstmExample,
    LstmParams,
    TokenVocab,
    TrainedLstm,
    adam_step,
    backward,
    cosine_loss,
    forward,
    init_params,
    load_checkpoint,
    lstm_step,
    predict,
    save_checkpoint,
    sum_word_vectors,
    train,
)
from .pooling import (
    BLANK_TOKEN,
    UNK_TOKEN,
    EmbeddingTable,
    build_image_representation,
    encode_answer,
    max_pool,
    mean_pool,
    tokenize,
    tokenize_prompt,
)
from .selection import (
    CATEGORIES,
    TASKS,
    CategoryResult,
    EvalReport,
    MadlibInstance,
    aggregate_outcomes,
    choose_completion,
    cosine_similarity,
    evaluate,
    merge_reports,
    render_report_table,
    report_from_records,
    report_records,
)
from .synth import SynthConfig, SynthResult, generate_synthetic

__version__ = "0.1.0"
