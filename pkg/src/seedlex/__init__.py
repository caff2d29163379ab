"""Seed-word lexicon induction from pretrained word embeddings, with
bag-of-words scoring and evaluation tools."""

__version__ = "0.1.0"

from .embeddings import (
    CandidateVocab,
    EmbeddingTable,
    LoadStats,
    VocabFilterConfig,
    WordVector,
    cosine,
    estimate_frequency,
    filter_vocabulary,
    load_embeddings,
)
from .errors import (
    ConfigError,
    EmbeddingFormatError,
    LexiconBuildError,
    LexiconFormatError,
    SeedlexError,
)
from .evaluation import (
    ClassificationReport,
    ConfusionMatrix,
    LogisticFit,
    RegressionReport,
    SeedSensitivityReport,
    classification_metrics,
    confusion,
    logistic_fit_accuracy,
    ols_fit,
    seed_sensitivity,
)
from .lexicon import (
    Lexicon,
    LexiconEntry,
    OverlapReport,
    RawPolarityScore,
    SeedSet,
    build_lexicon,
    compare_lexicons,
    export_csv,
    import_csv,
    net_polarity,
    normalize_valences,
    sample_seeds,
)
from .scoring import (
    DocumentScore,
    FramePrediction,
    MatchAttribution,
    TokenizedDoc,
    attribute_matches,
    predict_frame,
    read_corpus,
    score_corpus,
    score_document,
    tokenize,
)
