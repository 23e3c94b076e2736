"""Grammaticality annotation toolkit for child-caregiver conversations."""

__version__ = "0.1.0"

from .chat import AgeSpec, SpeakerRole, Terminator, Transcript, Utterance, clean_utterance, parse_age, parse_chat_file
from .classifiers import (
    ClassWeights,
    GrammaticalityModel,
    LinearSvm,
    MajorityClassBaseline,
    Prediction,
    TrainConfig,
    compute_class_weights,
    ensemble_vote,
    import_external_predictions,
    train_model,
)
from .evaluation import (
    BootstrapConfig,
    EvalReport,
    FoldSpec,
    group_kfold_splits,
    per_category_recall,
    run_cross_validation,
    sweep_context_length,
    sweep_training_size,
)
from .features import FeatureVector, NgramFeaturizer
from .labels import (
    ErrorCategory,
    GoldAnnotation,
    GrammaticalityLabel,
    label_distribution,
    majority_label,
)
from .metrics import accuracy, cohen_kappa, confusion, krippendorff_alpha_ordinal, pcc
from .prep import (
    AnnotationItem,
    Chunk,
    DialectScreenReport,
    build_chunks,
    build_context_window,
    detect_dialect_divergence,
    filter_eligible,
)
from .tokenization import BpeTokenizer
from .trends import LogisticFit, fit_logistic_trend, transcript_proportions
