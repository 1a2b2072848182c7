"""Sitting-time estimation from wrist-worn accelerometer recordings.

The pipeline: gravity-based pitch/roll recovery -> rotation-vector sequences
-> windowed features (fuzzy entropy, robust statistics, energy) on both raw
and rotation-vector channels -> gradient-boosted sit/non-sit classifier ->
sitting-time totals and sitting-class metrics.
"""

from .errors import (
    CsvFormatError,
    DegenerateGravityError,
    DegenerateTrainingError,
    InvalidArgumentError,
    InvalidRotationError,
    LayoutMismatchError,
    SitwatchError,
)
from .evaluation import (
    CvResult,
    LabelInterval,
    Metrics,
    compute_metrics,
    holdout_eval,
    kfold_cv,
    majority_label,
    majority_labels_for_spans,
    sitting_time,
)
from .features import (
    FeatureConfig,
    FeatureVector,
    ImuRecording,
    ImuSample,
    RotVecSequence,
    SmoothingConfig,
    Window,
    WindowFeatures,
    assemble_features,
    energy,
    feature_names,
    featurize_recording,
    fuzzy_entropy,
    median_gravity,
    rotation_vector_sequence,
    segment_windows,
    stat_descriptors,
)
from .fileio import (
    read_features_csv,
    read_labels_csv,
    read_recording_csv,
    write_features_csv,
    write_labels_csv,
    write_recording_csv,
)
from .geom import (
    EulerPR,
    estimate_pitch_roll,
    gravity_in_watch_frame,
    rotation_matrix_from_vector,
    rotation_matrix_xy,
    rotation_vector_from_gravity,
    rotation_vector_from_matrix,
)
from .model import (
    Model,
    TrainConfig,
    dump_model,
    load_model,
    parse_model,
    predict,
    predict_proba,
    save_model,
    train,
)
from .synth import Scenario, Segment, generate, load_scenario

__version__ = "0.1.0"

__all__ = [
    "CsvFormatError",
    "CvResult",
    "DegenerateGravityError",
    "DegenerateTrainingError",
    "EulerPR",
    "FeatureConfig",
    "FeatureVector",
    "ImuRecording",
    "ImuSample",
    "InvalidArgumentError",
    "InvalidRotationError",
    "LabelInterval",
    "LayoutMismatchError",
    "Metrics",
    "Model",
    "RotVecSequence",
    "Scenario",
    "Segment",
    "SitwatchError",
    "SmoothingConfig",
    "TrainConfig",
    "Window",
    "WindowFeatures",
    "assemble_features",
    "compute_metrics",
    "dump_model",
    "energy",
    "estimate_pitch_roll",
    "feature_names",
    "featurize_recording",
    "fuzzy_entropy",
    "generate",
    "gravity_in_watch_frame",
    "holdout_eval",
    "kfold_cv",
    "load_model",
    "load_scenario",
    "majority_label",
    "majority_labels_for_spans",
    "median_gravity",
    "parse_model",
    "predict",
    "predict_proba",
    "read_features_csv",
    "read_labels_csv",
    "read_recording_csv",
    "rotation_matrix_from_vector",
    "rotation_matrix_xy",
    "rotation_vector_from_gravity",
    "rotation_vector_from_matrix",
    "rotation_vector_sequence",
    "save_model",
    "segment_windows",
    "sitting_time",
    "stat_descriptors",
    "train",
    "write_features_csv",
    "write_labels_csv",
    "write_recording_csv",
]
