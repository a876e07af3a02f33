"""Streaming anomaly detection: exact kNN novelty scores, CUSUM-style
sequential alarms, and a reference set that grows from reviewer feedback
instead of retraining.
"""

from .errors import (
    AlarmStateError,
    InvalidInputError,
    ModelFormatError,
    StreamFormatError,
    TrainingError,
    UndefinedMetricError,
    UnknownAlarmError,
    VigilError,
)
from .features import (
    BoundingBox,
    FeatureWeights,
    FlowStats,
    FrameFeatures,
    LocationFeatures,
    assemble_feature,
    bbox_to_location,
    compute_flow_stats,
    feature_dim,
    split_feature,
)
from .nominal import FeatureScaler, NominalModel, TrainConfig, kth_nn_distances, train
from .detector import (
    AlarmRecord,
    DetectorConfig,
    SequentialDetector,
    calibrate_threshold,
    evidence,
    replay_deltas,
    single_shot_decision,
)
from .continual import ContinualUpdater, FeedbackLabel, Journal, UpdatePolicy
from .metrics import (
    EvalReport,
    GroundTruth,
    count_false_alarm_events,
    count_true_positive_events,
    detection_delay,
    evaluate,
    frame_auc,
)
from .engine import DetectionRun, Engine, detect_stream
from . import ingest, simgen, experiments

__version__ = "0.1.0"

__all__ = [
    "AlarmRecord",
    "AlarmStateError",
    "BoundingBox",
    "ContinualUpdater",
    "DetectionRun",
    "DetectorConfig",
    "Engine",
    "EvalReport",
    "FeatureScaler",
    "FeatureWeights",
    "FeedbackLabel",
    "FlowStats",
    "FrameFeatures",
    "GroundTruth",
    "InvalidInputError",
    "Journal",
    "LocationFeatures",
    "ModelFormatError",
    "NominalModel",
    "SequentialDetector",
    "StreamFormatError",
    "TrainConfig",
    "TrainingError",
    "UndefinedMetricError",
    "UnknownAlarmError",
    "UpdatePolicy",
    "VigilError",
    "assemble_feature",
    "bbox_to_location",
    "calibrate_threshold",
    "compute_flow_stats",
    "count_false_alarm_events",
    "count_true_positive_events",
    "detect_stream",
    "detection_delay",
    "evaluate",
    "evidence",
    "experiments",
    "feature_dim",
    "frame_auc",
    "ingest",
    "kth_nn_distances",
    "replay_deltas",
    "simgen",
    "single_shot_decision",
    "split_feature",
    "train",
]
