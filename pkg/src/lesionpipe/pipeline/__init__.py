"""Continuous-training loop: data validation, triggers, retraining,
candidate gating, registry, and the clinician-feedback store."""

from .gate import (
    ACCURACY_REGRESSION,
    AUC_REGRESSION,
    CLASS_PARITY,
    GateConfig,
    GateDecision,
    GateDigestError,
    gate_candidate,
)
from .registry import (
    IllegalTransitionError,
    ModelVersion,
    Registry,
    RegistryError,
    UnknownVersionError,
)
from .runner import PipelineRunReport, StageResult, run_pipeline
from .triggers import (
    FeedbackRecord,
    PipelineState,
    TriggerConfig,
    TriggerDecision,
    check_triggers,
    rolling_accuracy,
    utcnow,
)
from .validation import (
    CHANNEL_MISMATCH,
    CLASS_RATIO_DRIFT,
    DIMENSION_MISMATCH,
    LABEL_DOMAIN,
    MEAN_DRIFT,
    METADATA_TYPE,
    PIXEL_RANGE,
    STD_DRIFT,
    UNREADABLE_FILE,
    Finding,
    SchemaExpectations,
    SkewReport,
    SkewThresholds,
    validate_schema,
    validate_values,
)

__all__ = [
    "ACCURACY_REGRESSION", "AUC_REGRESSION", "CHANNEL_MISMATCH",
    "CLASS_PARITY", "CLASS_RATIO_DRIFT", "DIMENSION_MISMATCH",
    "FeedbackRecord", "Finding", "GateConfig", "GateDecision",
    "GateDigestError", "IllegalTransitionError", "LABEL_DOMAIN",
    "MEAN_DRIFT", "METADATA_TYPE", "ModelVersion", "PIXEL_RANGE",
    "PipelineRunReport", "PipelineState", "Registry", "RegistryError",
    "SchemaExpectations", "SkewReport", "SkewThresholds", "StageResult",
    "STD_DRIFT", "TriggerConfig", "TriggerDecision", "UNREADABLE_FILE",
    "UnknownVersionError", "check_triggers", "gate_candidate",
    "rolling_accuracy", "run_pipeline", "utcnow", "validate_schema",
    "validate_values",
]
