from .config import FLAT, HIERARCHICAL, ArchConfig
from .network import (
    SAMPLED,
    SCHEDULED,
    TEACHER_FORCED,
    DecodeResult,
    LossBreakdown,
    Model,
    sample_from_logits,
    segment,
)
from .params import arrays_to_params, build_params, lstm_view, params_to_arrays

__all__ = [
    "FLAT",
    "HIERARCHICAL",
    "SAMPLED",
    "SCHEDULED",
    "TEACHER_FORCED",
    "ArchConfig",
    "DecodeResult",
    "LossBreakdown",
    "Model",
    "arrays_to_params",
    "build_params",
    "lstm_view",
    "params_to_arrays",
    "sample_from_logits",
    "segment",
]
