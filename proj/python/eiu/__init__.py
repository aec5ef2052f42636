"""Emotion-intent joint understanding: core operations.

Thin re-export of the compiled extension. The heavy lifting (autodiff
tensors, the recognition network, metrics and the corpus tools) lives in C++;
this package exposes the operations most useful from Python.
"""

from ._core import (
    EiuError,
    Model,
    correlation_matrix,
    emotion_labels,
    fleiss_kappa,
    focal_loss,
    gradient_audit,
    intent_labels,
    lr_factor,
    majority_vote,
    metrics,
    parse_annotations,
    parse_srt,
    read_feature_file,
    softmax,
    synth_corpus,
    write_feature_file,
)

__all__ = [
    "EiuError",
    "Model",
    "correlation_matrix",
    "emotion_labels",
    "fleiss_kappa",
    "focal_loss",
    "gradient_audit",
    "intent_labels",
    "lr_factor",
    "majority_vote",
    "metrics",
    "parse_annotations",
    "parse_srt",
    "read_feature_file",
    "softmax",
    "synth_corpus",
    "write_feature_file",
]

__version__ = "0.1.0"
