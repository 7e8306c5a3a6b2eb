"""
CTR model over augmented behavior sequences: forward pass, training and evaluation.
"""

from .batching import ModelInputs, collate
from .config import EvaluationConfig, ModelConfig, TrainingConfig
from .losses import bce_loss
from .metrics import EvalReport, auc, evaluate, logloss
from .model import ModelParams, forward, predict, predict_batch
from .training import EarlyStopping, TrainingResult, train
from .variants import VariantPlan, resolve_neighbors, resolve_variant

__all__ = [
    "ModelInputs",
    "collate",
    "EvaluationConfig",
    "ModelConfig",
    "TrainingConfig",
    "bce_loss",
    "EvalReport",
    "auc",
    "evaluate",
    "logloss",
    "ModelParams",
    "forward",
    "predict",
    "predict_batch",
    "EarlyStopping",
    "TrainingResult",
    "train",
    "VariantPlan",
    "resolve_neighbors",
    "resolve_variant",
]
