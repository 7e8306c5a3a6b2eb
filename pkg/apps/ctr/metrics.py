"""
AUC / logloss and grouped evaluation reports.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import roc_auc_score

from apps.tensor.losses import PROBABILITY_CLAMP
from main.utils.exceptions import AucUndefinedError, ConfigurationError, DimensionError

from .batching import ModelInputs
from .config import GROUPINGS, EvaluationConfig
from .model import ModelParams, predict

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["grouping", "group", "count", "auc", "logloss"]


def _checked(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if scores.shape != labels.shape:
        raise DimensionError(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    return scores, labels


def auc(scores, labels) -> float:
    """Rank AUC; tied scores count one half."""
    scores, labels = _checked(scores, labels)
    if np.unique(labels).size < 2:
        raise AucUndefinedError("AUC needs both positive and negative labels")
    return float(roc_auc_score(labels, scores))


def logloss(scores, labels) -> float:
    scores, labels = _checked(scores, labels)
    if scores.size == 0:
        raise DimensionError("logloss of an empty set")
    clamped = np.clip(scores, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    return float(-np.mean(labels * np.log(clamped) + (1.0 - labels) * np.log(1.0 - clamped)))


@dataclass(frozen=True)
class GroupMetrics:
    group: str
    count: int
    auc: float
    logloss: float


@dataclass(frozen=True)
class EvalReport:
    """Overall metrics plus one row per occupied bucket (AUC is NaN where undefined)."""

    auc: float
    logloss: float
    count: int
    grouping: str = "none"
    groups: Tuple[GroupMetrics, ...] = field(default=())

    def to_frame(self) -> pd.DataFrame:
        rows = [("none", "all", self.count, self.auc, self.logloss)]
        rows += [(self.grouping, g.group, g.count, g.auc, g.logloss) for g in self.groups]
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.6f")
        return path


def bucket_labels(edges: Sequence[float], integer: bool) -> List[str]:
    """`1-2`, `3-5`, ..., `51+` for integer edges; `[1,2)`, ..., `6+` otherwise."""
    labels = []
    for low, high in zip(edges[:-1], edges[1:]):
        labels.append(f"{int(low)}-{int(high) - 1}" if integer else f"[{low:g},{high:g})")
    labels.append(f"{int(edges[-1]) if integer else f'{edges[-1]:g}'}+")
    return labels


def assign_buckets(values: np.ndarray, edges: Sequence[float]) -> np.ndarray:
    """Bucket index per value; values below the first edge go to the first bucket."""
    index = np.searchsorted(np.asarray(edges, dtype=np.float64), values, side="right") - 1
    return np.clip(index, 0, len(edges) - 1)


def group_metrics(
    scores: np.ndarray, labels: np.ndarray, keys: np.ndarray, names: Sequence[str]
) -> Tuple[GroupMetrics, ...]:
    groups = []
    for index, name in enumerate(names):
        rows = keys == index
        if not rows.any():
            continue
        try:
            group_auc = auc(scores[rows], labels[rows])
        except AucUndefinedError:
            logger.warning(f"AUC undefined for group {name} ({int(rows.sum())} samples)")
            group_auc = float("nan")
        groups.append(
            GroupMetrics(name, int(rows.sum()), group_auc, logloss(scores[rows], labels[rows]))
        )
    return tuple(groups)


def report_from_scores(
    scores: np.ndarray,
    inputs: ModelInputs,
    grouping: str = "none",
    config: Optional[EvaluationConfig] = None,
) -> EvalReport:
    if grouping not in GROUPINGS:
        raise ConfigurationError(f"unknown grouping '{grouping}', expected one of {GROUPINGS}")
    config = config or EvaluationConfig()
    labels = inputs.labels
    groups: Tuple[GroupMetrics, ...] = ()
    if grouping == "seq_length":
        edges = config.length_edges
        keys = assign_buckets(inputs.history_lengths, edges)
        groups = group_metrics(scores, labels, keys, bucket_labels(edges, integer=True))
    elif grouping == "aug_ratio":
        edges = config.ratio_edges
        keys = assign_buckets(inputs.aug_ratios, edges)
        groups = group_metrics(scores, labels, keys, bucket_labels(edges, integer=False))
    return EvalReport(
        auc=auc(scores, labels),
        logloss=logloss(scores, labels),
        count=len(labels),
        grouping=grouping,
        groups=groups,
    )


def evaluate(
    inputs: ModelInputs,
    params: ModelParams,
    grouping: str = "none",
    config: Optional[EvaluationConfig] = None,
) -> EvalReport:
    config = config or EvaluationConfig()
    scores = predict(inputs, params, batch_size=config.batch_size)
    return report_from_scores(scores, inputs, grouping, config)
