"""
Ablation sweeps: every setting is trained and scored on the test split once per
configured seed, sharing the upstream artifacts (data, encoder, pool, neighbors).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from apps.encoder.sasrec import BehaviorEmbedding
from apps.retrieval.pool import SimilarUserResult
from main.utils.artifacts import write_manifest, write_resolved_config
from main.utils.exceptions import ConfigurationError, PipelineError

from .config import SWEEPS, RunConfig
from .stages import PreparedData, compute_neighbors, fit, load_prepared, neighbor_depth, score_split
from .workspace import Workspace

logger = logging.getLogger(__name__)

TABLE_COLUMNS = [
    "setting",
    "status",
    "seeds",
    "auc_mean",
    "auc_std",
    "logloss_mean",
    "logloss_std",
    "delta_auc",
    "delta_logloss",
]
RUN_COLUMNS = ["setting", "seed", "auc", "logloss"]


@dataclass(frozen=True)
class Setting:
    label: str
    overrides: Dict[str, object]


def sweep_settings(config: RunConfig, sweep: str) -> List[Setting]:
    """Settings in table order; the first one is the baseline for the deltas."""
    ablation = config.ablation
    if sweep == "variants":
        return [Setting(v, {"model.variant": v}) for v in ablation.variants]
    if sweep == "topk":
        return [Setting(f"K={k}", {"model.K": k}) for k in ablation.topk_values]
    if sweep == "position_schemes":
        return [Setting(s, {"model.position_scheme": s}) for s in ablation.schemes]
    if sweep == "similarity_measures":
        return [Setting(m, {"retrieval.measure": m}) for m in ablation.measures]
    if sweep == "thresholds":
        # naive augmentation: item-only attention over threshold-filtered neighbors
        return [
            Setting(f"threshold={t:g}", {"model.variant": "no_uta", "retrieval.threshold": t})
            for t in ablation.thresholds
        ]
    raise ConfigurationError(f"unknown sweep '{sweep}', expected one of {SWEEPS}")


class NeighborCache:
    """Stored neighbors per similarity measure, computed on first use."""

    def __init__(self, prepared: PreparedData, threads: int = 1):
        self.prepared = prepared
        self.threads = threads
        self._by_measure: Dict[tuple, Dict[int, SimilarUserResult]] = {}

    def get(self, config: RunConfig) -> Optional[Dict[int, SimilarUserResult]]:
        measure = config.retrieval.measure
        stored = max((len(r) for r in self.prepared.neighbors.values()), default=0)
        if measure == self.prepared.measure and (
            config.model.K <= stored or stored >= self.prepared.pool.size - 1
        ):
            return None
        depth = neighbor_depth(config)
        key = (measure, depth)
        if key not in self._by_measure:
            embeddings = {
                u: BehaviorEmbedding(u, v) for u, v in self.prepared.embeddings.items()
            }
            self._by_measure[key] = compute_neighbors(
                self.prepared.pool,
                self.prepared.histories,
                embeddings,
                measure,
                depth,
                self.threads,
            )
        return self._by_measure[key]


@dataclass(frozen=True)
class AblationResult:
    """Summary table (one row per setting) and the per-seed runs behind it."""

    table: pd.DataFrame
    runs: pd.DataFrame

    def seed_aucs(self, setting: str) -> pd.Series:
        """Test AUC of `setting` indexed by seed."""
        rows = self.runs[self.runs["setting"] == setting]
        return rows.set_index("seed")["auc"]


def _summarize(label: str, aucs: List[float], losses: List[float], errors: List[str]) -> Dict:
    if errors:
        return {"setting": label, "status": "failed", "seeds": len(aucs)}
    return {
        "setting": label,
        "status": "ok",
        "seeds": len(aucs),
        "auc_mean": float(np.mean(aucs)),
        "auc_std": float(np.std(aucs)),
        "logloss_mean": float(np.mean(losses)),
        "logloss_std": float(np.std(losses)),
    }


def run_ablation(
    config: RunConfig,
    sweep: str,
    workspace: Workspace,
    verbose: bool = False,
    prepared: Optional[PreparedData] = None,
) -> AblationResult:
    settings = sweep_settings(config, sweep)
    prepared = prepared or load_prepared(workspace)
    cache = NeighborCache(prepared, config.threads)
    rows, runs = [], []
    for setting in settings:
        aucs, losses, errors = [], [], []
        for seed in config.ablation.seeds:
            try:
                run = config.with_overrides({**setting.overrides, "seed": seed})
                neighbors = cache.get(run)
                result = fit(prepared, run, verbose, neighbors)
                report = score_split(prepared, run, result.params, "test", neighbors=neighbors)
            except PipelineError as error:
                logger.warning(f"Ablation {sweep}/{setting.label} seed {seed} failed: {error}")
                errors.append(str(error))
                break
            aucs.append(report.auc)
            losses.append(report.logloss)
            runs.append(
                {"setting": setting.label, "seed": seed, "auc": report.auc, "logloss": report.logloss}
            )
            logger.info(
                f"Ablation {sweep}/{setting.label} seed {seed}: AUC {report.auc:.6f}, "
                f"logloss {report.logloss:.6f}"
            )
        rows.append(_summarize(setting.label, aucs, losses, errors))

    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    baseline = table.iloc[0]
    table["delta_auc"] = table["auc_mean"] - baseline["auc_mean"]
    table["delta_logloss"] = table["logloss_mean"] - baseline["logloss_mean"]
    per_seed = pd.DataFrame(runs, columns=RUN_COLUMNS)

    workspace.ablation.mkdir(parents=True, exist_ok=True)
    table.to_csv(workspace.ablation / f"{sweep}.csv", index=False, float_format="%.6f")
    per_seed.to_csv(workspace.ablation / f"{sweep}_seeds.csv", index=False, float_format="%.6f")
    write_resolved_config(workspace.ablation, config.resolved())
    write_manifest(
        workspace.ablation,
        {
            "stage": "ablate",
            "sweep": sweep,
            "settings": len(table),
            "failed": int((table["status"] == "failed").sum()),
            "seeds": ",".join(str(s) for s in config.ablation.seeds),
        },
    )
    return AblationResult(table, per_seed)
