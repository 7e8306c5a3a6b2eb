"""
Ablation variants expressed as a concrete plan for the model and its inputs.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from apps.retrieval.pool import SimilarUser, SimilarUserResult
from main.utils.exceptions import ConfigurationError

from .config import POOLING_MODES, VARIANTS, ModelConfig


@dataclass(frozen=True)
class VariantPlan:
    """
    - pooling: suin / avg / target_attention actually run
    - top_k: neighbor slots in the augmented sequence
    - keep_behavior_embeddings: adapted target and mean neighbor embeddings join the MLP input
    - random_users: neighbors replaced by uniformly drawn train users
    - zero_positions: position tables fixed at zero
    """

    variant: str
    pooling: str
    top_k: int
    keep_behavior_embeddings: bool = False
    random_users: bool = False
    zero_positions: bool = False

    @property
    def uses_adapter(self) -> bool:
        return self.pooling == "suin" or self.keep_behavior_embeddings

    @property
    def uses_attention(self) -> bool:
        return self.pooling in ("suin", "target_attention")


def resolve_variant(config: ModelConfig) -> VariantPlan:
    variant, pooling, top_k = config.variant, config.pooling, config.K
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant '{variant}', expected one of {VARIANTS}")
    if pooling not in POOLING_MODES:
        raise ConfigurationError(f"unknown pooling '{pooling}', expected one of {POOLING_MODES}")
    item_only = "target_attention" if pooling == "suin" else pooling
    if variant == "no_uta":
        return VariantPlan(variant, item_only, top_k)
    if variant == "no_uta_keep_be":
        return VariantPlan(variant, item_only, top_k, keep_behavior_embeddings=True)
    if variant == "no_su_no_uta":
        return VariantPlan(variant, item_only, 0)
    if variant == "random_users":
        return VariantPlan(variant, pooling, top_k, random_users=True)
    if variant == "no_pos":
        return VariantPlan(variant, pooling, top_k, zero_positions=True)
    return VariantPlan(variant, pooling, top_k)


def random_neighbors(
    user_ids: Iterable[int], train_ids: np.ndarray, top_k: int, seed: int
) -> Mapping[int, SimilarUserResult]:
    """Uniformly drawn distinct train users (never the user itself), scores NaN."""
    rng = np.random.default_rng(seed)
    train_ids = np.sort(np.asarray(train_ids, dtype=np.int64))
    drawn = {}
    for user_id in sorted(set(int(u) for u in user_ids)):
        candidates = train_ids[train_ids != user_id]
        picks = rng.choice(candidates, size=min(top_k, len(candidates)), replace=False)
        drawn[user_id] = SimilarUserResult(
            tuple(SimilarUser(int(pick), float("nan")) for pick in picks)
        )
    return drawn


def resolve_neighbors(
    neighbors: Mapping[int, SimilarUserResult],
    plan: VariantPlan,
    user_ids: Iterable[int],
    train_ids: np.ndarray,
    seed: int,
    threshold: Optional[float] = None,
) -> Mapping[int, SimilarUserResult]:
    """Neighbor lists the model will see: random or stored, threshold-filtered, cut to top_k."""
    if plan.random_users:
        return random_neighbors(user_ids, train_ids, plan.top_k, seed)
    resolved = {}
    for user_id in user_ids:
        stored = neighbors.get(int(user_id), SimilarUserResult())
        resolved[int(user_id)] = stored.above(threshold).head(plan.top_k)
    return resolved
