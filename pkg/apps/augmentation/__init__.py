"""
Augmented behavior sequences and their position IDs.
"""

from .augment import AugmentedSequence, assign_position_ids, augmentation_ratio, build_augmented
from .positions import SCHEMES, position_ids, table_rows
from .render import render_augmented
from .sequences import PAD_ITEM, BehaviorSequence

__all__ = [
    "AugmentedSequence",
    "assign_position_ids",
    "augmentation_ratio",
    "build_augmented",
    "SCHEMES",
    "position_ids",
    "table_rows",
    "render_augmented",
    "PAD_ITEM",
    "BehaviorSequence",
]
