from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from main.utils.exceptions import ConfigurationError

PAD_ITEM = 0


@dataclass(frozen=True)
class BehaviorSequence:
    """One user's item history, oldest to newest. Item ID 0 is reserved for padding."""

    user_id: int
    items: Tuple[int, ...]
    timestamps: Optional[Tuple[int, ...]] = None
    split: Optional[str] = None

    @classmethod
    def of(
        cls,
        user_id: int,
        items: Sequence[int],
        timestamps: Optional[Sequence[int]] = None,
        split: Optional[str] = None,
    ) -> "BehaviorSequence":
        return cls(
            int(user_id),
            tuple(int(item) for item in items),
            tuple(int(t) for t in timestamps) if timestamps is not None else None,
            split,
        )

    @property
    def length(self) -> int:
        return len(self.items)

    def window(self, max_length: int) -> Tuple[np.ndarray, int]:
        """Keep the most recent `max_length` items, left-padded with PAD_ITEM."""
        if max_length <= 0:
            raise ConfigurationError(f"sequence length must be positive, got {max_length}")
        recent = self.items[-max_length:] if self.items else ()
        padded = np.full(max_length, PAD_ITEM, dtype=np.int64)
        if recent:
            padded[max_length - len(recent) :] = recent
        return padded, len(recent)

    def without(self, item_id: int) -> "BehaviorSequence":
        """Drop every occurrence of `item_id`, keeping timestamps aligned."""
        keep = [i for i, item in enumerate(self.items) if item != item_id]
        timestamps = (
            tuple(self.timestamps[i] for i in keep) if self.timestamps is not None else None
        )
        return BehaviorSequence(
            self.user_id, tuple(self.items[i] for i in keep), timestamps, self.split
        )
