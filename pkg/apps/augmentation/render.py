from typing import List

from .augment import AugmentedSequence


def render_augmented(aug: AugmentedSequence) -> str:
    """Text dump of one augmented sequence: a row per user slot, items / position IDs / mask."""
    width = max(3, len(str(max(int(aug.items.max(initial=0)), int(aug.position_ids.max(initial=0))))))
    lines: List[str] = [
        f"augmented sequence: target user {aug.target_user}, K={aug.top_k}, "
        f"L={aug.max_length}, scheme={aug.scheme}"
    ]
    for k in range(aug.top_k, -1, -1):
        span = aug.slot(k)
        user = aug.user_ids[k]
        if k == 0:
            label = f"k=0 target user {user}"
        elif user is None:
            label = f"k={k} (no neighbor)"
        else:
            label = f"k={k} user {user} score {aug.scores[k]:.6f}"
        items = " ".join(f"{int(v):>{width}}" for v in aug.items[span])
        positions = " ".join(f"{int(v):>{width}}" for v in aug.position_ids[span])
        mask = " ".join(f"{'x' if v else '.':>{width}}" for v in aug.mask[span])
        lines.append(label)
        lines.append(f"  items | {items}")
        lines.append(f"  pos   | {positions}")
        lines.append(f"  mask  | {mask}")
    return "\n".join(lines) + "\n"
