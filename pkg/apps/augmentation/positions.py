"""
Position IDs for augmented sequences.

- UTPE: the i-th latest behavior of the k-th most similar user gets k*L + i - 1
- TPE: non-pad behaviors of all users concatenated, IDs 0..n-1 from the target's newest backwards
- STPE: every user slot shares L-1..0
- None: all zero
"""

from typing import Sequence

import numpy as np

from main.utils.exceptions import ConfigurationError

SCHEMES = ("UTPE", "TPE", "STPE", "None")


def check_scheme(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown position scheme '{scheme}', expected one of {SCHEMES}")
    return scheme


def table_rows(max_length: int, top_k: int) -> int:
    """Rows a position table needs: every emittable ID plus the target's own row."""
    return (top_k + 1) * max_length + 1


def position_ids(lengths: Sequence[int], max_length: int, scheme: str) -> np.ndarray:
    """
    IDs for the slot-major layout [k=K, ..., k=0]. `lengths[k]` is the non-pad
    count of slot k (capped at L), so the result depends only on lengths, L, K and scheme.
    """
    check_scheme(scheme)
    top_k = len(lengths) - 1
    slots = np.arange(top_k, -1, -1)
    in_slot = np.tile(np.arange(max_length), top_k + 1)
    slot_of = np.repeat(slots, max_length)
    latest_rank = max_length - 1 - in_slot

    if scheme == "UTPE":
        return slot_of * max_length + latest_rank
    if scheme == "STPE":
        return latest_rank.copy()
    if scheme == "None":
        return np.zeros(len(in_slot), dtype=np.int64)

    capped = np.minimum(np.asarray(lengths, dtype=np.int64), max_length)
    non_pad = in_slot >= max_length - capped[slot_of]
    ids = np.zeros(len(in_slot), dtype=np.int64)
    count = int(non_pad.sum())
    ids[non_pad] = np.arange(count - 1, -1, -1)
    return ids
