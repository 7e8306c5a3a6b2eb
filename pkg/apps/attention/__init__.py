"""
Behavior-embedding adapter and user-aware target attention.
"""

from .adapter import AdapterParams, adapt, adapter_arrays
from .dump import attention_frame, write_attention_weights
from .user_aware import (
    AttentionOutput,
    Branch,
    UserAwareAttentionParams,
    attend,
    attention_arrays,
    item_branch,
    item_logits,
    target_attention,
    user_aware_attention,
    user_branch,
    user_logits,
)

__all__ = [
    "AdapterParams",
    "adapt",
    "adapter_arrays",
    "attention_frame",
    "write_attention_weights",
    "AttentionOutput",
    "Branch",
    "UserAwareAttentionParams",
    "attend",
    "attention_arrays",
    "item_branch",
    "item_logits",
    "target_attention",
    "user_aware_attention",
    "user_branch",
    "user_logits",
]
