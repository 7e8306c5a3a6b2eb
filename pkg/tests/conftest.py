import os
from pathlib import Path

import django
import hypothesis
import numpy as np
import pytest

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "main.settings.local")
django.setup()

from apps.augmentation.sequences import BehaviorSequence  # noqa: E402
from apps.ctr.batching import collate  # noqa: E402
from apps.ctr.config import ModelConfig  # noqa: E402
from apps.dataset.samples import TrainingSample  # noqa: E402
from apps.retrieval.pool import SimilarUser, SimilarUserResult  # noqa: E402

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=20)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
TINY_CONFIG = ROOT / "config" / "tiny.yaml"

TINY_HISTORIES = {
    0: [3, 7, 1, 9],
    1: [2, 5],
    2: [8, 4, 6, 10, 2],
    3: [1, 3],
    4: [6],
    5: [9, 2, 7],
}
TINY_NEIGHBORS = {0: [1, 2], 1: [2, 0], 2: [0, 5], 3: [5, 1], 4: [3, 0], 5: [2, 3]}
TINY_TARGETS = [(0, 5, 1), (0, 2, 0), (1, 9, 1), (2, 1, 0), (3, 4, 1), (4, 8, 0), (5, 10, 1), (5, 3, 0)]


@pytest.fixture
def tiny_config_path():
    return TINY_CONFIG


@pytest.fixture
def tiny_model_config():
    return ModelConfig(d=4, L=3, K=1, adapter_hidden=[8, 4], mlp_hidden=[8, 4])


def build_tiny_inputs(top_k=1, max_length=3, d_prime=5, scheme="UTPE", seed=0):
    """Eight labeled samples over ten items, every neighbor slot filled."""
    rng = np.random.default_rng(seed)
    sequences = {
        user: BehaviorSequence.of(user, items, split="train")
        for user, items in TINY_HISTORIES.items()
    }
    neighbors = {
        user: SimilarUserResult(
            tuple(SimilarUser(n, 1.0 - 0.1 * rank) for rank, n in enumerate(found))
        )
        for user, found in TINY_NEIGHBORS.items()
    }
    embeddings = {user: rng.normal(size=d_prime) for user in TINY_HISTORIES}
    samples = [
        TrainingSample(user, item, label, sequences[user]) for user, item, label in TINY_TARGETS
    ]
    return collate(samples, neighbors, sequences, embeddings, max_length, top_k, scheme, d_prime)


@pytest.fixture
def tiny_inputs():
    return build_tiny_inputs()
