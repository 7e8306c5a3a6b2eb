import math
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from apps.ctr import EvaluationConfig, ModelParams, auc, evaluate, logloss
from apps.ctr.metrics import REPORT_COLUMNS, assign_buckets, bucket_labels, report_from_scores
from main.utils.exceptions import AucUndefinedError, ConfigurationError, DimensionError


def _pairwise_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.1, 0.9], [1, 0]) == 0.0
    assert auc([0.5, 0.5], [1, 0]) == pytest.approx(0.5)
    assert auc([0.8, 0.4, 0.6, 0.2], [1, 1, 0, 0]) == pytest.approx(0.75)


def test_auc_needs_both_classes():
    with pytest.raises(AucUndefinedError):
        auc([0.3, 0.7], [1, 1])


def test_auc_matches_pairwise_count_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(200):
        size = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, size)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 6, size) / 5.0
        assert auc(scores, labels) == pytest.approx(_pairwise_auc(scores, labels), abs=1e-12)


def test_logloss():
    assert logloss([0.5, 0.5], [1, 0]) == pytest.approx(math.log(2))
    assert logloss([1.0], [1]) < 1e-11
    assert math.isfinite(logloss([0.0], [1]))
    with pytest.raises(DimensionError):
        logloss([0.5], [1, 0])


def test_bucket_labels():
    assert bucket_labels((1, 3, 6, 11, 21, 51), integer=True) == [
        "1-2", "3-5", "6-10", "11-20", "21-50", "51+"
    ]
    assert bucket_labels((1.0, 2.0, 3.0), integer=False) == ["[1,2)", "[2,3)", "3+"]


def test_assign_buckets():
    edges = (1, 3, 6)
    assert assign_buckets(np.array([0, 1, 2, 3, 5, 6, 100]), edges).tolist() == [0, 0, 0, 1, 1, 2, 2]


def _inputs(labels, lengths, ratios):
    return SimpleNamespace(
        labels=np.asarray(labels, dtype=float),
        history_lengths=np.asarray(lengths),
        aug_ratios=np.asarray(ratios, dtype=float),
    )


def test_grouped_by_sequence_length():
    scores = np.array([0.9, 0.2, 0.7, 0.4, 0.6, 0.3])
    inputs = _inputs([1, 0, 1, 0, 1, 1], [1, 2, 4, 5, 60, 70], [1.0] * 6)
    report = report_from_scores(scores, inputs, "seq_length")
    groups = {g.group: g for g in report.groups}
    assert list(groups) == ["1-2", "3-5", "51+"]
    assert sum(g.count for g in report.groups) == report.count == 6
    assert groups["1-2"].auc == 1.0
    assert math.isnan(groups["51+"].auc)
    assert report.auc == pytest.approx(_pairwise_auc(scores, inputs.labels))


def test_grouped_by_augmentation_ratio():
    scores = np.array([0.9, 0.2, 0.7, 0.4])
    inputs = _inputs([1, 0, 1, 0], [3, 3, 3, 3], [1.0, 1.5, 3.2, 7.0])
    report = report_from_scores(scores, inputs, "aug_ratio", EvaluationConfig())
    assert [g.group for g in report.groups] == ["[1,2)", "[3,4)", "6+"]


def test_unknown_grouping():
    with pytest.raises(ConfigurationError):
        report_from_scores(np.array([0.1, 0.9]), _inputs([0, 1], [1, 1], [1, 1]), "by_day")


def test_report_csv(tmp_path):
    scores = np.array([0.9, 0.2, 0.7, 0.4])
    report = report_from_scores(scores, _inputs([1, 0, 1, 0], [1, 2, 7, 8], [1] * 4), "seq_length")
    frame = pd.read_csv(report.write_csv(tmp_path / "report.csv"))
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.iloc[0][["grouping", "group"]].tolist() == ["none", "all"]
    assert frame["grouping"].tolist()[1:] == ["seq_length", "seq_length"]


def test_evaluate_leaves_params_untouched(tiny_inputs, tiny_model_config):
    params = ModelParams.initialize(10, 5, tiny_model_config, seed=1)
    before = {name: value.copy() for name, value in params.arrays().items()}
    first = evaluate(tiny_inputs, params, "seq_length")
    second = evaluate(tiny_inputs, params, "seq_length")
    assert first.to_frame().equals(second.to_frame())
    for name, value in params.arrays().items():
        np.testing.assert_array_equal(value, before[name])
    assert all(params[name].grad is None for name in params.names())
