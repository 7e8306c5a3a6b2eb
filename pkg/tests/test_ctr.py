import dataclasses
import math

import numpy as np
import pytest

from apps.attention import UserAwareAttentionParams, item_branch, target_attention
from apps.augmentation.sequences import BehaviorSequence
from apps.ctr import (
    EarlyStopping,
    ModelConfig,
    ModelParams,
    TrainingConfig,
    bce_loss,
    forward,
    predict,
    predict_batch,
    resolve_neighbors,
    resolve_variant,
    train,
)
from apps.ctr.batching import SampleContext, collate
from apps.ctr.model import _avg_pool, mlp_input_width
from apps.ctr.variants import random_neighbors
from apps.dataset.samples import TrainingSample
from apps.retrieval.pool import SimilarUser, SimilarUserResult
from apps.tensor import Tensor
from main.utils.exceptions import (
    ConfigurationError,
    DimensionError,
    InternalConsistencyError,
    TrainingDivergenceError,
)
from tests.conftest import build_tiny_inputs

N_ITEMS, D_PRIME = 10, 5


def _model(config, seed=0, **overrides):
    params = ModelParams.initialize(N_ITEMS, D_PRIME, config, seed=seed)
    return params.with_arrays(overrides) if overrides else params


def _last_layer(params):
    return params.mlp_layers - 1


def test_probabilities_in_open_interval(tiny_inputs, tiny_model_config):
    probs = forward(tiny_inputs, _model(tiny_model_config)).data
    assert probs.shape == (8,)
    assert np.all((probs > 0) & (probs < 1))


def test_zero_head_gives_one_half(tiny_inputs, tiny_model_config):
    params = _model(tiny_model_config)
    last = _last_layer(params)
    params = params.with_arrays(
        {f"mlp.w{last}": np.zeros(params[f"mlp.w{last}"].shape), f"mlp.b{last}": np.zeros(1)}
    )
    np.testing.assert_array_equal(forward(tiny_inputs, params).data, 0.5)


def test_large_bias_stays_below_one(tiny_inputs, tiny_model_config):
    params = _model(tiny_model_config)
    last = _last_layer(params)
    params = params.with_arrays({f"mlp.b{last}": np.array([1000.0])})
    probs = forward(tiny_inputs, params).data
    assert np.all(probs < 1.0)
    assert np.all(probs > 0.999)


def test_avg_pool_of_identical_rows():
    rows = Tensor(np.tile([1.0, -2.0, 0.5], (2, 4, 1)))
    mask = np.array([[True, False, True, True], [False, False, False, True]])
    np.testing.assert_allclose(_avg_pool(rows, mask).data, [[1.0, -2.0, 0.5]] * 2, atol=1e-15)


def test_silent_user_branch_matches_target_attention_weights(tiny_model_config):
    config = tiny_model_config.model_copy(update={"K": 0})
    inputs = build_tiny_inputs(top_k=0)
    params = _model(config, **{"attention.user_query": np.zeros((4, 4))})
    weights = predict_batch(inputs, params).attention_weights.data

    attention = UserAwareAttentionParams.from_parameter_set(params)
    behaviors = Tensor(params["item_embedding"].data[inputs.items])
    target = Tensor(params["item_embedding"].data[inputs.targets])
    plain = target_attention(item_branch(behaviors, target, inputs.position_ids, attention), inputs.mask)
    np.testing.assert_allclose(weights, plain.weights.data, rtol=0, atol=1e-15)


def test_no_pos_tables_stay_zero(tiny_inputs, tiny_model_config):
    config = tiny_model_config.model_copy(update={"variant": "no_pos"})
    params = _model(config)
    assert {"attention.item_positions", "attention.user_positions"} <= params.frozen
    result = train(
        tiny_inputs, tiny_inputs, config, TrainingConfig(lr=0.05, batch_size=4, max_epochs=2, patience=2),
        N_ITEMS, D_PRIME,
    )
    assert not result.params["attention.item_positions"].data.any()
    assert not result.params["attention.user_positions"].data.any()
    assert not result.params.allclose(params)


def test_avg_ignores_order_within_slots(tiny_model_config):
    config = tiny_model_config.model_copy(update={"pooling": "avg"})
    inputs = build_tiny_inputs()
    params = _model(config)
    order = np.array([2, 1, 0, 4, 5, 3])
    swapped = dataclasses.replace(inputs, items=inputs.items[:, order], mask=inputs.mask[:, order])
    np.testing.assert_allclose(forward(inputs, params).data, forward(swapped, params).data, atol=1e-12)


def test_unknown_variant_is_rejected():
    config = ModelConfig.model_construct(variant="bogus")
    with pytest.raises(ConfigurationError, match="bogus"):
        resolve_variant(config)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d=8, adapter_hidden=[16, 4])
    with pytest.raises(ValueError):
        ModelConfig(mlp_hidden=[0])
    with pytest.raises(ValueError):
        ModelConfig(layers=3)


@pytest.mark.parametrize(
    "variant, pooling, top_k, keep, random, zero",
    [
        ("full", "suin", 3, False, False, False),
        ("no_uta", "target_attention", 3, False, False, False),
        ("no_uta_keep_be", "target_attention", 3, True, False, False),
        ("random_users", "suin", 3, False, True, False),
        ("no_su_no_uta", "target_attention", 0, False, False, False),
        ("no_pos", "suin", 3, False, False, True),
    ],
)
def test_resolve_variant(variant, pooling, top_k, keep, random, zero):
    plan = resolve_variant(ModelConfig(K=3, variant=variant))
    assert (plan.pooling, plan.top_k) == (pooling, top_k)
    assert (plan.keep_behavior_embeddings, plan.random_users, plan.zero_positions) == (keep, random, zero)


def test_avg_pooling_survives_item_only_variants():
    assert resolve_variant(ModelConfig(pooling="avg", variant="no_uta")).pooling == "avg"


def test_mlp_input_width():
    config = ModelConfig(d=16, adapter_hidden=[32, 16])
    assert mlp_input_width(config, resolve_variant(config)) == 48
    item_only = config.model_copy(update={"variant": "no_uta"})
    assert mlp_input_width(item_only, resolve_variant(item_only)) == 32
    keep = config.model_copy(update={"variant": "no_uta_keep_be"})
    assert mlp_input_width(keep, resolve_variant(keep)) == 64


def test_keep_behavior_embeddings_forward(tiny_inputs, tiny_model_config):
    config = tiny_model_config.model_copy(update={"variant": "no_uta_keep_be"})
    result = predict_batch(tiny_inputs, _model(config))
    assert result.probs.shape == (8,)
    assert result.attention_weights.shape == tiny_inputs.mask.shape


def test_mismatched_top_k(tiny_model_config):
    with pytest.raises(ConfigurationError, match="K=2"):
        forward(build_tiny_inputs(top_k=2), _model(tiny_model_config))


def test_predict_matches_forward_across_chunks(tiny_inputs, tiny_model_config):
    params = _model(tiny_model_config)
    np.testing.assert_allclose(
        predict(tiny_inputs, params, batch_size=3), forward(tiny_inputs, params).data, atol=1e-15
    )


def test_random_neighbors():
    drawn = random_neighbors([0, 1, 2], np.arange(10), top_k=3, seed=4)
    for user, found in drawn.items():
        assert len(found) == 3
        assert user not in found.user_ids
        assert len(set(found.user_ids)) == 3
        assert all(math.isnan(score) for score in found.scores)
    again = random_neighbors([2, 1, 0], np.arange(10), top_k=3, seed=4)
    assert {u: r.user_ids for u, r in drawn.items()} == {u: r.user_ids for u, r in again.items()}


def test_resolve_neighbors_threshold_and_cut():
    stored = {0: SimilarUserResult((SimilarUser(1, 0.9), SimilarUser(2, 0.5), SimilarUser(3, 0.2)))}
    plan = resolve_variant(ModelConfig(K=2))
    assert resolve_neighbors(stored, plan, [0], np.arange(5), 0)[0].user_ids == (1, 2)
    assert resolve_neighbors(stored, plan, [0], np.arange(5), 0, threshold=0.6)[0].user_ids == (1,)
    assert resolve_neighbors(stored, plan, [7], np.arange(5), 0)[7].user_ids == ()
    random_plan = resolve_variant(ModelConfig(K=2, variant="random_users"))
    drawn = resolve_neighbors(stored, random_plan, [0], np.arange(5), 0)[0]
    assert len(drawn) == 2 and 0 not in drawn.user_ids


def test_bce_values():
    assert bce_loss(Tensor([0.5]), [1]).item() == pytest.approx(math.log(2), abs=1e-12)
    expected = -(math.log(0.9) + math.log(0.8)) / 2
    assert bce_loss(Tensor([0.9, 0.2]), [1, 0]).item() == pytest.approx(expected, abs=1e-12)
    assert bce_loss(Tensor([1.0, 0.0]), [1, 0]).item() < 1e-11


def test_bce_shape_mismatch():
    with pytest.raises(DimensionError):
        bce_loss(Tensor([0.5, 0.5]), [1])


def test_early_stopping_trace():
    stopper = EarlyStopping(patience=1)
    stopped_at = None
    for epoch, score in enumerate([0.70, 0.72, 0.71], start=1):
        stopper.update(epoch, score, state=f"params@{epoch}")
        if stopper.should_stop:
            stopped_at = epoch
            break
    assert stopped_at == 3
    assert stopper.best_epoch == 2
    assert stopper.best_state == "params@2"


def test_zero_learning_rate_changes_nothing(tiny_inputs, tiny_model_config):
    initial = _model(tiny_model_config, seed=3)
    result = train(
        tiny_inputs, tiny_inputs, tiny_model_config,
        TrainingConfig(lr=0.0, batch_size=3, max_epochs=2, patience=5),
        N_ITEMS, D_PRIME, seed=3, initial=initial,
    )
    assert result.params.allclose(initial)
    assert len(result.log) == 2
    assert result.best_epoch == 1
    assert not result.stopped_early


def test_training_is_deterministic(tiny_inputs, tiny_model_config):
    config = TrainingConfig(lr=0.01, batch_size=3, max_epochs=2, patience=2)
    first = train(tiny_inputs, tiny_inputs, tiny_model_config, config, N_ITEMS, D_PRIME, seed=9)
    second = train(tiny_inputs, tiny_inputs, tiny_model_config, config, N_ITEMS, D_PRIME, seed=9)
    assert first.params.allclose(second.params)
    assert first.log_frame().drop(columns=["wall_time"]).equals(
        second.log_frame().drop(columns=["wall_time"])
    )


def test_nan_embedding_diverges_on_first_batch(tiny_inputs, tiny_model_config):
    params = _model(tiny_model_config)
    poisoned = params.with_arrays({"item_embedding": np.full(params["item_embedding"].shape, np.nan)})
    with pytest.raises(TrainingDivergenceError) as caught:
        train(
            tiny_inputs, tiny_inputs, tiny_model_config, TrainingConfig(batch_size=4),
            N_ITEMS, D_PRIME, initial=poisoned,
        )
    assert (caught.value.epoch, caught.value.batch) == (1, 0)


def test_training_log_csv(tmp_path, tiny_inputs, tiny_model_config):
    result = train(
        tiny_inputs, tiny_inputs, tiny_model_config, TrainingConfig(max_epochs=1), N_ITEMS, D_PRIME
    )
    path = result.write_log(tmp_path / "log.csv", include_time=False)
    assert path.read_text().splitlines()[0] == "epoch,train_loss,val_auc,val_logloss"


def test_save_and_load(tmp_path, tiny_model_config):
    config = tiny_model_config.model_copy(update={"variant": "no_pos"})
    params = _model(config, seed=2)
    params.save(tmp_path / "model.ctrt")
    loaded = ModelParams.load(tmp_path / "model.ctrt", config)
    assert loaded.allclose(params)
    assert loaded.frozen == params.frozen
    with pytest.raises(ConfigurationError):
        ModelParams.load(tmp_path / "model.ctrt", tiny_model_config.model_copy(update={"pooling": "avg"}))


def test_sample_contexts_replace_target_embedding_and_neighbors():
    sequences = {
        user: BehaviorSequence.of(user, items, split="train")
        for user, items in {1: [2, 3], 2: [4, 5, 6], 3: [7]}.items()
    }
    embeddings = {user: np.full(3, float(user)) for user in sequences}
    stored = {1: SimilarUserResult((SimilarUser(2, 0.9),))}
    prefix = BehaviorSequence.of(1, [2], split="train")
    samples = [TrainingSample(1, 3, 1, prefix), TrainingSample(1, 8, 0, prefix)]
    context = SampleContext(np.full(3, -1.0), SimilarUserResult((SimilarUser(3, 0.5),)))

    inputs = collate(samples, stored, sequences, embeddings, 3, 1, d_prime=3, contexts=[context] * 2)
    np.testing.assert_array_equal(inputs.slot_embeddings[:, 0], np.full((2, 3), -1.0))
    np.testing.assert_array_equal(inputs.slot_embeddings[:, 1], np.full((2, 3), 3.0))
    assert 7 in inputs.items[0] and 4 not in inputs.items[0]

    with pytest.raises(InternalConsistencyError, match="2 samples"):
        collate(samples, stored, sequences, embeddings, 3, 1, d_prime=3, contexts=[context])
