"""
Analytic gradients against central finite differences (h=1e-5, float64).
"""

import numpy as np
import pytest

from apps.ctr.losses import bce_loss
from apps.ctr.model import ModelParams, forward
from apps.tensor import Tensor
from apps.tensor import ops
from apps.tensor.gradcheck import gradcheck
from apps.tensor.losses import binary_cross_entropy

TOLERANCE = 1e-4

rng = np.random.default_rng(42)


def away_from_zero(shape, low=0.2, high=1.5):
    return rng.uniform(low, high, shape) * rng.choice([-1.0, 1.0], shape)


def weighted(fn, shape, seed=0):
    """Reduce an op's output to a scalar with fixed random weights."""
    weights = Tensor(np.random.default_rng(seed).normal(size=shape))
    return lambda t: ops.reduce_sum(ops.mul(fn(t), weights))


MASK = np.array([[True, False, True, True, False], [False, False, True, False, False]])

CASES = {
    "matmul": (
        lambda t: ops.matmul(t["a"], t["b"]),
        {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4, 2))},
        (3, 2),
    ),
    "matmul_batched": (
        lambda t: ops.matmul(t["a"], t["b"]),
        {"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(4, 2))},
        (2, 3, 2),
    ),
    "bmm": (
        lambda t: ops.bmm(t["a"], t["b"]),
        {"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(2, 4, 5))},
        (2, 3, 5),
    ),
    "add": (lambda t: ops.add(t["a"], t["b"]), {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4))}, (3, 4)),
    "sub": (lambda t: ops.sub(t["a"], t["b"]), {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4))}, (3, 4)),
    "mul": (lambda t: ops.mul(t["a"], t["b"]), {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4))}, (3, 4)),
    "scale": (lambda t: ops.scale(t["a"], -2.5), {"a": rng.normal(size=(5,))}, (5,)),
    "relu": (lambda t: ops.relu(t["a"]), {"a": away_from_zero((4, 3))}, (4, 3)),
    "sigmoid": (lambda t: ops.sigmoid(t["a"]), {"a": rng.normal(size=(6,))}, (6,)),
    "exp": (lambda t: ops.exp(t["a"]), {"a": rng.normal(size=(6,))}, (6,)),
    "log": (lambda t: ops.log(t["a"]), {"a": rng.uniform(0.5, 2.0, (6,))}, (6,)),
    "clip": (
        lambda t: ops.clip(t["a"], -1.0, 1.0),
        {"a": np.concatenate([rng.uniform(-0.8, 0.8, 4), away_from_zero(4, 1.2, 2.0)])},
        (8,),
    ),
    "softmax_masked": (lambda t: ops.softmax_masked(t["a"], MASK), {"a": rng.normal(size=(2, 5))}, (2, 5)),
    "gather_rows": (
        lambda t: ops.gather_rows(t["table"], [[0, 2, 2], [4, 1, 0]]),
        {"table": rng.normal(size=(5, 3))},
        (2, 3, 3),
    ),
    "concat": (
        lambda t: ops.concat([t["a"], t["b"]], axis=1),
        {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(2, 2))},
        (2, 5),
    ),
    "reduce_sum": (lambda t: ops.reduce_sum(t["a"], axis=1), {"a": rng.normal(size=(3, 4))}, (3,)),
    "mean": (lambda t: ops.mean(t["a"], axis=0), {"a": rng.normal(size=(3, 4))}, (4,)),
    "expand": (lambda t: ops.expand(t["a"], 1, 4), {"a": rng.normal(size=(2, 3))}, (2, 4, 3)),
    "reshape": (lambda t: ops.reshape(t["a"], (3, 4)), {"a": rng.normal(size=(2, 6))}, (3, 4)),
    "transpose": (lambda t: ops.transpose(t["a"], (2, 0, 1)), {"a": rng.normal(size=(2, 3, 4))}, (4, 2, 3)),
    "narrow": (lambda t: ops.narrow(t["a"], 1, 1, 4), {"a": rng.normal(size=(3, 5))}, (3, 3)),
    "add_bias": (
        lambda t: ops.add_bias(t["x"], t["bias"]),
        {"x": rng.normal(size=(2, 3, 4)), "bias": rng.normal(size=(4,))},
        (2, 3, 4),
    ),
    "binary_cross_entropy": (
        lambda t: binary_cross_entropy(t["p"], [1.0, 0.0, 1.0, 0.0]),
        {"p": rng.uniform(0.1, 0.9, (4,))},
        (),
    ),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_op_gradients(name):
    fn, inputs, shape = CASES[name]
    errors = gradcheck(weighted(fn, shape), inputs)
    assert max(errors.values()) < TOLERANCE, errors


def test_matmul_gradient_at_identity():
    inputs = {"a": np.eye(2), "b": rng.normal(size=(2, 2))}
    errors = gradcheck(weighted(lambda t: ops.matmul(t["a"], t["b"]), (2, 2)), inputs)
    assert max(errors.values()) < 1e-6


def test_attention_pooling_gradient():
    """Scaled logits, masked softmax and weighted pooling composed as in the model."""
    mask = np.array([[True, True, False, True]])

    def pooled(t):
        logits = ops.scale(ops.reduce_sum(ops.mul(ops.expand(t["q"], 1, 4), t["k"]), axis=-1), 0.5)
        weights = ops.softmax_masked(logits, mask)
        products = ops.mul(ops.expand(t["q"], 1, 4), t["v"])
        return ops.reduce_sum(ops.mul(ops.expand(weights, 2, 3), products), axis=1)

    inputs = {"q": rng.normal(size=(1, 3)), "k": rng.normal(size=(1, 4, 3)), "v": rng.normal(size=(1, 4, 3))}
    errors = gradcheck(weighted(pooled, (1, 3)), inputs)
    assert max(errors.values()) < TOLERANCE, errors


def test_whole_model_gradient(tiny_inputs, tiny_model_config):
    base = ModelParams.initialize(10, 5, tiny_model_config, seed=0)
    # random values everywhere keep every ReLU away from its kink
    perturb = np.random.default_rng(7)
    arrays = {name: perturb.normal(0.0, 0.3, value.shape) for name, value in base.arrays().items()}

    def loss(leaves):
        params = ModelParams(leaves, tiny_model_config)
        return bce_loss(forward(tiny_inputs, params), tiny_inputs.labels)

    errors = gradcheck(loss, arrays, max_entries=25)
    assert set(errors) == set(base.names())
    assert max(errors.values()) < TOLERANCE, errors
