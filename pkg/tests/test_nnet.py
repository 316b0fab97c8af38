import json

import numpy as np
import pytest

from udroute.nnet import (NonFiniteLossError, TrainConfig, forward,
                          forward_batch, gradient_check, init_model, load_model,
                          save_model, train)

from oracles import mlp_forward_reference, pairwise_order_agreement


def zero_model(omega):
    m = init_model(omega, 0)
    for w in m.weights:
        w[:] = 0.0
    for b in m.biases:
        b[:] = 0.0
    return m


def test_layer_dims():
    assert init_model(2, 0).layer_dims == [2, 100, 2, 1]
    assert init_model(4, 0).layer_dims == [4, 200, 4, 1]


def test_unsupported_omega():
    with pytest.raises(ValueError):
        init_model(3, 0)


def test_init_determinism():
    a = init_model(4, 42)
    b = init_model(4, 42)
    c = init_model(4, 43)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert not all(np.array_equal(x, y) for x, y in zip(a.weights, c.weights))
    assert all((b_ == 0).all() for b_ in a.biases)


def test_forward_zero_model_is_zero():
    m = zero_model(2)
    assert forward(m, [3.0, 4.0]) == 0.0
    assert forward(m, [0.0, 0.0]) == 0.0


def test_forward_passthrough_construction():
    # route x[0] through one rectified unit per hidden layer
    m = zero_model(2)
    m.weights[0][0, 0] = 1.0
    m.weights[1][0, 0] = 1.0
    m.weights[2][0, 0] = 1.0
    assert forward(m, [2.5, 7.0]) == 2.5
    # the negative side is attenuated by the leak at each hidden layer
    assert forward(m, [-2.5, 7.0]) == pytest.approx(-2.5 * 0.01 * 0.01)


def test_forward_matches_loop_reference():
    rng = np.random.default_rng(3)
    for omega in (2, 4):
        m = init_model(omega, 11)
        for _ in range(5):
            x = rng.uniform(-2, 2, size=omega)
            assert forward(m, x) == pytest.approx(mlp_forward_reference(m, x), abs=1e-9)


def test_forward_dimension_mismatch():
    m = init_model(2, 0)
    with pytest.raises(ValueError):
        forward(m, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        forward_batch(m, np.zeros((4, 3)))


def test_train_zero_targets_zero_model_is_fixed_point():
    m = zero_model(2)
    X = np.array([[1.0, 2.0], [0.5, 0.25]])
    Y = np.zeros(2)
    _, losses = train(m, X, Y, TrainConfig(iterations=10, optimizer="sgd",
                                           learning_rate=0.1))
    assert losses == [0.0] * 10
    assert all((w == 0).all() for w in m.weights)


def test_train_memorizes_single_sample():
    m = init_model(2, 5)
    _, losses = train(m, np.array([[0.5, 1.5]]), np.array([-2.0]),
                      TrainConfig(iterations=2000))
    assert losses[-1] < 1e-6
    assert forward(m, [0.5, 1.5]) == pytest.approx(-2.0, abs=1e-3)


def test_train_loss_trace_and_improvement():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 3, size=(64, 2))
    Y = -(X[:, 1] + 0.3 * X[:, 0]) + 0.01 * rng.normal(size=64)
    m = init_model(2, 1)
    _, losses = train(m, X, Y, TrainConfig(iterations=300))
    assert len(losses) == 300
    assert losses[-1] < losses[0]


def test_train_single_iteration_barely_moves():
    m = init_model(2, 2)
    before = [w.copy() for w in m.weights]
    _, losses = train(m, np.array([[1.0, 2.0]]), np.array([-1.0]),
                      TrainConfig(iterations=1, learning_rate=1e-3))
    assert len(losses) == 1
    worst = max(np.abs(w - b).max() for w, b in zip(m.weights, before))
    assert worst <= 1e-3 + 1e-9      # one adaptive-moment step is at most lr-ish


def test_train_recovers_linear_ranking():
    # targets from a linear metric: the net must reproduce its ordering
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 4, size=(200, 2))
    Y = -0.9 * X[:, 1] - 0.1 * X[:, 0]
    m = init_model(2, 3)
    train(m, X, Y, TrainConfig(iterations=1500))
    Xt = rng.uniform(0, 4, size=(100, 2))
    got = forward_batch(m, Xt)
    want = -0.9 * Xt[:, 1] - 0.1 * Xt[:, 0]
    assert pairwise_order_agreement(want, got) >= 0.95


def test_train_minibatch_deterministic():
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 2, size=(40, 2))
    Y = -X[:, 1]
    runs = []
    for _ in range(2):
        m = init_model(2, 9)
        train(m, X, Y, TrainConfig(iterations=60, batch=8, shuffle_seed=13))
        runs.append([w.copy() for w in m.weights])
    assert all(np.array_equal(a, b) for a, b in zip(*runs))


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_train_nonfinite_loss_raises():
    m = init_model(2, 1)
    X = np.array([[1e3, 1e3], [1e3, -1e3]] * 2)
    Y = np.array([1e150, -1e150] * 2)
    with pytest.raises(NonFiniteLossError):
        train(m, X, Y, TrainConfig(iterations=50, optimizer="sgd", learning_rate=1e6))


def test_train_input_validation():
    m = init_model(2, 0)
    with pytest.raises(ValueError):
        train(m, np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="momentum")
    with pytest.raises(ValueError):
        TrainConfig(batch=0)


def test_gradient_check_random_models():
    worst = 0.0
    for seed in range(4):
        for omega in (2, 4):
            m = init_model(omega, 50 + seed)
            rng = np.random.default_rng(seed)
            x = rng.uniform(0.1, 2.0, size=omega)
            y = forward(m, x) - 1.0        # O(1) residual keeps noise bounded
            worst = max(worst, gradient_check(m, x, y))
    assert worst <= 1e-4


def test_gradient_check_catches_broken_gradients():
    # a genuinely wrong gradient must stand out against the 1e-4 bound
    m = init_model(2, 50)
    x = np.array([0.7, 1.3])
    y = forward(m, x) - 1.0
    from udroute import nnet as nn_mod
    real = nn_mod.loss_and_grads

    def broken(model, X, Y):
        loss, gw, gb = real(model, X, Y)
        gw = [g * 1.05 for g in gw]
        return loss, gw, gb

    nn_mod.loss_and_grads = broken
    try:
        err = gradient_check(m, x, y)
    finally:
        nn_mod.loss_and_grads = real
    assert err > 1e-3


def test_gradient_check_zero_model():
    m = zero_model(2)
    assert gradient_check(m, [1.0, 2.0], 0.0) == 0.0


def test_model_json_roundtrip_bit_stable(tmp_path):
    rng = np.random.default_rng(2)
    m = init_model(4, 77, feature_kind="dist-stretch", feature_scale=1000.0,
                   target_scale=1000.0)
    train(m, rng.uniform(0, 2, size=(30, 4)), -rng.uniform(0, 3, size=30),
          TrainConfig(iterations=50))
    path = tmp_path / "model.json"
    save_model(m, path)
    m2 = load_model(path)
    X = rng.uniform(0, 3, size=(20, 4))
    assert np.array_equal(forward_batch(m, X), forward_batch(m2, X))
    assert m2.feature_kind == "dist-stretch"
    assert m2.feature_scale == 1000.0
    assert m2.target_scale == 1000.0
    assert m2.init_seed == 77
    json.loads(path.read_text())    # stays plain JSON
