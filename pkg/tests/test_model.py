import json

import numpy as np
import pytest

from gemselect.errors import NumericError, ShapeError
from gemselect.model import (
    Layer,
    OptimizerState,
    SkipConnectedModel,
    backward,
    forward,
    init_model,
    load_model,
    logits_grad_from_tau,
    model_from_dict,
    model_to_dict,
    optimizer_step,
    save_model,
    soft_assign,
)

from oracles import central_diff, straight_line_forward


def flat_params(model):
    return np.concatenate([p.ravel() for p in model.parameters()])


def set_flat(model, vec):
    out = []
    pos = 0
    for p in model.parameters():
        out.append(vec[pos : pos + p.size].reshape(p.shape))
        pos += p.size
    model.set_parameters(out)


def test_zero_parameters_give_zero_logits():
    model = init_model(3, 2, hidden=(4,), seed=0)
    for p in model.parameters():
        p[...] = 0.0
    X = np.random.default_rng(0).standard_normal((5, 3))
    np.testing.assert_array_equal(forward(model, X), np.zeros((5, 2)))


def test_skip_only_identity():
    model = SkipConnectedModel(
        [Layer(np.zeros((2, 2)), np.zeros(2), "relu"), Layer(np.zeros((2, 2)), np.zeros(2), "identity")],
        np.eye(2),
        hierarchy=10.0,
    )
    logits = forward(model, np.array([[3.0, -1.0]]))
    np.testing.assert_array_equal(logits, np.array([[3.0, -1.0]]))


def test_forward_matches_straight_line_reimplementation():
    model = init_model(5, 3, hidden=(7, 4), seed=11)
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 5))
    got = forward(model, X)
    for i in range(6):
        np.testing.assert_allclose(got[i], straight_line_forward(model, X[i]), rtol=1e-12)


def test_forward_shape_and_finiteness_errors():
    model = init_model(4, 2, hidden=(3,), seed=0)
    with pytest.raises(ShapeError):
        forward(model, np.zeros((2, 5)))
    with pytest.raises(NumericError):
        forward(model, np.array([[np.inf, 0, 0, 0]]))


def test_soft_assign_uniform_and_closed_form():
    np.testing.assert_allclose(soft_assign(np.zeros((3, 4))), np.full((3, 4), 0.25))
    row = soft_assign(np.array([[np.log(3.0), 0.0]]))
    np.testing.assert_allclose(row, [[0.75, 0.25]], atol=1e-12)


def test_soft_assign_overflow_stability():
    tau = soft_assign(np.array([[1000.0, 0.0]]))
    assert np.isfinite(tau).all()
    np.testing.assert_allclose(tau, [[1.0, 0.0]], atol=1e-12)


def test_soft_assign_rows_sum_to_one_random():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        k = int(rng.integers(2, 6))
        logits = rng.uniform(-1e3, 1e3, size=(n, k))
        tau = soft_assign(logits)
        assert np.abs(tau.sum(axis=1) - 1.0).max() <= 1e-12
        assert np.all(tau >= 0.0) and np.all(tau < 1.0)
        # strict positivity holds while exp() cannot underflow
        if np.ptp(logits, axis=1).max() < 700:
            assert np.all(tau > 0.0)


def test_backward_zero_grad_and_skip_rows():
    model = init_model(3, 2, hidden=(4,), seed=5)
    X = np.random.default_rng(3).standard_normal((6, 3))
    grads = backward(model, X, np.zeros((6, 2)))
    for g in grads:
        assert np.all(g == 0.0)

    # skip-only model: one-hot grad at sample i, cluster k -> skip row k == x_i
    skim = SkipConnectedModel(
        [Layer(np.zeros((2, 3)), np.zeros(2), "relu"), Layer(np.zeros((2, 2)), np.zeros(2), "identity")],
        np.zeros((2, 3)),
        hierarchy=1.0,
    )
    gl = np.zeros((6, 2))
    gl[4, 1] = 1.0
    grads = backward(skim, X, gl)
    np.testing.assert_allclose(grads[-1][1], X[4])
    np.testing.assert_allclose(grads[-1][0], np.zeros(3))


def test_backward_matches_finite_differences():
    model = init_model(4, 3, hidden=(5, 4), seed=23)
    rng = np.random.default_rng(9)
    X = rng.standard_normal((8, 4))
    W = rng.standard_normal((8, 3))  # fixed linear functional of the logits

    base = flat_params(model).copy()

    def loss(vec):
        set_flat(model, vec)
        out = float((forward(model, X) * W).sum())
        set_flat(model, base)
        return out

    analytic = backward(model, X, W)
    flat_analytic = np.concatenate([g.ravel() for g in analytic])
    fd = central_diff(loss, base, h=1e-5)
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(flat_analytic)), 1e-6)
    assert (np.abs(fd - flat_analytic) / denom).max() < 1e-4


def test_backward_shape_error():
    model = init_model(3, 2, hidden=(4,), seed=0)
    with pytest.raises(ShapeError):
        backward(model, np.zeros((5, 3)), np.zeros((5, 3)))


def test_softmax_backprop_identity():
    rng = np.random.default_rng(4)
    logits = rng.standard_normal((7, 3))
    tau = soft_assign(logits)
    g_tau = rng.standard_normal((7, 3))

    def value(vec):
        t = soft_assign(vec.reshape(7, 3))
        return float((t * g_tau).sum())

    fd = central_diff(value, logits.ravel(), h=1e-6).reshape(7, 3)
    np.testing.assert_allclose(logits_grad_from_tau(tau, g_tau), fd, atol=1e-8)


def test_adam_first_step_magnitude():
    p = np.array([1.0])
    state = OptimizerState.adam([p], lr=1e-3)
    optimizer_step(state, [p], [np.array([1.0])])
    assert p[0] == pytest.approx(1.0 - 1e-3, abs=1e-9)
    assert state.step == 1


def test_momentum_two_identical_gradients():
    p = np.array([0.0])
    g = np.array([2.0])
    state = OptimizerState.momentum_sgd([p], lr=0.1)
    optimizer_step(state, [p], [g])
    first = p[0]
    optimizer_step(state, [p], [g])
    assert first == pytest.approx(-0.1 * 2.0)
    assert p[0] - first == pytest.approx(-0.1 * 2.0 * 1.9)


def test_zero_gradient_keeps_parameters():
    p = np.array([1.0, -2.0])
    state = OptimizerState.momentum_sgd([p], lr=0.5)
    optimizer_step(state, [p], [np.zeros(2)])
    np.testing.assert_array_equal(p, [1.0, -2.0])


def test_optimizer_shape_mismatch():
    p = np.array([1.0])
    state = OptimizerState.adam([p])
    with pytest.raises(ShapeError):
        state.apply([p], [np.zeros(2)])


def test_serialization_roundtrip_bit_identical(tmp_path):
    model = init_model(6, 3, hidden=(9,), seed=77, config_digest="abc123")
    X = np.random.default_rng(5).standard_normal((4, 6))
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.hierarchy == model.hierarchy
    assert loaded.seed == model.seed
    assert loaded.config_digest == "abc123"
    np.testing.assert_array_equal(forward(loaded, X), forward(model, X))
    # a second roundtrip produces identical bytes
    path2 = tmp_path / "model2.json"
    save_model(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_model_dict_layer_dims_and_validation():
    model = init_model(4, 2, hidden=(3,), seed=0)
    doc = model_to_dict(model)
    assert doc["layer_dims"] == [4, 3, 2]
    doc = json.loads(json.dumps(doc))
    rebuilt = model_from_dict(doc)
    rebuilt.validate()
    with pytest.raises(ShapeError):
        bad = model_to_dict(model)
        bad["skip"] = np.zeros((2, 9)).tolist()
        model_from_dict(bad)
