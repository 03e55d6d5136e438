import numpy as np
import pytest

from jointtherm.errors import ConfigurationError
from jointtherm.network import (ACTIVATIONS, DEFAULT_ACTIVATIONS, DenseLayerParams, LstmParams,
                                NetworkParams, activation, activation_grad, backward, forward,
                                glorot_limit, init_params, load_model, lstm_cell_step, predict,
                                save_model)
from jointtherm.training import mse_loss


def small_net(seed=0, dropout=0.0, D=3, H=4):
    return init_params(D, H, (5, 4, 3, 3, 2, 7), dropout=dropout, seed=seed)


def zero_net(D=3, H=4, dense_bias=None):
    lstm = LstmParams(np.zeros((4 * H, D)), np.zeros((4 * H, H)), np.zeros(4 * H))
    sizes = (5, 4, 3, 3, 2, 7)
    dense, width = [], H
    for k, (n, act) in enumerate(zip(sizes, DEFAULT_ACTIVATIONS)):
        b = np.zeros(n) if dense_bias is None else dense_bias[k]
        dense.append(DenseLayerParams(np.zeros((n, width)), b, act))
        width = n
    return NetworkParams(lstm, tuple(dense), 0.0)


def test_activation_values():
    assert activation("sigmoid", 0.0) == 0.5
    assert activation("tanh", 0.0) == 0.0
    assert activation("elu", 0.0) == 0.0
    assert activation("identity", 0.0) == 0.0
    assert activation("elu", -50.0) == pytest.approx(-1.0)
    assert activation("elu", 2.5) == 2.5
    with pytest.raises(ConfigurationError):
        activation("relu", 1.0)


@pytest.mark.parametrize("kind", ACTIVATIONS)
def test_activation_gradients(kind, rng):
    x = rng.uniform(-4, 4, 100)
    h = 1e-6
    fd = (activation(kind, x + h) - activation(kind, x - h)) / (2 * h)
    assert np.max(np.abs(activation_grad(kind, x) - fd)) < 1e-8


def test_init_rules():
    p = init_params(7, 32, seed=3)
    H = 32
    assert p.lstm.W_x.shape == (4 * H, 7) and p.lstm.W_h.shape == (4 * H, H)
    for name in ("input", "forget", "cell", "output"):
        Wx, Wh, b = p.lstm.gate(name)
        assert Wx.shape == (H, 7) and Wh.shape == (H, H) and b.shape == (H,)
        assert np.all(np.abs(Wx) <= glorot_limit(7, H))
        assert np.all(np.abs(Wh) <= glorot_limit(H, H))
        assert np.all(b == (1.0 if name == "forget" else 0.0))
    width = H
    for layer in p.dense:
        assert np.all(np.abs(layer.W) <= glorot_limit(width, layer.W.shape[0]))
        assert np.all(layer.b == 0)
        width = layer.W.shape[0]
    assert [layer.activation for layer in p.dense] == list(DEFAULT_ACTIVATIONS)
    assert p.output_size == 7
    q = init_params(7, 32, seed=3)
    assert all(np.array_equal(a, q.arrays()[k]) for k, a in p.arrays().items())


def test_bad_shapes_rejected():
    with pytest.raises(ConfigurationError):
        init_params(7, 8, (8, 7), activations=("tanh",))
    with pytest.raises(ConfigurationError):
        LstmParams(np.zeros((8, 3)), np.zeros((8, 3)), np.zeros(8))
    p = small_net()
    with pytest.raises(ConfigurationError):
        forward(p, np.zeros((5, 4)))


def test_cell_zero_params():
    lstm = zero_net().lstm
    h, c, _ = lstm_cell_step(lstm, np.ones(3), np.zeros(4), np.zeros(4))
    assert np.all(h == 0) and np.all(c == 0)
    c_prev = np.array([1.0, -2.0, 0.5, 4.0])
    _, c, gates = lstm_cell_step(lstm, np.ones(3), np.zeros(4), c_prev)
    assert np.array_equal(c, 0.5 * c_prev)
    assert np.all(gates[4:8] == 0.5)


def test_hidden_state_bounded(rng):
    lstm = LstmParams(rng.normal(0, 5, (16, 3)), rng.normal(0, 5, (16, 4)), rng.normal(0, 5, 16))
    h, c = np.zeros(4), np.zeros(4)
    for _ in range(200):
        h, c, _ = lstm_cell_step(lstm, rng.normal(0, 5, 3), h, c)
        assert np.all(np.abs(h) <= 1.0)
        assert np.all(np.isfinite(c))


def test_forward_matches_cell_steps(rng):
    p = small_net(1)
    X = rng.standard_normal((6, 3))
    _, cache = forward(p, X)
    h, c = np.zeros(4), np.zeros(4)
    for t in range(6):
        h, c, _ = lstm_cell_step(p.lstm, X[t], h, c)
        assert np.allclose(cache.h[0, t + 1], h, atol=1e-15)
        assert np.allclose(cache.c[0, t + 1], c, atol=1e-15)


def test_zero_lstm_gives_constant_prediction():
    biases = [np.full(n, 0.3 * (k + 1)) for k, n in enumerate((5, 4, 3, 3, 2, 7))]
    p = zero_net(dense_bias=biases)
    a = np.zeros(4)
    for layer in p.dense:
        a = activation(layer.activation, layer.W @ a + layer.b)
    pred = predict(p, np.random.default_rng(0).standard_normal((9, 3)))
    assert np.allclose(pred, a[None, :], atol=0)


def test_dropout_off_is_deterministic(rng):
    p = small_net(2)
    X = rng.standard_normal((5, 3))
    assert np.array_equal(predict(p, X), predict(p, X))
    assert np.array_equal(forward(p, X, dropout=0.0)[0], predict(p, X))


def test_dropout_needs_rng():
    with pytest.raises(ConfigurationError):
        forward(small_net(), np.zeros((2, 3)), dropout=0.1)


def test_inverted_dropout_expectation():
    # the hidden activations feeding a layer keep their mean under dropout
    p = small_net(4)
    X = np.random.default_rng(5).standard_normal((3, 3))
    gen = np.random.default_rng(6)
    ref = forward(p, X)[1].layer_inputs[0]
    acc = np.zeros_like(ref)
    n = 10_000
    for _ in range(n):
        acc += forward(p, X, dropout=0.1, rng=gen)[1].layer_inputs[0]
    assert np.allclose(acc / n, ref, atol=0.02 * np.abs(ref).max() + 1e-3)


def test_output_layer_not_dropped(rng):
    _, cache = forward(small_net(), rng.standard_normal((4, 3)), dropout=0.5, rng=rng)
    assert cache.masks[-1] is None
    assert all(m is not None for m in cache.masks[:-1])


def fd_grads(p, X, Y, h=1e-6):
    arrays = {k: a.copy() for k, a in p.arrays().items()}
    out = {}
    for name, a in arrays.items():
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            lp = mse_loss(predict(p.replace_arrays(arrays), X), Y)[0]
            a[idx] = orig - h
            lm = mse_loss(predict(p.replace_arrays(arrays), X), Y)[0]
            a[idx] = orig
            g[idx] = (lp - lm) / (2 * h)
        out[name] = g
    return out


def test_backward_matches_finite_differences(rng):
    p = small_net(7)
    X = rng.standard_normal((4, 3))
    Y = rng.standard_normal((4, 7))
    pred, cache = forward(p, X)
    grads = backward(p, cache, mse_loss(pred, Y)[1])
    fd = fd_grads(p, X, Y)
    for k in fd:
        assert np.allclose(grads[k], fd[k], rtol=1e-4, atol=1e-8), k


def test_backward_with_dropout_masks(rng):
    # with fixed masks the network is a deterministic function: check it too
    p = small_net(8)
    X = rng.standard_normal((4, 3))
    Y = rng.standard_normal((4, 7))
    pred, cache = forward(p, X, dropout=0.3, rng=np.random.default_rng(9))
    grads = backward(p, cache, mse_loss(pred, Y)[1])
    eps = 1e-6
    W = p.dense[2].W
    for idx in [(0, 0), (1, 2), (2, 3)]:
        vals = []
        for s in (eps, -eps):
            arr = {k: a.copy() for k, a in p.arrays().items()}
            arr["dense.2.W"][idx] += s
            out = forward(p.replace_arrays(arr), X, dropout=0.3, rng=np.random.default_rng(9))[0]
            vals.append(mse_loss(out, Y)[0])
        assert grads["dense.2.W"][idx] == pytest.approx((vals[0] - vals[1]) / (2 * eps),
                                                        rel=1e-5, abs=1e-9)
    assert W.shape == grads["dense.2.W"].shape


def test_batched_equals_per_sequence(rng):
    p = small_net(10)
    Xb = rng.standard_normal((3, 6, 3))
    Yb = rng.standard_normal((3, 6, 7))
    pred, cache = forward(p, Xb)
    gb = backward(p, cache, 2 * (pred - Yb))
    total = {k: 0.0 for k in gb}
    for b in range(3):
        pb, cb = forward(p, Xb[b])
        assert np.allclose(pb, pred[b], atol=1e-14)
        for k, g in backward(p, cb, 2 * (pb - Yb[b])).items():
            total[k] = total[k] + g
    for k in gb:
        assert np.allclose(gb[k], total[k], atol=1e-12)


def test_truncation_changes_only_recurrent_path(rng):
    p = small_net(11)
    X = rng.standard_normal((8, 3))
    Y = rng.standard_normal((8, 7))
    pred, cache = forward(p, X)
    d = mse_loss(pred, Y)[1]
    full = backward(p, cache, d)
    cut = backward(p, cache, d, truncate=2)
    assert np.array_equal(full["dense.5.W"], cut["dense.5.W"])
    assert not np.allclose(full["lstm.W_h"], cut["lstm.W_h"])
    assert all(np.allclose(full[k], v) for k, v in backward(p, cache, d, truncate=100).items())


def test_model_roundtrip(tmp_path, rng):
    p = init_params(7, 6, (5, 4, 3, 3, 2, 7), seed=1)
    save_model(tmp_path / "m.json", p, extra={"note": "x"})
    q, stats, meta = load_model(tmp_path / "m.json")
    assert stats is None and meta == {"note": "x"}
    X = rng.standard_normal((5, 7))
    assert np.array_equal(predict(p, X), predict(q, X))
    assert q.config == p.config
