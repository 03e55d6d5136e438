"""LSTM feature extractor followed by a stack of dense layers.

``X`` has shape (time, features), or (batch, time, features) for a stack of
equal-length sequences, and the network emits one prediction row per
timestep. Gate blocks in the stacked
LSTM weights are ordered input, forget, cell, output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

GATES = ("input", "forget", "cell", "output")
ACTIVATIONS = ("tanh", "elu", "sigmoid", "identity")

DEFAULT_HIDDEN = 32
DEFAULT_DENSE = (32, 24, 16, 12, 8, 7)
DEFAULT_ACTIVATIONS = ("tanh", "elu", "sigmoid", "tanh", "elu", "identity")

MODEL_FORMAT = "jointtherm-model/1"


def _sigmoid(x):
    # tanh form avoids overflow warnings for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activation(kind, x):
    """Apply a named activation element-wise."""
    x = np.asarray(x, dtype=float)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "elu":
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    if kind == "sigmoid":
        return _sigmoid(x)
    if kind == "identity":
        return x.copy()
    raise ConfigurationError(f"unknown activation {kind!r}")


def activation_grad(kind, x):
    """Derivative of :func:`activation` with respect to its input."""
    x = np.asarray(x, dtype=float)
    if kind == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if kind == "elu":
        return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))
    if kind == "sigmoid":
        s = _sigmoid(x)
        return s * (1.0 - s)
    if kind == "identity":
        return np.ones_like(x)
    raise ConfigurationError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class LstmParams:
    """Stacked gate weights.

    ``W_x`` is (4H, D), ``W_h`` is (4H, H) and ``b`` is (4H,); rows
    ``[k*H:(k+1)*H]`` belong to gate ``GATES[k]``.
    """

    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4, D = self.W_x.shape
        if H4 % 4 or H4 == 0:
            raise ConfigurationError("LSTM input weights must have 4*H rows")
        H = H4 // 4
        if self.W_h.shape != (4 * H, H) or self.b.shape != (4 * H,):
            raise ConfigurationError(
                f"inconsistent LSTM shapes: W_x {self.W_x.shape}, "
                f"W_h {self.W_h.shape}, b {self.b.shape}")

    @property
    def hidden_size(self):
        return self.W_h.shape[1]

    @property
    def input_size(self):
        return self.W_x.shape[1]

    def gate(self, name):
        """Return ``(W_x, W_h, b)`` slices for one gate."""
        k = GATES.index(name)
        H = self.hidden_size
        s = slice(k * H, (k + 1) * H)
        return self.W_x[s], self.W_h[s], self.b[s]


@dataclass(frozen=True)
class DenseLayerParams:
    W: np.ndarray
    b: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ConfigurationError(
                f"dense weight {self.W.shape} and bias {self.b.shape} disagree")


@dataclass(frozen=True)
class NetworkParams:
    lstm: LstmParams
    dense: tuple
    dropout: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "dense", tuple(self.dense))
        width = self.lstm.hidden_size
        for i, layer in enumerate(self.dense):
            if layer.W.shape[1] != width:
                raise ConfigurationError(
                    f"dense layer {i} expects {layer.W.shape[1]} inputs, previous layer gives {width}")
            width = layer.W.shape[0]

    @property
    def input_size(self):
        return self.lstm.input_size

    @property
    def output_size(self):
        return self.dense[-1].W.shape[0]

    @property
    def config(self):
        return {
            "input_size": self.input_size,
            "hidden_size": self.lstm.hidden_size,
            "dense_sizes": [layer.W.shape[0] for layer in self.dense],
            "activations": [layer.activation for layer in self.dense],
            "dropout": self.dropout,
        }

    def arrays(self):
        """Flat ``{name: array}`` view of every trainable tensor."""
        out = {"lstm.W_x": self.lstm.W_x, "lstm.W_h": self.lstm.W_h, "lstm.b": self.lstm.b}
        for i, layer in enumerate(self.dense):
            out[f"dense.{i}.W"] = layer.W
            out[f"dense.{i}.b"] = layer.b
        return out

    def replace_arrays(self, arrays):
        """Build a new parameter set with tensors taken from ``arrays``."""
        lstm = LstmParams(arrays["lstm.W_x"], arrays["lstm.W_h"], arrays["lstm.b"])
        dense = tuple(
            DenseLayerParams(arrays[f"dense.{i}.W"], arrays[f"dense.{i}.b"], layer.activation)
            for i, layer in enumerate(self.dense))
        return NetworkParams(lstm, dense, self.dropout)

    def n_parameters(self):
        return sum(a.size for a in self.arrays().values())


@dataclass
class ForwardCache:
    """Everything backward needs, stored batch-major: (B, T, ...)."""

    X: np.ndarray            # (B, T, D)
    gates: np.ndarray        # (B, T, 4H) post-activation i, f, g, o
    c: np.ndarray            # (B, T+1, H); [:, 0] is c0
    h: np.ndarray            # (B, T+1, H); [:, 0] is h0
    tanh_c: np.ndarray       # (B, T, H)
    layer_inputs: list = field(default_factory=list)   # dropped inputs per dense layer
    pre_activations: list = field(default_factory=list)
    masks: list = field(default_factory=list)          # scaled keep masks or None
    batched: bool = False

    def __len__(self):
        return self.X.shape[1]


def _glorot(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def glorot_limit(fan_in, fan_out):
    return np.sqrt(6.0 / (fan_in + fan_out))


def init_params(input_size, hidden_size=DEFAULT_HIDDEN, dense_sizes=DEFAULT_DENSE,
                activations=None, dropout=0.1, seed=0):
    """Glorot-uniform initialization with forget-gate bias 1.

    Each LSTM gate block is drawn as its own (H, D) and (H, H) matrix so the
    Glorot range matches a single gate's fan-in and fan-out.
    """
    dense_sizes = tuple(int(s) for s in dense_sizes)
    sizes = (int(input_size), int(hidden_size)) + dense_sizes
    if any(s < 1 for s in sizes):
        raise ConfigurationError(f"layer sizes must be >= 1, got {sizes}")
    if not dense_sizes:
        raise ConfigurationError("at least one dense layer is required")
    if activations is None:
        if len(dense_sizes) == len(DEFAULT_ACTIVATIONS):
            activations = DEFAULT_ACTIVATIONS
        else:
            cycle = DEFAULT_ACTIVATIONS[:-1]
            activations = tuple(cycle[i % len(cycle)] for i in range(len(dense_sizes) - 1)) + ("identity",)
    activations = tuple(activations)
    if len(activations) != len(dense_sizes):
        raise ConfigurationError("need one activation per dense layer")
    if not 0.0 <= dropout < 1.0:
        raise ConfigurationError(f"dropout must be in [0, 1), got {dropout}")

    rng = np.random.default_rng(seed)
    D, H = sizes[0], sizes[1]
    W_x = np.concatenate([_glorot(rng, H, D) for _ in GATES])
    W_h = np.concatenate([_glorot(rng, H, H) for _ in GATES])
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0
    lstm = LstmParams(W_x, W_h, b)

    dense = []
    width = H
    for size, act in zip(dense_sizes, activations):
        dense.append(DenseLayerParams(_glorot(rng, size, width), np.zeros(size), act))
        width = size
    return NetworkParams(lstm, tuple(dense), float(dropout))


def lstm_cell_step(params, x_t, h_prev, c_prev):
    """Advance the LSTM cell by one timestep.

    Returns ``(h_t, c_t, gates)`` where ``gates`` stacks the activated
    input, forget, cell and output gates.
    """
    x_t = np.asarray(x_t, dtype=float)
    H = params.hidden_size
    if x_t.shape != (params.input_size,) or np.shape(h_prev) != (H,) or np.shape(c_prev) != (H,):
        raise ConfigurationError(
            f"expected x ({params.input_size},), h/c ({H},); got {x_t.shape}, "
            f"{np.shape(h_prev)}, {np.shape(c_prev)}")
    z = params.W_x @ x_t + params.W_h @ h_prev + params.b
    gates = np.empty_like(z)
    gates[:2 * H] = _sigmoid(z[:2 * H])
    gates[2 * H:3 * H] = np.tanh(z[2 * H:3 * H])
    gates[3 * H:] = _sigmoid(z[3 * H:])
    i, f, g, o = gates[:H], gates[H:2 * H], gates[2 * H:3 * H], gates[3 * H:]
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t, gates


def _lstm_forward(lstm, X):
    B, T, _ = X.shape
    H = lstm.hidden_size
    xproj = X @ lstm.W_x.T + lstm.b
    W_hT = lstm.W_h.T
    gates = np.empty((B, T, 4 * H))
    c = np.zeros((B, T + 1, H))
    h = np.zeros((B, T + 1, H))
    tanh_c = np.empty((B, T, H))
    for t in range(T):
        z = xproj[:, t] + h[:, t] @ W_hT
        gt = gates[:, t]
        gt[:, :2 * H] = _sigmoid(z[:, :2 * H])
        gt[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        gt[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        c[:, t + 1] = gt[:, H:2 * H] * c[:, t] + gt[:, :H] * gt[:, 2 * H:3 * H]
        tanh_c[:, t] = np.tanh(c[:, t + 1])
        h[:, t + 1] = gt[:, 3 * H:] * tanh_c[:, t]
    return gates, c, h, tanh_c


def forward(params, X, dropout=None, rng=None):
    """Run a sequence (or a batch of equal-length sequences) through the network.

    Parameters
    ----------
    params : NetworkParams
    X : ndarray, shape (T, D) or (B, T, D)
    dropout : float or None
        Drop probability for the inputs of every hidden dense layer. ``None``
        or 0 disables dropout; survivors are scaled by ``1/(1-p)``.
    rng : numpy.random.Generator
        Required when dropout is active.

    Returns
    -------
    predictions : ndarray, shape (T, output_size) or (B, T, output_size)
    cache : ForwardCache
    """
    X = np.asarray(X, dtype=float)
    batched = X.ndim == 3
    if X.ndim not in (2, 3) or X.shape[-1] != params.input_size:
        raise ConfigurationError(
            f"expected input width {params.input_size}, got shape {X.shape}")
    if not batched:
        X = X[None]
    p = float(dropout or 0.0)
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"dropout must be in [0, 1), got {p}")
    if p > 0 and rng is None:
        raise ConfigurationError("dropout needs an rng")

    gates, c, h, tanh_c = _lstm_forward(params.lstm, X)
    cache = ForwardCache(X=X, gates=gates, c=c, h=h, tanh_c=tanh_c, batched=batched)

    a = h[:, 1:]
    last = len(params.dense) - 1
    for i, layer in enumerate(params.dense):
        mask = None
        if p > 0 and i < last:
            mask = (rng.random(a.shape) >= p) / (1.0 - p)
            a = a * mask
        z = a @ layer.W.T + layer.b
        cache.layer_inputs.append(a)
        cache.pre_activations.append(z)
        cache.masks.append(mask)
        a = activation(layer.activation, z)
    return (a if batched else a[0]), cache


def predict(params, X):
    """Deterministic forward pass with dropout off."""
    return forward(params, X)[0]


def backward(params, cache, d_predictions, truncate=None):
    """Exact gradients of a scalar loss given ``dLoss/dPredictions``.

    Reverse-accumulates through the dense stack (reusing the stored dropout
    masks) and then through every LSTM timestep. With ``truncate=k`` the
    recurrent gradient is cut every ``k`` steps counted from the start of the
    sequence.

    Returns
    -------
    dict
        Same keys and shapes as :meth:`NetworkParams.arrays`.
    """
    B, T = cache.X.shape[:2]
    d_pred = np.asarray(d_predictions, dtype=float)
    if not cache.batched:
        d_pred = d_pred[None]
    if len(cache.pre_activations) != len(params.dense) or cache.X.shape[2] != params.input_size:
        raise ConfigurationError("cache was not produced by these parameters")
    if d_pred.shape != (B, T, params.output_size):
        raise ConfigurationError(
            f"upstream gradient shape {np.shape(d_predictions)} does not match the predictions")
    if truncate is not None and truncate < 1:
        raise ConfigurationError("truncate must be >= 1")

    grads = {}
    delta_a = d_pred
    for i in range(len(params.dense) - 1, -1, -1):
        layer = params.dense[i]
        dz = delta_a * activation_grad(layer.activation, cache.pre_activations[i])
        dz2 = dz.reshape(-1, dz.shape[-1])
        grads[f"dense.{i}.W"] = dz2.T @ cache.layer_inputs[i].reshape(dz2.shape[0], -1)
        grads[f"dense.{i}.b"] = dz2.sum(axis=0)
        delta_a = dz @ layer.W
        if cache.masks[i] is not None:
            delta_a = delta_a * cache.masks[i]
    dh_seq = delta_a

    lstm = params.lstm
    H = lstm.hidden_size
    gates, c, tanh_c = cache.gates, cache.c, cache.tanh_c
    dZ = np.empty((B, T, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    W_h = lstm.W_h
    for t in range(T - 1, -1, -1):
        gt = gates[:, t]
        i_g, f_g, g_g, o_g = gt[:, :H], gt[:, H:2 * H], gt[:, 2 * H:3 * H], gt[:, 3 * H:]
        dh = dh_seq[:, t] + dh_next
        dc = dc_next + dh * o_g * (1.0 - tanh_c[:, t] ** 2)
        dzt = dZ[:, t]
        dzt[:, :H] = dc * g_g * i_g * (1.0 - i_g)
        dzt[:, H:2 * H] = dc * c[:, t] * f_g * (1.0 - f_g)
        dzt[:, 2 * H:3 * H] = dc * i_g * (1.0 - g_g ** 2)
        dzt[:, 3 * H:] = dh * tanh_c[:, t] * o_g * (1.0 - o_g)
        if truncate is not None and t % truncate == 0:
            dh_next = np.zeros((B, H))
            dc_next = np.zeros((B, H))
        else:
            dh_next = dzt @ W_h
            dc_next = dc * f_g
    dZ2 = dZ.reshape(B * T, 4 * H)
    grads["lstm.W_x"] = dZ2.T @ cache.X.reshape(B * T, -1)
    grads["lstm.W_h"] = dZ2.T @ cache.h[:, :-1].reshape(B * T, H)
    grads["lstm.b"] = dZ2.sum(axis=0)
    return grads


def _encode(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode(obj):
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


def params_to_dict(params):
    return {
        "config": params.config,
        "arrays": {name: _encode(a) for name, a in params.arrays().items()},
    }


def params_from_dict(obj):
    cfg = obj["config"]
    arr = {name: _decode(v) for name, v in obj["arrays"].items()}
    lstm = LstmParams(arr["lstm.W_x"], arr["lstm.W_h"], arr["lstm.b"])
    dense = tuple(
        DenseLayerParams(arr[f"dense.{i}.W"], arr[f"dense.{i}.b"], act)
        for i, act in enumerate(cfg["activations"]))
    params = NetworkParams(lstm, dense, float(cfg["dropout"]))
    if params.config["dense_sizes"] != list(cfg["dense_sizes"]):
        raise ConfigurationError("model file sizes disagree with its weight arrays")
    return params


def save_model(path, params, stats=None, extra=None):
    """Write a model file: format tag, config, weights, and normalization stats.

    Floats are written with ``repr`` precision so a reload is bit-exact.
    """
    doc = {"format": MODEL_FORMAT, **params_to_dict(params)}
    if stats is not None:
        doc["norm_stats"] = stats.to_dict()
    if extra:
        doc["meta"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(params, ModelStats or None, meta)``."""
    from .dataset import ModelStats

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigurationError(f"{path}: unsupported model format {doc.get('format')!r}")
    params = params_from_dict(doc)
    stats = ModelStats.from_dict(doc["norm_stats"]) if "norm_stats" in doc else None
    return params, stats, doc.get("meta", {})
