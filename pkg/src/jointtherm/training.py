"""MSE + Adam training loop and the finite-difference gradient check."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import ModelStats, NormStats, FeatureSelection, compute_norm_stats, normalize
from .errors import ConfigurationError, TrainingDivergedError
from .network import DEFAULT_DENSE, DEFAULT_HIDDEN, backward, forward, init_params


def mse_loss(predictions, targets):
    """Mean squared error over all elements and its gradient w.r.t. predictions."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(targets, dtype=float)
    if p.shape != y.shape:
        raise ConfigurationError(f"prediction shape {p.shape} != target shape {y.shape}")
    if p.size == 0:
        raise ConfigurationError("empty predictions")
    diff = p - y
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        arrays = params.arrays()
        return cls(lr, beta1, beta2, eps, 0,
                   {k: np.zeros_like(a) for k, a in arrays.items()},
                   {k: np.zeros_like(a) for k, a in arrays.items()})


def adam_step(params, grads, state):
    """One bias-corrected Adam update.

    Returns new ``(params, state)``; the inputs are left untouched.

    Raises
    ------
    TrainingDivergedError
        If any gradient entry is non-finite.
    """
    arrays = params.arrays()
    if set(grads) != set(arrays):
        raise ConfigurationError("gradient keys do not match parameters")
    for name, g in grads.items():
        if g.shape != arrays[name].shape:
            raise ConfigurationError(f"gradient {name} has shape {g.shape}, expected {arrays[name].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(
                f"non-finite gradient in {name} at Adam step {state.t + 1}", params=params)

    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_arrays, m, v = {}, {}, {}
    for name, p in arrays.items():
        g = grads[name]
        m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        new_arrays[name] = p - state.lr * (m[name] / c1) / (np.sqrt(v[name] / c2) + state.eps)
    new_state = AdamState(state.lr, b1, b2, state.eps, t, m, v)
    return params.replace_arrays(new_arrays), new_state


@dataclass(frozen=True)
class TrainingConfig:
    """Training hyperparameters. The defaults are this package's choices."""

    epochs: int = 300
    learning_rate: float = 1e-3
    lr_milestones: tuple = ()       # epochs at which the learning rate is scaled
    lr_decay: float = 0.1
    dropout: float = 0.1
    seed: int = 0
    normalize: bool = True
    hidden_size: int = DEFAULT_HIDDEN
    dense_sizes: tuple = DEFAULT_DENSE
    activations: tuple = None
    shuffle: bool = True
    batch_size: int = 1
    truncate: int = None
    patience: int = 20
    min_improvement: float = 1e-7
    report_every: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigurationError("lr_decay must be in (0, 1]")
        if any(m < 1 for m in self.lr_milestones):
            raise ConfigurationError("lr_milestones must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.truncate is not None and self.truncate < 1:
            raise ConfigurationError("truncate must be >= 1")
        object.__setattr__(self, "dense_sizes", tuple(self.dense_sizes))
        object.__setattr__(self, "lr_milestones", tuple(sorted(self.lr_milestones)))


@dataclass
class LossHistory:
    """Per-epoch mean training loss.

    ``loss`` is in network (normalized) units. ``physical_loss`` is the same
    quantity mapped back to squared degrees so runs with and without
    normalization can be compared on one scale.
    """

    loss: list = field(default_factory=list)
    physical_loss: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    stopped_early: bool = False

    def __len__(self):
        return len(self.loss)

    def epochs_to_reach(self, threshold, physical=True):
        """First 1-based epoch whose loss is <= threshold, or None."""
        values = self.physical_loss if physical else self.loss
        for i, v in enumerate(values):
            if v <= threshold:
                return i + 1
        return None

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for i, v in enumerate(self.loss, start=1):
                fh.write(f"{i},{v!r}\n")


@dataclass
class TrainResult:
    params: object
    history: LossHistory
    stats: ModelStats

    def __iter__(self):
        return iter((self.params, self.history, self.stats))


def _batches(order, sequences, batch_size):
    """Group indices, in visiting order, into batches of equal-length sequences."""
    if batch_size == 1:
        return [[int(i)] for i in order]
    out, open_ = [], {}
    for i in order:
        bucket = open_.setdefault(sequences[i].shape[0], [])
        bucket.append(int(i))
        if len(bucket) == batch_size:
            out.append(bucket)
            del open_[sequences[i].shape[0]]
    out.extend(b for b in open_.values())
    return out


def fit_stats(dataset, normalize_data=True, selection=None):
    """Statistics from the given (seen) partition, or identity maps if disabled."""
    X = np.vstack(dataset.inputs)
    Y = np.vstack(dataset.targets)
    if normalize_data:
        sx, sy = compute_norm_stats(X), compute_norm_stats(Y)
    else:
        sx, sy = NormStats.identity(X.shape[1]), NormStats.identity(Y.shape[1])
    return ModelStats(sx, sy, selection or FeatureSelection(), normalize_data)


def train(dataset, config=None, init_seed=None, selection=None, progress=None):
    """Fit a network to a seen partition.

    Statistics are computed on ``dataset`` only. Each epoch visits every
    sequence once in a seeded random order and takes one Adam step per
    sequence.

    Returns
    -------
    TrainResult
        Unpacks as ``params, history, stats``.
    """
    config = config or TrainingConfig()
    if len(dataset) == 0:
        raise ConfigurationError("training dataset is empty")
    stats = fit_stats(dataset, config.normalize, selection)
    Xs = [normalize(x, stats.inputs) for x in dataset.inputs]
    Ys = [normalize(y, stats.targets) for y in dataset.targets]
    scale = stats.targets.std ** 2

    params = init_params(
        Xs[0].shape[1], config.hidden_size, config.dense_sizes, config.activations,
        dropout=config.dropout, seed=config.seed if init_seed is None else init_seed)
    if params.output_size != Ys[0].shape[1]:
        raise ConfigurationError(
            f"network output width {params.output_size} != target width {Ys[0].shape[1]}")
    state = AdamState.fresh(params, lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    history = LossHistory()
    best = np.inf
    best_epoch = 0

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        if epoch in config.lr_milestones:
            state.lr *= config.lr_decay
        order = rng.permutation(len(Xs)) if config.shuffle else np.arange(len(Xs))
        total = total_phys = 0.0
        for batch in _batches(order, Xs, config.batch_size):
            X = Xs[batch[0]] if len(batch) == 1 else np.stack([Xs[i] for i in batch])
            Y = Ys[batch[0]] if len(batch) == 1 else np.stack([Ys[i] for i in batch])
            pred, cache = forward(params, X, dropout=config.dropout, rng=rng)
            loss, dpred = mse_loss(pred, Y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite in epoch {epoch + 1}", params=params, history=history)
            grads = backward(params, cache, dpred, truncate=config.truncate)
            try:
                params, state = adam_step(params, grads, state)
            except TrainingDivergedError as exc:
                exc.history = history
                raise
            total += loss * len(batch)
            total_phys += float(np.mean((pred - Y) ** 2 * scale)) * len(batch)
        history.loss.append(total / len(Xs))
        history.physical_loss.append(total_phys / len(Xs))
        history.wall_time.append(time.perf_counter() - t0)
        if progress is not None and config.report_every and (epoch + 1) % config.report_every == 0:
            progress(epoch + 1, history.loss[-1])

        if history.loss[-1] < best - config.min_improvement:
            best, best_epoch = history.loss[-1], epoch
        elif config.patience and epoch - best_epoch >= config.patience:
            history.stopped_early = True
            break

    return TrainResult(params, history, stats)


def relative_errors(analytic, numeric, floor=1e-6):
    """Element-wise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numerical_gradients(params, X, Y, h=1e-5):
    """Central finite differences of the MSE loss for every parameter entry."""
    arrays = {k: a.copy() for k, a in params.arrays().items()}
    out = {}
    for name, a in arrays.items():
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = mse_loss(forward(params.replace_arrays(arrays), X)[0], Y)[0]
            flat[i] = orig - h
            lm = mse_loss(forward(params.replace_arrays(arrays), X)[0], Y)[0]
            flat[i] = orig
            gflat[i] = (lp - lm) / (2.0 * h)
        out[name] = g
    return out


def analytic_gradients(params, X, Y, truncate=None):
    pred, cache = forward(params, X)
    _, dpred = mse_loss(pred, Y)
    return backward(params, cache, dpred, truncate=truncate)


@dataclass
class GradientCheckReport:
    tolerance: float
    max_errors: dict            # seed -> max relative error over all parameters
    per_parameter: dict         # seed -> {name: max relative error}

    @property
    def max_error(self):
        return max(self.max_errors.values()) if self.max_errors else 0.0

    @property
    def passed(self):
        return self.max_error < self.tolerance

    def summary(self):
        state = "PASS" if self.passed else "FAIL"
        return (f"gradient check {state}: max relative error {self.max_error:.3e} "
                f"over {len(self.max_errors)} seeds (tolerance {self.tolerance:g})")


def gradient_check_suite(input_size=7, hidden_size=8, dense_sizes=(8, 6, 4, 3, 2, 7),
                         seq_len=5, seeds=range(5), tolerance=1e-4, h=1e-5,
                         grad_fn=None):
    """Compare analytic and finite-difference gradients on small random nets.

    ``grad_fn(params, X, Y)`` defaults to the backpropagation path; passing a
    deliberately broken one is how the harness itself is tested.
    """
    grad_fn = grad_fn or analytic_gradients
    max_errors, per_param = {}, {}
    for seed in seeds:
        rng = np.random.default_rng(10_000 + int(seed))
        params = init_params(input_size, hidden_size, dense_sizes, dropout=0.0, seed=int(seed))
        # random biases so no gradient is trivially zero by symmetry
        arrays = {k: a + (0.1 * rng.standard_normal(a.shape) if k.endswith("b") else 0.0)
                  for k, a in params.arrays().items()}
        params = params.replace_arrays(arrays)
        X = rng.standard_normal((seq_len, input_size))
        Y = rng.standard_normal((seq_len, params.output_size))
        analytic = grad_fn(params, X, Y)
        numeric = numerical_gradients(params, X, Y, h=h)
        errs = {k: float(relative_errors(analytic[k], numeric[k]).max()) for k in numeric}
        per_param[int(seed)] = errs
        max_errors[int(seed)] = max(errs.values())
    return GradientCheckReport(tolerance, max_errors, per_param)
