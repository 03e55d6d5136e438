"""Per-joint RMSE / MaxAE reports and prediction overlay artifacts."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import denormalize, normalize
from .errors import ConfigurationError
from .network import predict


def _pair(predictions, truth):
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(truth, dtype=float)
    if p.shape != y.shape:
        raise ConfigurationError(f"prediction shape {p.shape} != truth shape {y.shape}")
    if p.size == 0:
        raise ConfigurationError("empty predictions")
    return p, y


def rmse(predictions, truth, axis=None):
    """Root mean squared error; per column with ``axis=0``."""
    p, y = _pair(predictions, truth)
    return np.sqrt(np.mean((p - y) ** 2, axis=axis))


def max_abs_error(predictions, truth, axis=None):
    p, y = _pair(predictions, truth)
    return np.max(np.abs(p - y), axis=axis)


@dataclass(frozen=True)
class JointMetrics:
    joint: int          # 1-based
    rmse: float
    max_abs_error: float
    n_samples: int

    def __post_init__(self):
        # tiny slack for the sqrt/mean round-off when all errors are equal
        if not 0 <= self.rmse <= self.max_abs_error * (1 + 1e-12) + 1e-15:
            raise AssertionError(
                f"joint {self.joint}: rmse {self.rmse} exceeds MaxAE {self.max_abs_error}")


def joint_metrics(predictions, truth):
    """One :class:`JointMetrics` per column of a (T, joints) pair."""
    p, y = _pair(predictions, truth)
    if p.ndim == 1:
        p, y = p[:, None], y[:, None]
    r = rmse(p, y, axis=0)
    m = max_abs_error(p, y, axis=0)
    return [JointMetrics(j + 1, float(r[j]), float(m[j]), p.shape[0]) for j in range(p.shape[1])]


@dataclass
class EvaluationReport:
    """Aggregate and per-sequence metrics for one data partition, in degC."""

    joints: list
    tag: str
    model_id: str = ""
    stats_id: str = ""
    per_sequence: dict = field(default_factory=dict)   # provenance -> [JointMetrics]

    def __post_init__(self):
        idx = [m.joint for m in self.joints]
        if idx != list(range(1, len(idx) + 1)):
            raise ConfigurationError("report must hold exactly one entry per joint, in order")

    @property
    def rmse(self):
        return np.array([m.rmse for m in self.joints])

    @property
    def max_abs_error(self):
        return np.array([m.max_abs_error for m in self.joints])

    def to_dict(self):
        def rows(ms):
            return [{"joint": m.joint, "rmse": m.rmse, "max_abs_error": m.max_abs_error,
                     "n_samples": m.n_samples} for m in ms]
        return {
            "tag": self.tag,
            "model": self.model_id,
            "norm_stats": self.stats_id,
            "aggregate": rows(self.joints),
            "per_sequence": {k: rows(v) for k, v in self.per_sequence.items()},
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def write_table(self, path):
        """Motor-by-run table: one RMSE and one MaxAE column per sequence."""
        runs = list(self.per_sequence)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["motor"]
            for run in runs:
                header += [f"rmse[{run}]", f"maxae[{run}]"]
            w.writerow(header + ["rmse[all]", "maxae[all]"])
            for j, agg in enumerate(self.joints):
                row = [agg.joint]
                for run in runs:
                    m = self.per_sequence[run][j]
                    row += [f"{m.rmse:.4f}", f"{m.max_abs_error:.4f}"]
                w.writerow(row + [f"{agg.rmse:.4f}", f"{agg.max_abs_error:.4f}"])

    def format(self):
        lines = [f"{self.tag} partition ({len(self.per_sequence)} sequences)",
                 f"{'motor':>5} {'RMSE [C]':>10} {'MaxAE [C]':>10}"]
        for m in self.joints:
            lines.append(f"{m.joint:>5} {m.rmse:>10.4f} {m.max_abs_error:>10.4f}")
        return "\n".join(lines)


def predict_sequence(params, stats, X):
    """Raw inputs in, degC predictions out (dropout off)."""
    if X.shape[1] != params.input_size:
        raise ConfigurationError(
            f"model expects {params.input_size} input features, data has {X.shape[1]}")
    return denormalize(predict(params, normalize(X, stats.inputs)), stats.targets)


def evaluate_model(params, stats, dataset, model_id="", stats_id=""):
    """Denormalize predictions and compute per-joint metrics over a partition."""
    if len(dataset) == 0:
        raise ConfigurationError("cannot evaluate an empty dataset")
    if dataset.feature_width != params.input_size:
        raise ConfigurationError(
            f"model expects {params.input_size} input features, dataset has {dataset.feature_width}")
    preds, truths, per_seq = [], [], {}
    for X, Y, name in zip(dataset.inputs, dataset.targets, dataset.provenance):
        P = predict_sequence(params, stats, X)
        preds.append(P)
        truths.append(Y)
        per_seq[name] = joint_metrics(P, Y)
    agg = joint_metrics(np.vstack(preds), np.vstack(truths))
    return EvaluationReport(agg, dataset.tag, model_id, stats_id, per_seq)


def write_prediction_csv(path, time, truth, predictions):
    truth = np.asarray(truth, dtype=float).reshape(len(time), -1) if len(time) else np.zeros((0, 7))
    predictions = np.asarray(predictions, dtype=float).reshape(truth.shape)
    n = truth.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"truth_{j + 1}" for j in range(n)] + [f"pred_{j + 1}" for j in range(n)])
        for i in range(len(time)):
            w.writerow([repr(float(v)) for v in (time[i], *truth[i], *predictions[i])])


def read_prediction_csv(path):
    """Return ``(time, truth, predictions)`` from a prediction CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = (len(header) - 1) // 2
        rows = [[float(v) for v in row] for row in reader if row]
    a = np.array(rows, dtype=float).reshape(-1, 1 + 2 * n)
    return a[:, 0], a[:, 1:1 + n], a[:, 1 + n:]


def plot_joint(path, time, truth, prediction, joint):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(time, truth, label="measured", lw=1.5)
    ax.plot(time, prediction, "--", label="predicted", lw=1.2)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("temperature [°C]")
    ax.set_title(f"Motor {joint}")
    ax.grid(alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_prediction_artifacts(predictions, truth, prefix, time=None, dt=1.0):
    """Write ``<prefix>.csv`` and one ``<prefix>_motor<j>.svg`` overlay per joint.

    Empty traces produce a header-only CSV and no plots. Returns the list of
    written paths.
    """
    truth = np.asarray(truth, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if truth.shape != predictions.shape:
        raise ConfigurationError("predictions and truth are not aligned")
    if truth.ndim == 1:
        truth = truth.reshape(-1, 7) if truth.size == 0 else truth[:, None]
        predictions = predictions.reshape(truth.shape)
    n = truth.shape[0]
    time = np.arange(n) * dt if time is None else np.asarray(time, dtype=float)
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_name(prefix.name + ".csv")
    write_prediction_csv(csv_path, time, truth, predictions)
    written = [csv_path]
    if n == 0:
        return written
    for j in range(truth.shape[1]):
        path = prefix.with_name(f"{prefix.name}_motor{j + 1}.svg")
        plot_joint(path, time, truth[:, j], predictions[:, j], j + 1)
        written.append(path)
    return written
