"""Joint telemetry ingestion, feature selection, z-scoring and windowing."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, ParseError
from .plant import N_JOINTS

GROUPS = ("position", "velocity", "torque", "current")
_GROUP_PREFIX = {"position": "pos", "velocity": "vel", "torque": "tau",
                 "current": "cur", "temperature": "temp"}
_ALL_GROUPS = GROUPS + ("temperature",)

STD_FLOOR = 1e-8
STATS_FORMAT = "jointtherm-normstats/1"


def csv_header(n_joints=N_JOINTS):
    cols = ["t"]
    for g in _ALL_GROUPS:
        cols += [f"{_GROUP_PREFIX[g]}_{j + 1}" for j in range(n_joints)]
    return cols


@dataclass(frozen=True)
class JointStateRecord:
    """One telemetry sample: timestamp [s] plus five per-joint channel groups."""

    timestamp: float
    position: tuple
    velocity: tuple
    torque: tuple
    current: tuple
    temperature: tuple

    def __post_init__(self):
        n = len(self.position)
        for g in _ALL_GROUPS:
            vals = tuple(float(v) for v in getattr(self, g))
            if len(vals) != n:
                raise ConfigurationError(f"{g} has {len(vals)} joints, expected {n}")
            if not all(math.isfinite(v) for v in vals):
                raise ConfigurationError(f"non-finite {g} value")
            object.__setattr__(self, g, vals)
        if not math.isfinite(self.timestamp):
            raise ConfigurationError("non-finite timestamp")

    @property
    def n_joints(self):
        return len(self.position)

    def row(self):
        out = [self.timestamp]
        for g in _ALL_GROUPS:
            out.extend(getattr(self, g))
        return out


@dataclass(frozen=True)
class FeatureSelection:
    """Which channel groups feed the network. Torque only by default."""

    position: bool = False
    velocity: bool = False
    torque: bool = True
    current: bool = False

    def __post_init__(self):
        if not self.groups:
            raise ConfigurationError("feature selection is empty")

    @property
    def groups(self):
        return tuple(g for g in GROUPS if getattr(self, g))

    def width(self, n_joints=N_JOINTS):
        return n_joints * len(self.groups)

    @classmethod
    def from_groups(cls, groups):
        groups = list(groups)
        unknown = set(groups) - set(GROUPS)
        if unknown:
            raise ConfigurationError(f"unknown feature groups {sorted(unknown)}")
        return cls(**{g: g in groups for g in GROUPS})


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if mean.shape != std.shape or mean.ndim != 1:
            raise ConfigurationError("mean and std must be 1-D arrays of equal length")
        if np.any(std < STD_FLOOR):
            raise ConfigurationError(f"std entries must be >= {STD_FLOOR}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def __len__(self):
        return self.mean.size

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n), np.ones(n))

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


@dataclass(frozen=True)
class ModelStats:
    """Everything needed to map raw telemetry into and out of network units."""

    inputs: NormStats
    targets: NormStats
    selection: FeatureSelection = field(default_factory=FeatureSelection)
    normalized: bool = True

    def to_dict(self):
        return {
            "format": STATS_FORMAT,
            "per_channel": True,
            "normalized": self.normalized,
            "features": list(self.selection.groups),
            "inputs": self.inputs.to_dict(),
            "targets": self.targets.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != STATS_FORMAT:
            raise ConfigurationError(f"unsupported stats format {d.get('format')!r}")
        return cls(NormStats.from_dict(d["inputs"]), NormStats.from_dict(d["targets"]),
                   FeatureSelection.from_groups(d["features"]), bool(d["normalized"]))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SequenceDataset:
    """Aligned input/target sequences from one data partition."""

    inputs: list
    targets: list
    provenance: list
    tag: str = "seen"

    def __post_init__(self):
        if not (len(self.inputs) == len(self.targets) == len(self.provenance)):
            raise ConfigurationError("inputs, targets and provenance differ in length")
        for x, y in zip(self.inputs, self.targets):
            if x.shape[0] != y.shape[0]:
                raise ConfigurationError(
                    f"input length {x.shape[0]} != target length {y.shape[0]}")
        if self.tag not in ("seen", "unseen"):
            raise ConfigurationError(f"tag must be 'seen' or 'unseen', got {self.tag!r}")

    def __len__(self):
        return len(self.inputs)

    @property
    def feature_width(self):
        return self.inputs[0].shape[1] if self.inputs else 0


@dataclass
class Trajectory:
    """One recorded run: an identifier and its records."""

    id: str
    records: list


def _format(v):
    # shortest repr that round-trips; keeps CSV re-reads bit-exact
    return repr(float(v))


def write_records(records, path):
    """Write records using the 36-column telemetry CSV schema."""
    n = records[0].n_joints if records else N_JOINTS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(n))
        for r in records:
            w.writerow([_format(v) for v in r.row()])


def read_records(path):
    """Parse a telemetry CSV into records, in file order.

    Raises
    ------
    ParseError
        Header mismatch, wrong column count or an unparseable / non-finite
        cell; the message carries the 1-based line number.
    DataError
        Timestamps that are not strictly increasing.
    """
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file (missing header)", line=1) from None
        n_cols = len(header)
        n_joints, rem = divmod(n_cols - 1, len(_ALL_GROUPS))
        if rem or n_joints < 1 or header != csv_header(n_joints):
            raise ParseError(f"unexpected header {header[:4]}...", line=1)
        prev_t = -math.inf
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise ParseError(f"expected {n_cols} columns, found {len(row)}", line=lineno)
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite value", line=lineno)
            t = vals[0]
            if t <= prev_t:
                raise DataError(f"line {lineno}: timestamp {t} does not increase (previous {prev_t})")
            prev_t = t
            groups = [tuple(vals[1 + k * n_joints:1 + (k + 1) * n_joints])
                      for k in range(len(_ALL_GROUPS))]
            records.append(JointStateRecord(t, *groups))
    return records


def records_from_arrays(time, torque, temperature, position=None, velocity=None, current=None):
    """Assemble records from per-channel (n, joints) arrays; missing groups are zeros."""
    torque = np.asarray(torque, dtype=float)
    n, j = torque.shape
    zeros = np.zeros((n, j))
    position = zeros if position is None else np.asarray(position, dtype=float)
    velocity = zeros if velocity is None else np.asarray(velocity, dtype=float)
    current = zeros if current is None else np.asarray(current, dtype=float)
    temperature = np.asarray(temperature, dtype=float)
    return [JointStateRecord(float(time[i]), tuple(position[i]), tuple(velocity[i]),
                             tuple(torque[i]), tuple(current[i]), tuple(temperature[i]))
            for i in range(n)]


def channel_matrix(records, group):
    return np.array([getattr(r, group) for r in records], dtype=float).reshape(len(records), -1)


def select_features(records, selection=None):
    """Stack the selected channel groups as columns, position->velocity->torque->current."""
    selection = FeatureSelection() if selection is None else selection
    if not selection.groups:
        raise ConfigurationError("feature selection is empty")
    return np.hstack([channel_matrix(records, g) for g in selection.groups])


def target_matrix(records):
    return channel_matrix(records, "temperature")


def compute_norm_stats(matrix):
    """Column-wise population mean and std, with std floored at ``STD_FLOOR``."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.size == 0:
        raise ConfigurationError("cannot compute statistics of an empty matrix")
    mean = m.mean(axis=0)
    std = np.maximum(m.std(axis=0), STD_FLOOR)
    return NormStats(mean, std)


def _check_width(matrix, stats):
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[1] != len(stats):
        raise ConfigurationError(
            f"matrix width {m.shape[-1] if m.ndim else 0} != {len(stats)} stats channels")
    return m


def normalize(matrix, stats):
    """Z-score each column: ``(x - mean) / std``."""
    m = _check_width(matrix, stats)
    return (m - stats.mean) / stats.std


def denormalize(matrix, stats):
    """Map network-space values back to physical units: ``x * std + mean``."""
    m = _check_width(matrix, stats)
    return m * stats.std + stats.mean


def window_sequences(matrix, targets, window_len=None, stride=1, source="", tag="seen"):
    """Cut aligned overlapping windows from one trajectory.

    ``window_len=None`` keeps the whole trajectory as a single sequence.
    """
    X = np.asarray(matrix, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ConfigurationError("inputs and targets differ in length")
    n = X.shape[0]
    window_len = n if window_len is None else int(window_len)
    if window_len < 1 or stride < 1:
        raise ConfigurationError("window_len and stride must be >= 1")
    if window_len > n:
        raise ConfigurationError(f"window of {window_len} exceeds sequence length {n}")
    starts = range(0, n - window_len + 1, stride)
    return SequenceDataset(
        inputs=[X[s:s + window_len] for s in starts],
        targets=[Y[s:s + window_len] for s in starts],
        provenance=[f"{source}@{s}" if window_len < n else source for s in starts],
        tag=tag,
    )


def split_seen_unseen(trajectories, unseen_ids, selection=None, window_len=None, stride=1):
    """Partition trajectories into seen and unseen datasets by id.

    Returns raw (un-normalized) sequences; normalization happens in training
    so that statistics come from the seen partition only.
    """
    ids = [t.id for t in trajectories]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("duplicate trajectory ids")
    unseen_ids = set(unseen_ids)
    unknown = unseen_ids - set(ids)
    if unknown:
        raise ConfigurationError(f"unknown trajectory ids {sorted(unknown)}")
    parts = {"seen": SequenceDataset([], [], [], "seen"),
             "unseen": SequenceDataset([], [], [], "unseen")}
    for traj in trajectories:
        tag = "unseen" if traj.id in unseen_ids else "seen"
        windows = window_sequences(select_features(traj.records, selection),
                                   target_matrix(traj.records), window_len, stride,
                                   source=traj.id, tag=tag)
        parts[tag].inputs.extend(windows.inputs)
        parts[tag].targets.extend(windows.targets)
        parts[tag].provenance.extend(windows.provenance)
    if trajectories and not parts["seen"].inputs:
        warnings.warn("every trajectory is marked unseen; the seen partition is empty",
                      stacklevel=2)
    return parts["seen"], parts["unseen"]


def load_trajectories(paths):
    """Read several CSV files; each file's stem becomes its trajectory id."""
    from pathlib import Path

    return [Trajectory(Path(p).stem, read_records(p)) for p in paths]


def trajectory_seeds(count, seed=0):
    return [int(seed) * 1000 + i for i in range(count)]


def simulate_trajectories(count=18, seed=0, duration=600.0, dt=1.0, kind="composite",
                          params=None, amplitude=None):
    """Synthetic runs from the thermal plant, one profile seed per run.

    Ids are ``run_00``, ``run_01``, ...; by convention the last two are held
    out as unseen data.
    """
    from .plant import simulate_run

    out = []
    for i, s in enumerate(trajectory_seeds(count, seed)):
        run = simulate_run(s, kind=kind, duration=duration, dt=dt, params=params,
                           amplitude=amplitude)
        out.append(Trajectory(f"run_{i:02d}", records_from_arrays(
            run["time"], run["torque"], run["temperature"],
            run["position"], run["velocity"], run["current"])))
    return out
