import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from jointtherm.dataset import (STD_FLOOR, FeatureSelection, JointStateRecord, ModelStats,
                                NormStats, Trajectory, compute_norm_stats, csv_header,
                                denormalize, normalize, read_records, records_from_arrays,
                                select_features, split_seen_unseen, target_matrix,
                                window_sequences, write_records)
from jointtherm.errors import ConfigurationError, DataError, ParseError


def make_records(n=5, seed=0):
    rng = np.random.default_rng(seed)
    g = lambda: rng.standard_normal((n, 7))  # noqa: E731
    return records_from_arrays(np.arange(n, dtype=float), g(), 30 + g(), g(), g(), g())


def test_header_has_36_columns():
    h = csv_header()
    assert len(h) == 36 and h[0] == "t" and h[-1] == "temp_7"


def test_record_validation():
    with pytest.raises(ConfigurationError):
        JointStateRecord(0.0, (0,) * 7, (0,) * 7, (0,) * 6, (0,) * 7, (0,) * 7)
    with pytest.raises(ConfigurationError):
        JointStateRecord(0.0, (0,) * 7, (0,) * 7, (float("nan"),) * 7, (0,) * 7, (0,) * 7)


def test_csv_roundtrip_is_bit_exact(tmp_path):
    recs = make_records(20)
    path = tmp_path / "run.csv"
    write_records(recs, path)
    back = read_records(path)
    assert back == recs


def test_read_reports_line_numbers(tmp_path):
    recs = make_records(4)
    path = tmp_path / "run.csv"
    write_records(recs, path)
    lines = path.read_text().splitlines()

    bad = lines.copy()
    bad[3] = bad[3].rsplit(",", 1)[0]
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(ParseError, match="line 4"):
        read_records(path)

    bad = lines.copy()
    bad[2] = bad[2].replace(bad[2].split(",")[5], "nan", 1)
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(ParseError, match="line 3"):
        read_records(path)

    path.write_text("a,b,c\n")
    with pytest.raises(ParseError, match="line 1"):
        read_records(path)

    bad = lines.copy()
    bad[3], bad[4] = bad[4], bad[3]
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(DataError):
        read_records(path)


def test_feature_selection_widths():
    recs = make_records(3)
    assert select_features(recs).shape == (3, 7)
    everything = FeatureSelection(True, True, True, True)
    X = select_features(recs, everything)
    assert X.shape == (3, 28)
    # order is position, velocity, torque, current
    assert np.array_equal(X[:, 14:21], select_features(recs))
    with pytest.raises(ConfigurationError):
        FeatureSelection(False, False, False, False)
    with pytest.raises(ConfigurationError):
        FeatureSelection.from_groups(["torque", "voltage"])


def test_norm_stats_population_std():
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    s = compute_norm_stats(X)
    assert np.array_equal(s.mean, [2.0, 5.0])
    assert s.std[0] == 1.0
    assert s.std[1] == STD_FLOOR


def test_normalized_columns_are_standard(rng):
    X = rng.normal([3.0, -40.0, 1e3], [0.1, 5.0, 200.0], size=(1000, 3))
    Z = normalize(X, compute_norm_stats(X))
    assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(Z.std(axis=0), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 6)),
              elements=st.floats(-1e4, 1e4)))
def test_roundtrip_property(X):
    s = compute_norm_stats(X)
    back = denormalize(normalize(X, s), s)
    assert np.allclose(back, X, rtol=1e-12, atol=1e-9)


def test_width_mismatch_raises():
    s = NormStats.identity(7)
    with pytest.raises(ConfigurationError):
        normalize(np.zeros((3, 6)), s)
    with pytest.raises(ConfigurationError):
        denormalize(np.zeros((3, 8)), s)
    with pytest.raises(ConfigurationError):
        NormStats(np.zeros(2), np.array([1.0, 0.0]))


def test_model_stats_json_roundtrip(tmp_path):
    X = np.random.default_rng(0).standard_normal((50, 7))
    ms = ModelStats(compute_norm_stats(X), compute_norm_stats(X + 30),
                    FeatureSelection.from_groups(["torque", "current"]))
    ms.save(tmp_path / "stats.json")
    back = ModelStats.load(tmp_path / "stats.json")
    assert np.array_equal(back.inputs.mean, ms.inputs.mean)
    assert np.array_equal(back.targets.std, ms.targets.std)
    assert back.selection == ms.selection


def test_window_counts():
    X = np.zeros((10, 2))
    assert len(window_sequences(X, X, 10, 1)) == 1
    assert len(window_sequences(X, X, 5, 5)) == 2
    X = np.arange(100.0)[:, None]
    ds = window_sequences(X, X, 20, 10)
    assert len(ds) == (100 - 20) // 10 + 1
    assert all(x[0, 0] == 10 * i for i, x in enumerate(ds.inputs))
    assert len(window_sequences(X, X)) == 1
    with pytest.raises(ConfigurationError):
        window_sequences(X, X, 101)


def test_split_partitions():
    trajs = [Trajectory(f"r{i}", make_records(6, i)) for i in range(4)]
    seen, unseen = split_seen_unseen(trajs, ["r3"])
    assert seen.provenance == ["r0", "r1", "r2"] and unseen.provenance == ["r3"]
    assert seen.tag == "seen" and unseen.tag == "unseen"
    assert np.array_equal(unseen.targets[0], target_matrix(trajs[3].records))
    with pytest.raises(ConfigurationError):
        split_seen_unseen(trajs, ["r9"])
    with pytest.raises(ConfigurationError):
        split_seen_unseen(trajs + trajs[:1], [])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        seen, _ = split_seen_unseen(trajs, [t.id for t in trajs])
    assert len(seen) == 0 and w
