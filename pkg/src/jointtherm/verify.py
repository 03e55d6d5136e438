"""Acceptance checks, shared by the ``verify`` command and the test suite.

Each ``criterion_N`` function runs one acceptance criterion at its stated
tolerance and runtime limit and returns a :class:`CheckResult`.
"""

from __future__ import annotations

import contextlib
import io
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (compute_norm_stats, denormalize, normalize, read_records,
                      simulate_trajectories, split_seen_unseen, write_records)
from .evaluation import (EvaluationReport, evaluate_model, joint_metrics, read_prediction_csv,
                         write_prediction_csv)
from .gauss2 import PUBLISHED_COEFFICIENTS, Gauss2Coefficients, eval_gauss2, fit_gauss2
from .plant import ThermalPlantParams, TorqueTrace, simulate_plant, steady_state_temperature
from .training import TrainingConfig, gradient_check_suite, train

# Criterion 4 setup: 18 one-hour runs sampled every 3 s, the last two held out.
# A 16-unit LSTM without dropout, trained full batch, fits in the time limit.
GENERALIZATION_RUNS = dict(count=18, seed=0, duration=3600.0, dt=3.0)
GENERALIZATION_CONFIG = TrainingConfig(epochs=6000, learning_rate=1e-2, dropout=0.0, seed=0,
                                       hidden_size=16, batch_size=16, patience=0)

# Criterion 3 setup: small enough to train twice in well under the limit.
NORMALIZATION_RUNS = dict(count=8, seed=5, duration=300.0, dt=2.0)
NORMALIZATION_TRAINING = dict(epochs=150, learning_rate=3e-3, dropout=0.1, seed=0, patience=0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    limit: float = float("inf")

    def line(self):
        state = "PASS" if self.passed else "FAIL"
        timing = f" ({self.elapsed:.1f} s, limit {self.limit:g} s)" if np.isfinite(self.limit) else ""
        return f"[{state}] {self.name}: {self.detail}{timing}"


def _result(name, passed, detail, t0, limit):
    elapsed = time.perf_counter() - t0
    return CheckResult(name, bool(passed and elapsed < limit), detail, elapsed, limit)


def criterion_1(seed=2024):
    """Gauss2 fit from a 20 % perturbed start on noisy and noiseless data."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    x = np.arange(2000.0)
    clean = eval_gauss2(PUBLISHED_COEFFICIENTS, x)
    y = clean + rng.normal(0.0, 0.08, x.size)
    init = Gauss2Coefficients.from_array(
        PUBLISHED_COEFFICIENTS.as_array() * (1 + rng.uniform(-0.2, 0.2, 6)))
    noisy = fit_gauss2(x, y, init=init)
    exact = fit_gauss2(x, clean, init=init)
    passed = 0.05 <= noisy.rmse <= 0.11 and noisy.r_squared >= 0.98 and exact.rmse <= 1e-6
    detail = (f"noisy RMSE {noisy.rmse:.4f} in [0.05, 0.11], R2 {noisy.r_squared:.5f} >= 0.98, "
              f"noiseless RMSE {exact.rmse:.1e} <= 1e-6")
    return _result("1 Gauss2 regime", passed, detail, t0, 10)


def criterion_2():
    """Analytic vs finite-difference gradients on small random networks."""
    t0 = time.perf_counter()
    report = gradient_check_suite(input_size=7, hidden_size=8, dense_sizes=(8, 6, 4, 3, 2, 7),
                                  seq_len=5, seeds=range(5), tolerance=1e-4)
    detail = f"max relative error {report.max_error:.2e} < 1e-4 over 5 seeds"
    return _result("2 gradient correctness", report.passed, detail, t0, 60)


def criterion_3():
    """Z-scored training reaches a loss threshold sooner and ends lower."""
    t0 = time.perf_counter()
    seen, _ = split_seen_unseen(simulate_trajectories(**NORMALIZATION_RUNS), [])
    # half the mean per-joint target variance, in degC^2
    threshold = 0.5 * float(np.mean(compute_norm_stats(np.vstack(seen.targets)).std ** 2))
    hist_n = train(seen, TrainingConfig(normalize=True, **NORMALIZATION_TRAINING)).history
    hist_u = train(seen, TrainingConfig(normalize=False, **NORMALIZATION_TRAINING)).history
    e_n = hist_n.epochs_to_reach(threshold)
    e_u = hist_u.epochs_to_reach(threshold)
    # never reaching the threshold counts as one epoch past the budget
    never = NORMALIZATION_TRAINING["epochs"] + 1
    faster = (e_n or never) < (e_u or never)
    final_ok = hist_n.physical_loss[-1] <= hist_u.physical_loss[-1]
    detail = (f"epochs to {threshold:.3f} degC^2: normalized {e_n or 'never'}, "
              f"raw {e_u or 'never'}; final loss {hist_n.physical_loss[-1]:.4f} vs "
              f"{hist_u.physical_loss[-1]:.4f} degC^2")
    return _result("3 normalization convergence", faster and final_ok, detail, t0, 600)


def generalization_run(runs=None, config=None):
    """Train on all but the last two runs and evaluate both partitions.

    Returns a dict with ``params``, ``stats``, ``history``, ``seen`` and
    ``unseen`` reports, the two datasets and the wall time.
    """
    t0 = time.perf_counter()
    trajs = simulate_trajectories(**(runs or GENERALIZATION_RUNS))
    seen, unseen = split_seen_unseen(trajs, [t.id for t in trajs[-2:]])
    params, history, stats = train(seen, config or GENERALIZATION_CONFIG)
    return {
        "params": params, "stats": stats, "history": history,
        "seen_data": seen, "unseen_data": unseen,
        "seen": evaluate_model(params, stats, seen, "generalization", "seen statistics"),
        "unseen": evaluate_model(params, stats, unseen, "generalization", "seen statistics"),
        "elapsed": time.perf_counter() - t0,
    }


def criterion_4(run=None):
    """Unseen per-joint MaxAE below 0.5 degC and RMSE within 5x of seen."""
    t0 = time.perf_counter()
    run = run or generalization_run()
    seen, unseen = run["seen"], run["unseen"]
    ratio = unseen.rmse / seen.rmse
    passed = np.all(unseen.max_abs_error < 0.5) and np.all(ratio <= 5.0)
    worst = int(np.argmax(unseen.max_abs_error))
    detail = (f"unseen MaxAE max {unseen.max_abs_error[worst]:.3f} degC (motor {worst + 1}) "
              f"< 0.5, unseen/seen RMSE ratio max {ratio.max():.2f} <= 5; per motor MaxAE "
              f"{np.round(unseen.max_abs_error, 3).tolist()}")
    result = _result("4 generalization", passed, detail, t0, 1200)
    result.elapsed = run["elapsed"]
    result.passed = bool(passed and run["elapsed"] < 1200)
    return result


def criterion_5(reports=(), n_random=200, seed=5):
    """RMSE never exceeds MaxAE in any emitted report."""
    t0 = time.perf_counter()
    reports = list(reports)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        n = int(rng.integers(1, 50))
        truth = rng.normal(30.0, 3.0, (n, 7))
        # heavy-tailed errors make rmse and MaxAE far apart or nearly equal
        pred = truth + rng.standard_t(2, (n, 7))
        reports.append(EvaluationReport(joint_metrics(pred, truth), "unseen"))
    entries = [m for r in reports for m in r.joints]
    entries += [m for r in reports for ms in r.per_sequence.values() for m in ms]
    passed = all(m.rmse <= m.max_abs_error for m in entries)
    detail = f"rmse <= MaxAE for {len(entries)} joint entries in {len(reports)} reports"
    return _result("5 metric invariant", passed, detail, t0, 60)


def criterion_6(n_steps=10_000):
    """Exponential-step plant against the closed-form solution."""
    t0 = time.perf_counter()
    p = ThermalPlantParams(thermal_resistance=2.0, thermal_capacitance=40.0,
                           heating_coefficient=0.5, ambient_temperature=22.0)
    tau, T0 = 3.0, 25.0
    T = simulate_plant(p, TorqueTrace(1.0, np.full((n_steps, 1), tau)), T0).values[:, 0]
    T_ss = steady_state_temperature(p, tau)
    exact = T_ss + (T0 - T_ss) * np.exp(-np.arange(n_steps) / p.time_constant)
    err = float(np.max(np.abs(T - exact)))
    ss_err = abs(T_ss - (22.0 + 2.0 * 0.5 * tau ** 2))
    detail = f"max error {err:.1e} < 1e-9 over {n_steps} steps, steady state error {ss_err:.1e}"
    return _result("6 plant oracle", err < 1e-9 and ss_err <= 1e-12, detail, t0, 60)


def criterion_7(workdir=None):
    """Two identical ``train`` invocations give byte-identical outputs."""
    from .cli import main

    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(workdir or tmp)
        data = root / "data"
        with contextlib.redirect_stdout(io.StringIO()):
            main(["simulate", "--out", str(data), "--count", "4", "--unseen", "1",
                  "--duration", "120", "--seed", "7"])
        outputs = []
        for k in range(2):
            model = root / f"model_{k}.json"
            with contextlib.redirect_stdout(io.StringIO()):
                main(["train", str(data / "manifest.json"), "--unseen-ids", "run_03",
                      "--epochs", "5", "--seed", "3", "--out", str(model)])
            outputs.append((model.read_bytes(), (root / f"model_{k}_loss.csv").read_bytes()))
    same = outputs[0] == outputs[1]
    detail = "model files and loss CSVs " + ("bitwise identical" if same else "differ")
    return _result("7 determinism", same, detail, t0, 300)


def criterion_8(workdir=None, seed=8):
    """Normalization, dataset CSV and prediction CSV round-trips."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        X = rng.normal(rng.uniform(-100, 100, 7), 10.0 ** rng.uniform(-2, 2, 7), (300, 7))
        s = compute_norm_stats(X)
        back = denormalize(normalize(X, s), s)
        worst = max(worst, float(np.max(np.abs(back - X) / np.maximum(1.0, np.abs(X)))))
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(workdir or tmp)
        records = simulate_trajectories(count=1, seed=seed, duration=60.0)[0].records
        write_records(records, root / "run.csv")
        csv_ok = read_records(root / "run.csv") == records
        t = np.arange(40.0)
        truth, pred = rng.normal(30, 1, (40, 7)), rng.normal(30, 1, (40, 7))
        write_prediction_csv(root / "pred.csv", t, truth, pred)
        t2, truth2, pred2 = read_prediction_csv(root / "pred.csv")
    pred_ok = np.array_equal(t, t2) and np.array_equal(truth, truth2) and np.array_equal(pred, pred2)
    passed = worst <= 1e-12 and csv_ok and pred_ok
    detail = (f"normalization error {worst:.1e} <= 1e-12, dataset CSV equal: {csv_ok}, "
              f"prediction CSV equal: {bool(pred_ok)}")
    return _result("8 round-trips", passed, detail, t0, 60)


def run_all(full=False, report=None):
    """Run the acceptance criteria in order.

    The two training-heavy criteria (3 and 4) only run with ``full=True``;
    criterion 5 then also checks the reports produced by criterion 4.
    ``report`` is called with each result as soon as it is ready.
    """
    results = []

    def add(result):
        results.append(result)
        if report is not None:
            report(result)

    add(criterion_1())
    add(criterion_2())
    reports = []
    if full:
        add(criterion_3())
        run = generalization_run()
        add(criterion_4(run))
        reports = [run["seen"], run["unseen"]]
    add(criterion_5(reports))
    add(criterion_6())
    add(criterion_7())
    add(criterion_8())
    return results
