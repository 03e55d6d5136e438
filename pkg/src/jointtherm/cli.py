"""Command-line entry point: ``python -m jointtherm <command>``.

Every option can also come from a JSON file passed with ``--config``; keys
are the long option names with dashes replaced by underscores. Flags given
on the command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (FeatureSelection, ModelStats, load_trajectories, select_features,
                      simulate_trajectories, split_seen_unseen, target_matrix,
                      trajectory_seeds, write_records)
from .errors import ConfigurationError, TrainingDivergedError
from .evaluation import emit_prediction_artifacts, evaluate_model, predict_sequence
from .gauss2 import Gauss2Coefficients, eval_gauss2, fit_gauss2, read_profile_csv
from .network import load_model, save_model
from .plant import PROFILE_KINDS, default_joint_params
from .training import TrainingConfig, train


def _int_list(text):
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _str_list(text):
    return [v for v in str(text).replace(" ", "").split(",") if v]


def _data_paths(items):
    """Expand directories and manifests into CSV paths, sorted."""
    paths = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            paths += sorted(p.glob("*.csv"))
        elif p.suffix == ".json":
            manifest = json.loads(p.read_text(encoding="utf-8"))
            paths += [p.parent / r["file"] for r in manifest["runs"]]
        else:
            paths.append(p)
    if not paths:
        raise ConfigurationError("no dataset files given")
    return paths


def cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.count < 1:
        raise ConfigurationError("--count must be >= 1")
    trajs = simulate_trajectories(args.count, args.seed, args.duration, args.dt, args.kind)
    seeds = trajectory_seeds(args.count, args.seed)
    n_unseen = min(args.unseen, args.count)
    runs = []
    for i, (traj, s) in enumerate(zip(trajs, seeds)):
        name = f"{traj.id}.csv"
        write_records(traj.records, out / name)
        runs.append({"id": traj.id, "file": name, "profile_seed": s,
                     "partition": "unseen" if i >= args.count - n_unseen else "seen"})
    manifest = {
        "generator": f"jointtherm {__version__}",
        "seed": args.seed,
        "kind": args.kind,
        "duration_s": args.duration,
        "dt_s": args.dt,
        "plant": [asdict(p) for p in default_joint_params()],
        "runs": runs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(runs)} runs to {out}")
    return 0


def cmd_train(args):
    selection = FeatureSelection.from_groups(_str_list(args.features))
    config = TrainingConfig(
        epochs=args.epochs, learning_rate=args.lr, lr_milestones=_int_list(args.lr_milestones or ""),
        lr_decay=args.lr_decay, dropout=args.dropout, seed=args.seed,
        normalize=not args.no_normalize, hidden_size=args.hidden,
        dense_sizes=_int_list(args.dense), batch_size=args.batch_size, truncate=args.truncate,
        patience=args.patience, report_every=args.report_every)
    trajectories = load_trajectories(_data_paths(args.data))
    seen, _ = split_seen_unseen(trajectories, _str_list(args.unseen_ids or ""), selection)
    if len(seen) == 0:
        raise ConfigurationError("no seen trajectories left to train on")

    def progress(epoch, loss):
        print(f"epoch {epoch:5d}  loss {loss:.6f}", file=sys.stderr)

    try:
        params, history, stats = train(seen, config, selection=selection, progress=progress)
    except TrainingDivergedError as exc:
        if exc.params is not None:
            save_model(args.out + ".diverged", exc.params)
        raise
    meta = {"trained_on": seen.provenance, "epochs_run": len(history),
            "learning_rate": config.learning_rate,
            "lr_milestones": list(config.lr_milestones), "lr_decay": config.lr_decay,
            "batch_size": config.batch_size,
            "seed": config.seed,
            "normalized": config.normalize}
    save_model(args.out, params, stats, meta)
    loss_path = args.loss_csv or str(Path(args.out).with_suffix("")) + "_loss.csv"
    history.write_csv(loss_path)
    print(f"trained {len(history)} epochs, final loss {history.loss[-1]:.6f}; model -> {args.out}")
    return 0


def _load(args):
    params, stats, _ = load_model(args.model)
    if stats is None:
        raise ConfigurationError(f"{args.model} carries no normalization statistics")
    if getattr(args, "features", None):
        stats = ModelStats(stats.inputs, stats.targets,
                           FeatureSelection.from_groups(_str_list(args.features)), stats.normalized)
    return params, stats


def cmd_predict(args):
    params, stats = _load(args)
    out = Path(args.out)
    for traj in load_trajectories(_data_paths(args.data)):
        X = select_features(traj.records, stats.selection)
        if X.shape[1] != params.input_size:
            raise ConfigurationError(
                f"feature width mismatch: model expects {params.input_size}, "
                f"{traj.id} provides {X.shape[1]}")
        pred = predict_sequence(params, stats, X)
        time = np.array([r.timestamp for r in traj.records])
        emit_prediction_artifacts(pred, target_matrix(traj.records), out / traj.id, time=time)
        print(f"{traj.id}: predictions -> {out / traj.id}.csv")
    return 0


def cmd_evaluate(args):
    params, stats = _load(args)
    trajectories = load_trajectories(_data_paths(args.data))
    seen, _ = split_seen_unseen(trajectories, [], stats.selection)
    seen.tag = args.tag
    report = evaluate_model(params, stats, seen, model_id=str(args.model), stats_id=str(args.model))
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    report.write_json(prefix.with_name(prefix.name + "_report.json"))
    report.write_table(prefix.with_name(prefix.name + "_table.csv"))
    print(report.format())
    return 0


def cmd_fit_gauss2(args):
    xy = read_profile_csv(args.input)
    init = None
    if args.init:
        init = Gauss2Coefficients(*(float(v) for v in _str_list(args.init)))
    report = fit_gauss2(xy, init=init)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_name(prefix.name + ".json").write_text(
        json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(xy[:, 0], xy[:, 1], ".", ms=2, label="data")
    ax.plot(xy[:, 0], eval_gauss2(report.coefficients, xy[:, 0]), label="Gauss2 fit")
    ax.set_xlabel("sample")
    ax.set_ylabel("temperature [°C]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(prefix.with_name(prefix.name + ".svg"), format="svg", metadata={"Date": None})
    plt.close(fig)
    c = report.coefficients
    print(f"a1={c.a1:.4g} b1={c.b1:.4g} c1={c.c1:.4g} a2={c.a2:.4g} b2={c.b2:.4g} c2={c.c2:.4g}")
    print(f"RMSE={report.rmse:.6f} R2={report.r_squared:.4f} converged={report.converged}")
    return 0


def cmd_verify(args):
    from .verify import run_all

    results = run_all(full=args.full, report=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    skipped = "" if args.full else " (criteria 3 and 4 need --full)"
    print(f"{len(results) - len(failed)}/{len(results)} checks passed{skipped}")
    return 1 if failed else 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="jointtherm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write synthetic telemetry CSVs")
    p.add_argument("--out", default="data")
    p.add_argument("--count", type=int, default=18)
    p.add_argument("--unseen", type=int, default=2, help="runs to mark unseen in the manifest")
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--kind", choices=PROFILE_KINDS, default="composite")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-gauss2", parents=[common], help="fit the two-term Gaussian profile")
    p.add_argument("input", help="CSV with x,temperature columns")
    p.add_argument("--out", default="gauss2_fit")
    p.add_argument("--init", help="a1,b1,c1,a2,b2,c2 starting point")
    p.set_defaults(func=cmd_fit_gauss2)

    p = sub.add_parser("train", parents=[common], help="train the LSTM network")
    p.add_argument("data", nargs="+", help="CSV files, directories or a manifest.json")
    p.add_argument("--unseen-ids", help="comma-separated trajectory ids to hold out")
    p.add_argument("--features", default="torque", help="comma-separated groups")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--dense", default="32,24,16,12,8,7")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--lr-milestones", default=None,
                   help="comma-separated epochs at which the learning rate is scaled")
    p.add_argument("--lr-decay", type=float, default=0.1, help="learning rate factor per milestone")
    p.add_argument("--batch-size", type=int, default=1,
                   help="equal-length sequences per Adam step")
    p.add_argument("--truncate", type=int, default=None, help="BPTT truncation length")
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--report-every", type=int, default=0)
    p.add_argument("--out", default="model.json")
    p.add_argument("--loss-csv", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict temperatures for runs")
    p.add_argument("data", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--features", default=None, help="override the model's feature groups")
    p.add_argument("--out", default="predictions")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="RMSE / MaxAE per motor")
    p.add_argument("data", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--tag", choices=("seen", "unseen"), default="unseen")
    p.add_argument("--out", default="evaluation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--full", action="store_true",
                   help="include the training-heavy criteria 3 and 4 (about 20 min)")
    p.set_defaults(func=cmd_verify)
    return parser, sub


def parse_args(argv=None):
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            file_opts = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        sub.choices[args.command].set_defaults(**file_opts)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    args = parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, TrainingDivergedError, OSError) as exc:
        # ConfigurationError, ParseError and DataError are ValueErrors
        print(f"jointtherm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
