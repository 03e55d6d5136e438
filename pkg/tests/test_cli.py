import json

import numpy as np
import pytest

from jointtherm.cli import main, parse_args
from jointtherm.gauss2 import PUBLISHED_COEFFICIENTS, eval_gauss2


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["simulate", "--out", str(out), "--count", "4", "--unseen", "1",
                 "--duration", "40", "--seed", "2"]) == 0
    return out


@pytest.fixture(scope="module")
def model_path(data_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "m.json"
    assert main(["train", str(data_dir / "manifest.json"), "--unseen-ids", "run_03",
                 "--epochs", "2", "--hidden", "6", "--dense", "6,5,4,3,2,7",
                 "--out", str(path)]) == 0
    return path


def test_simulate_writes_manifest(data_dir):
    manifest = json.loads((data_dir / "manifest.json").read_text())
    assert [r["id"] for r in manifest["runs"]] == ["run_00", "run_01", "run_02", "run_03"]
    assert [r["partition"] for r in manifest["runs"]].count("unseen") == 1
    assert [r["profile_seed"] for r in manifest["runs"]] == [2000, 2001, 2002, 2003]
    assert len(manifest["plant"]) == 7
    assert len(list(data_dir.glob("run_*.csv"))) == 4


def test_simulate_is_deterministic(data_dir, tmp_path):
    main(["simulate", "--out", str(tmp_path), "--count", "4", "--unseen", "1",
          "--duration", "40", "--seed", "2"])
    for f in data_dir.glob("*.csv"):
        assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_train_outputs(model_path):
    doc = json.loads(model_path.read_text())
    assert doc["norm_stats"]["features"] == ["torque"]
    assert doc["meta"]["trained_on"] == ["run_00", "run_01", "run_02"]
    loss = model_path.with_name("m_loss.csv").read_text().splitlines()
    assert loss[0] == "epoch,loss" and len(loss) == 3


def test_evaluate(model_path, data_dir, tmp_path, capsys):
    prefix = tmp_path / "ev"
    assert main(["evaluate", str(data_dir / "run_03.csv"), "--model", str(model_path),
                 "--out", str(prefix)]) == 0
    report = json.loads((tmp_path / "ev_report.json").read_text())
    assert report["tag"] == "unseen"
    assert all(r["max_abs_error"] >= r["rmse"] for r in report["aggregate"])
    assert (tmp_path / "ev_table.csv").exists()
    assert "MaxAE" in capsys.readouterr().out


def test_predict(model_path, data_dir, tmp_path):
    assert main(["predict", str(data_dir / "run_03.csv"), "--model", str(model_path),
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "run_03.csv").exists()
    assert len(list(tmp_path.glob("run_03_motor*.svg"))) == 7


def test_predict_width_mismatch(model_path, data_dir, tmp_path, capsys):
    code = main(["predict", str(data_dir / "run_03.csv"), "--model", str(model_path),
                 "--features", "torque,current", "--out", str(tmp_path)])
    assert code != 0
    err = capsys.readouterr().err
    assert "expects 7" in err and "14" in err


def test_fit_gauss2(tmp_path, capsys):
    x = np.arange(500.0)
    y = eval_gauss2(PUBLISHED_COEFFICIENTS, x) + np.random.default_rng(0).normal(0, 0.08, x.size)
    np.savetxt(tmp_path / "prof.csv", np.c_[x, y], delimiter=",", header="x,temperature",
               comments="")
    assert main(["fit-gauss2", str(tmp_path / "prof.csv"), "--out", str(tmp_path / "fit")]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert 0.05 < fit["rmse"] < 0.11
    assert (tmp_path / "fit.svg").exists()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 7, "lr": 0.01}))
    args = parse_args(["train", "d", "--config", str(cfg), "--epochs", "3"])
    assert args.epochs == 3 and args.lr == 0.01


def test_missing_file_is_an_error(tmp_path):
    assert main(["evaluate", str(tmp_path / "nope.csv"), "--model", str(tmp_path / "m")]) == 1


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    assert "6/6 checks passed" in capsys.readouterr().out
