"""Drives each subcommand through main() with real files on disk, plus one
server/client federation across separate OS processes."""

import json
import subprocess
import sys

import numpy as np

from fedrosvm.cli import main
from fedrosvm.core import GlobalModel
from fedrosvm.data import MinMaxStats
from fedrosvm.experiments import (
    ExperimentConfig,
    load_result,
    prepare_repetition,
    save_model,
    train_model,
)


def write_config(path, **overrides):
    doc = {
        "name": "cli_toy",
        "dataset": {"kind": "synthetic", "N": 60, "P": 2, "class_sep": 2.4},
        "partition": {"scheme": "even", "G": 2},
        "model": "admm",
        "grid": {"rho": [1e-2], "T": [3]},
        "cv_folds": 2,
        "repetitions": 1,
        "base_seed": 0,
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return str(path)


def test_train_writes_artifacts_and_exits_zero(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    out_dir = tmp_path / "out"
    rc = main(["train", "-c", cfg, "-o", str(out_dir)])
    assert rc == 0
    for name in ("result.json", "rounds.csv", "config_echo.json", "model.json"):
        assert (out_dir / name).is_file(), name
    captured = capsys.readouterr().out
    assert "mean_f1" in captured and "wrote" in captured
    result = load_result(str(out_dir))
    assert result.aggregates["failures"] == 0
    # echo is byte-identical to the file the run was launched from
    assert (out_dir / "config_echo.json").read_text() == (tmp_path / "cfg.json").read_text()


def test_train_config_error_exits_one(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", bogus_knob=3)
    assert main(["train", "-c", cfg]) == 1
    assert capsys.readouterr().err.startswith("config error:")
    assert main(["train", "-c", str(tmp_path / "missing.json")]) == 1


def test_evaluate_scores_saved_model(tmp_path, capsys):
    model_path = tmp_path / "model.json"
    save_model(str(model_path), GlobalModel(w=np.array([1.0, -1.0])),
               MinMaxStats(mins=np.zeros(2), maxs=np.ones(2)))
    csv_path = tmp_path / "pts.csv"
    csv_path.write_text(
        "a,b,label\n0.9,0.1,yes\n0.8,0.2,yes\n0.1,0.9,no\n0.2,0.8,no\n"
    )
    rc = main(["evaluate", "--model", str(model_path), "--csv", str(csv_path),
               "--label-column", "label", "--positive-label", "yes"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["f1"] == 1.0
    assert report["n"] == 4
    assert report["confusion"] == [[2, 0], [0, 2]]


def test_cv_prints_the_single_grid_point(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    rc = main(["cv", "-c", cfg])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["chosen"] == {"rho": 0.01, "T": 3}
    assert len(report["table"]) == 1
    assert report["table"][0]["mean_f1"] >= 0.0


def test_bench_reports_round_times(capsys):
    rc = main(["bench", "--n-grid", "40,80", "--g-grid", "2",
               "--runs", "1", "--fixed-n", "40", "--fixed-g", "2"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["round_time_by_n"]) == {"40", "80"}
    assert all(v > 0.0 for v in report["round_time_by_n"].values())
    assert all(v > 0.0 for v in report["round_time_by_g"].values())


def test_serve_rejects_multipoint_grid(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", grid={"rho": [1e-2, 1e-1], "T": [3]})
    assert main(["serve", "-c", cfg]) == 1
    err = capsys.readouterr().err
    assert "config error:" in err and "rho" in err


def test_client_rejects_out_of_range_id(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    rc = main(["client", "-c", cfg, "--address", "127.0.0.1:9", "--client-id", "5"])
    assert rc == 1
    assert "client id" in capsys.readouterr().err


def test_help_and_missing_subcommand_exit_codes(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 1
    capsys.readouterr()


def test_tcp_serve_and_clients_match_in_process_run(tmp_path):
    cfg_path = write_config(tmp_path / "cfg.json")
    server = subprocess.Popen(
        [sys.executable, "-m", "fedrosvm.cli", "serve", "-c", cfg_path, "--port", "0"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        banner = server.stdout.readline()
        assert banner.startswith("serving on "), banner
        address = banner.split()[2].rstrip(",")
        # both clients must be up at once: the server barrier waits for G joins
        clients = [
            subprocess.Popen(
                [sys.executable, "-m", "fedrosvm.cli", "client", "-c", cfg_path,
                 "--address", address, "--client-id", str(g)],
                stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
            )
            for g in range(2)
        ]
        client_io = [proc.communicate(timeout=120) for proc in clients]
        out, err = server.communicate(timeout=120)
    finally:
        for proc in [server] + list(locals().get("clients", [])):
            if proc.poll() is None:
                proc.kill()
    assert server.returncode == 0, err
    for g, (proc, (c_out, c_err)) in enumerate(zip(clients, client_io)):
        assert proc.returncode == 0, c_err
        assert f"client {g} finished" in c_out
    report = json.loads(out)
    assert report["test_f1"] >= 0.0

    # the TCP run must land on exactly the model the in-process run produces
    cfg = ExperimentConfig.from_file(cfg_path)
    shards, _, _ = prepare_repetition(cfg, cfg.base_seed)
    model, _ = train_model(cfg, {"rho": 0.01, "T": 3}, shards, cfg.base_seed)
    np.testing.assert_array_equal(np.array(report["w_last"]), model.w)
