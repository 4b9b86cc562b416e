import csv
import json
import os
import subprocess
from pathlib import Path

import pytest

BIN = os.environ.get("EPIFED_BIN", "epifed")

BASE = {
    "seed": 3,
    "graph": {"kind": "ba", "n": 24, "m": 1},
    "epidemic": {"model": "sis", "params": {"beta": 1, "delta": 1},
                 "tau_over_threshold": 4, "dt": 0.2, "t_max": 15},
    "partition": {"method": "even-index", "clients": 2},
    "model": {"architecture": "lstm", "t_history": 5, "t_future": 3,
              "d_embed": 4, "lstm_hidden": 8},
    "training": {"rounds": 2, "local_epochs": 1, "batch_size": 8, "lr": 0.01},
    "sweep": {"max_clients": 4},
}


def run(*args, cwd=None):
    return subprocess.run([BIN, *map(str, args)], cwd=cwd, capture_output=True, text=True)


def data_rows(path):
    with open(path) as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(BASE))
    return path


def test_no_subcommand_is_a_usage_error():
    assert run().returncode == 2
    assert run("train", "--no-such-flag").returncode == 2


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"graph": {"nodez": 3}}')
    r = run("graph-info", "-c", bad)
    assert r.returncode == 2
    assert "nodez" in r.stderr
    bad.write_text("{oops")
    assert run("graph-info", "-c", bad).returncode == 2


def test_invalid_model_parameters_are_rejected(config, tmp_path):
    r = run("simulate", "-c", config, "--params", "beta=-1;delta=1", "-o", tmp_path / "x.csv")
    assert r.returncode == 2
    assert "beta" in r.stderr
    r = run("simulate", "-c", config, "--model", "sistv", "--params", "a=0.1;b=0.5;c=1;delta=1",
            "-o", tmp_path / "x.csv")
    assert r.returncode == 2
    assert "SIStv" in r.stderr
    assert not (tmp_path / "x.csv").exists()


def test_runtime_failures_exit_1(config, tmp_path):
    assert run("graph-info", "--graph-file", tmp_path / "missing.csv").returncode == 1
    assert run("simulate", "-c", config, "-o", config / "x.csv").returncode == 1


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--graph-kind", "complete", "--nodes", 20, "--seed", 1, "--model", "sis",
            "--params", "beta=0.05;delta=1", "--t-max", 5, "--dt", 0.5]
    assert run("simulate", *args, "-o", a).returncode == 0
    assert run("simulate", *args, "-o", b).returncode == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("#meta model=SIS params=beta=0.05;delta=1 n=20 dt=0.5 seed=")
    rows = [l for l in lines if not l.startswith("#")]
    assert len(rows) == 11
    assert rows[2].split(",")[0] == "1.000000"
    assert len(rows[0].split(",")) == 21


def test_graph_info(tmp_path):
    edges = tmp_path / "g.csv"
    edges.write_text("a,b\nb,c\nc,a\n")
    r = run("graph-info", "--graph-file", edges)
    assert r.returncode == 0
    info = dict(line.split(" ", 1) for line in r.stdout.splitlines())
    assert info["nodes"] == "3"
    assert float(info["spectral_radius"]) == pytest.approx(2.0, abs=1e-9)


def test_partition_writes_every_node(config, tmp_path):
    out = tmp_path / "p.csv"
    assert run("partition", "-c", config, "--method", "kl", "--clients", 3, "-o", out).returncode == 0
    rows = data_rows(out)
    assert len(rows) == 24
    assert {r["client"] for r in rows} == {"0", "1", "2"}


def test_train_is_byte_reproducible(config, tmp_path):
    out = tmp_path / "run"
    names = ("summary.csv", "rounds.csv", "global.ckpt")
    assert run("train", "-c", config, "--out-dir", out).returncode == 0
    first = {n: (out / n).read_bytes() for n in names}
    assert run("train", "-c", config, "--out-dir", out).returncode == 0
    for n in names:
        assert (out / n).read_bytes() == first[n]
    text = (out / "summary.csv").read_text()
    assert "# config {" in text and "# seeds run=3" in text


def test_fedprox_with_zero_mu_matches_fedavg(config, tmp_path):
    assert run("train", "-c", config, "--out-dir", tmp_path / "avg").returncode == 0
    assert run("train", "-c", config, "--aggregation", "fedprox", "--set", "training.mu=0",
               "--out-dir", tmp_path / "prox").returncode == 0
    avg = [(r["scenario"], r["metric"], r["value"]) for r in data_rows(tmp_path / "avg" / "summary.csv")]
    prox = [(r["scenario"], r["metric"], r["value"]) for r in data_rows(tmp_path / "prox" / "summary.csv")]
    assert avg == prox


def test_single_client_federation_matches_centralized(config, tmp_path):
    assert run("train", "-c", config, "--clients", 1, "--out-dir", tmp_path / "fed").returncode == 0
    assert run("train", "-c", config, "--clients", 1, "--scenario", "centralized",
               "--out-dir", tmp_path / "cen").returncode == 0

    def ce(d):
        return next(float(r["value"]) for r in data_rows(tmp_path / d / "summary.csv")
                    if r["metric"] == "ce" and "client=" not in r["scenario"])

    assert abs(ce("fed") - ce("cen")) <= 1e-9


def test_client_sweep_rows(config, tmp_path):
    assert run("sweep", "-c", config, "--out-dir", tmp_path).returncode == 0
    rows = data_rows(tmp_path / "sweep.csv")
    assert [r["M"] for r in rows if r["metric"] == "acc"] == ["2", "3", "4"]
    eta = [r for r in rows if r["metric"] == "eta_acc"]
    assert len(eta) == 1
    alpha = [float(r["value"]) for r in rows if r["metric"] == "acc"]
    assert float(eta[0]["value"]) == pytest.approx(sum(alpha) / 3, abs=1e-12)


def test_tau_sweep_marks_threshold(config, tmp_path):
    r = run("sweep", "-c", config, "--kind", "tau", "--set", "sweep.tau=[0.5,4]", "--out-dir", tmp_path)
    assert r.returncode == 0
    text = (tmp_path / "sweep.csv").read_text()
    assert any(l.startswith("# tau_c=") for l in text.splitlines())
    assert len([r for r in data_rows(tmp_path / "sweep.csv") if r["metric"] == "acc"]) == 2


def test_missing_grid_sweep_rows(config, tmp_path):
    r = run("sweep", "-c", config, "--kind", "missing", "--set", "sweep.client_ratios=[0,0.5,1]",
            "--set", "sweep.node_missing_ratios=[0,0.3,0.6,0.9]", "--workers", 2, "--out-dir", tmp_path)
    assert r.returncode == 0
    assert len(data_rows(tmp_path / "sweep.csv")) == 12


def test_plotdata(config, tmp_path):
    assert run("sweep", "-c", config, "--out-dir", tmp_path).returncode == 0
    clients = tmp_path / "sweep_clients.csv"
    violin = tmp_path / "violin.csv"
    assert run("plotdata", "-i", clients, "--family", "violin", "--metric", "acc", "-o", violin).returncode == 0
    vrows = data_rows(violin)
    for m in (2, 3, 4):
        assert len([r for r in vrows if r["x"] == str(m)]) == m
    line = tmp_path / "line.csv"
    assert run("plotdata", "-i", clients, "--family", "line", "--metric", "acc", "-o", line).returncode == 0
    alpha = {r["M"]: float(r["value"]) for r in data_rows(tmp_path / "sweep.csv") if r["metric"] == "acc"}
    for r in data_rows(line):
        values = [float(v["value"]) for v in vrows if v["x"] == r["x"]]
        assert float(r["mean"]) == pytest.approx(alpha[r["x"]], abs=1e-12)
        assert float(r["min"]) == min(values) and float(r["max"]) == max(values)

    empty = tmp_path / "empty.csv"
    empty.write_text("scenario,model,aggregation,partition,epidemic,M,metric,value\n")
    r = run("plotdata", "-i", empty, "--family", "line", "--metric", "acc", "-o", tmp_path / "e.csv")
    assert r.returncode == 2
