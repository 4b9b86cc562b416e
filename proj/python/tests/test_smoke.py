import json

import numpy as np
import pytest

import epifed


def test_graph_basics():
    g = epifed.Graph(4, [(0, 1), (1, 2), (2, 3), (3, 0), (1, 0)])
    assert g.n_nodes == 4 and g.n_edges == 4
    assert g.neighbors(0) == [1, 3]
    assert epifed.spectral_radius(g) == pytest.approx(2.0, abs=1e-9)
    assert epifed.epidemic_threshold(g) == pytest.approx(0.5, abs=1e-9)
    k = epifed.generate_synthetic("complete", 5)
    assert k.n_edges == 10
    assert epifed.top_k_by_degree(epifed.generate_synthetic("star", 6), 1).n_nodes == 1


def test_simulation_shape_and_determinism():
    g = epifed.generate_synthetic("ba", 30, m=2, seed=4)
    a = epifed.simulate(g, "sis", {"beta": 0.8, "delta": 1.0}, dt=0.5, t_max=10, seed=2)
    b = epifed.simulate(g, "sis", {"beta": 0.8, "delta": 1.0}, dt=0.5, t_max=10, seed=2)
    assert a.shape == (21, 30) and a.dtype == np.uint8
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0, 1}
    with pytest.raises(ValueError):
        epifed.simulate(g, "sis", {"beta": -1.0, "delta": 1.0})


def test_exact_oracle_matches_monte_carlo():
    g = epifed.Graph(2, [(0, 1)])
    exact = epifed.exact_markov_sis(g, 1.0, 1.0, [0], 0.5)
    hits = np.zeros(2)
    runs = 4000
    for s in range(runs):
        hits += epifed.simulate(g, "sis", {"beta": 1.0, "delta": 1.0}, dt=0.5, t_max=0.5,
                                seed=s, infected=[0])[1]
    assert np.allclose(hits / runs, exact, atol=0.03)


def test_partition_and_cut():
    edges = [(a, b) for base in (0, 4) for a in range(base, base + 4) for b in range(a + 1, base + 4)]
    g = epifed.Graph(8, edges + [(3, 4)])
    p = epifed.partition(g, "kl", 2, seed=1)
    assert sorted(p) == [0, 0, 0, 0, 1, 1, 1, 1]
    assert epifed.edge_cut(g, p) == 1


def test_metrics():
    truth = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0], dtype=np.uint8)
    pred = np.array([1, 1, 0, 1, 0, 0, 0, 0, 0, 0], dtype=np.uint8)
    assert epifed.accuracy(pred, truth) == pytest.approx(0.8)
    assert epifed.macro_f1(pred, truth) == pytest.approx((2 / 3 + 6 / 7) / 2)
    rmse, mae = epifed.prevalence_errors(truth, truth, 10, 1)
    assert rmse == 0 and mae == 0
    assert epifed.efficacy_energy([1.0] * 15, typeset=True) == pytest.approx(15 / 14)


def test_aggregate():
    out = epifed.aggregate([[("w", np.array([0.0, 2.0]))], [("w", np.array([4.0, 2.0]))]], [1, 3])
    assert np.array_equal(out["w"], np.array([3.0, 2.0]))


def test_pipeline_entry_points(tmp_path):
    cfg = {
        "seed": 2,
        "graph": {"kind": "ba", "n": 16},
        "epidemic": {"tau_over_threshold": 4, "dt": 0.25, "t_max": 12},
        "model": {"t_history": 4, "t_future": 2, "d_embed": 4, "lstm_hidden": 6},
        "partition": {"clients": 2},
        "training": {"rounds": 1, "local_epochs": 1, "batch_size": 8, "lr": 0.01},
        "output_dir": str(tmp_path),
    }
    text = json.dumps(cfg)
    resolved = json.loads(epifed.resolve_config(text, ["training.aggregation=fedprox"]))
    assert resolved["training"]["aggregation"] == "fedprox"
    assert "spectral_radius" in epifed.graph_info(text)
    epifed.run_simulate(text, str(tmp_path / "traj.csv"))
    assert (tmp_path / "traj.csv").read_text().startswith("#meta ")
    epifed.run_train(text)
    assert (tmp_path / "summary.csv").exists()
    with pytest.raises(ValueError):
        epifed.resolve_config('{"graph": {"bogus": 1}}')
