import json

import numpy as np
import pytest

from ensdiv.cli import main, read_points_csv
from ensdiv.ensemble import EnsembleConfig, ensemble_estimate


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture
def samples(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", "sample", "--d", 2, "--mu", "0.7", "--sigma", 0.1, "--n", 200,
                "--seed", 1, "--csv", a]) == 0
    assert run(["simulate", "sample", "--d", 2, "--mu", "0.3", "--sigma", 0.3, "--n", 200,
                "--seed", 2, "--csv", b]) == 0
    return a, b


def test_weights_output(tmp_path):
    out = tmp_path / "w.json"
    assert run(["weights", "--d", 2, "--l", "1,4", "--mode", "exact", "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert np.allclose(doc["w"], [2, -1], atol=1e-10)
    assert doc["manifest"]["command"] == "weights"


@pytest.mark.parametrize("argv", [["weights", "--d", 5, "--l", "1,2"],
                                  ["weights", "--d", 2, "--l", "1,2,3", "--eta", 0.1],
                                  ["weights", "--d", 3, "--l", "1,2", "--mode", "exact"]])
def test_weights_infeasible_exit_2(argv, capsys):
    assert run(argv) == 2
    assert "ensdiv:" in capsys.readouterr().err


def test_estimate_matches_library(samples, tmp_path):
    a, b = samples
    out = tmp_path / "e.json"
    assert run(["estimate", a, b, "--seed", 3, "--out", out]) == 0
    doc = json.loads(out.read_text())
    lib = ensemble_estimate(read_points_csv(a), read_points_csv(b), EnsembleConfig(seed=3))
    assert doc["estimate"] == lib.value
    assert set(doc["manifest"]["inputs"]) == {str(a), str(b)}


def test_sample_csv_round_trips_exactly(samples):
    from ensdiv.simulate import TruncatedGaussianSpec, sample_truncated_gaussian

    X = sample_truncated_gaussian(TruncatedGaussianSpec.isotropic(2, 0.7, 0.1), 200, 1)
    assert np.array_equal(read_points_csv(samples[0]), X)


def test_estimate_input_errors(samples, tmp_path, capsys):
    a, _ = samples
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,4\n5\n")
    assert run(["estimate", bad, a]) == 3
    assert "row 3" in capsys.readouterr().err
    three = tmp_path / "three.csv"
    three.write_text("1,2,3\n4,5,6\n")
    assert run(["estimate", three, a]) == 3
    assert run(["estimate", tmp_path / "missing.csv", a]) == 3


def test_pathological_spec_exit_4():
    assert run(["simulate", "sample", "--d", 1, "--mu", "9", "--sigma", 0.0001, "--n", 5]) == 4


def test_clt_writes_qq_table(tmp_path):
    tsv, out = tmp_path / "q.tsv", tmp_path / "c.json"
    assert run(["simulate", "clt", "--d", 2, "--T", 100, "--trials", 20, "--tsv", tsv,
                "--out", out]) == 0
    lines = tsv.read_text().splitlines()
    assert lines[0] == "theoretical\tobserved" and len(lines) == 21
    assert json.loads(out.read_text())["n_trials"] == 20


def test_mse_synthetic(tmp_path):
    tsv, out = tmp_path / "m.tsv", tmp_path / "m.json"
    assert run(["simulate", "mse", "--d", 2, "--T-list", "100,200,400,800", "--trials", 50,
                "--synthetic", 1.0, "--tsv", tsv, "--out", out]) == 0
    assert tsv.read_text().splitlines()[1].startswith("100\t")
    assert -1.5 < json.loads(out.read_text())["slope"] < -0.5


def test_bayes_bound_errors(tmp_path):
    one = tmp_path / "one.csv"
    one.write_text("1,2,a\n2,3,a\n")
    assert run(["bayes-bound", one]) == 3
    assert run(["bayes-bound", "--pair", "setosa,nope", "--B", 0]) == 3


def test_replay_reproduces(samples, tmp_path):
    a, b = samples
    first, second = tmp_path / "1.json", tmp_path / "2.json"
    assert run(["estimate", a, b, "--bootstrap", 100, "--out", first]) == 0
    assert run(["replay", first, "--out", second]) == 0
    d1, d2 = json.loads(first.read_text()), json.loads(second.read_text())
    d1["manifest"].pop("duration_s")
    d2["manifest"].pop("duration_s")
    assert d1 == d2


def test_replay_detects_changed_input(samples, tmp_path):
    a, b = samples
    first = tmp_path / "1.json"
    assert run(["estimate", a, b, "--out", first]) == 0
    b.write_text(b.read_text() + "0.5,0.5\n")
    assert run(["replay", first]) == 3


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("ENSDIV_THREADS", "2")
    out = tmp_path / "c.json"
    assert run(["simulate", "clt", "--d", 2, "--T", 60, "--trials", 20, "--out", out]) == 0
    ref = tmp_path / "r.json"
    assert run(["--threads", "1", "simulate", "clt", "--d", 2, "--T", 60, "--trials", 20,
                "--out", ref]) == 0
    assert json.loads(out.read_text())["estimates"] == json.loads(ref.read_text())["estimates"]
