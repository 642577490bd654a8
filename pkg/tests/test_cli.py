import json

import numpy as np
import pytest

from labelfree.accuracies import clip_accuracies, psi_eta_from_b
from labelfree.cli import main
from labelfree.data import serialize
from labelfree.ensemble import majority_vote, ml_predict
from labelfree.imbalance import estimate_b_likelihood
from labelfree.simulation import SyntheticSpec, draw_accuracies, generate


@pytest.fixture
def data_file(tmp_path):
    psi, eta = draw_accuracies(8, 1)
    Z, _ = generate(SyntheticSpec(n=1500, b=0.3, psi=psi, eta=eta, seed=1))
    path = tmp_path / "z.csv"
    path.write_text(serialize(Z))
    return path, Z


def uncorrelated_tail_file(tmp_path):
    """Two correlated classifiers plus two with exactly zero sample covariance.

    The rank-one vector is (a, a, 0, 0), so every triple product vanishes.
    """
    w1 = [1, 1, 1, 1, -1, -1, -1, -1]
    w2 = [1, 1, -1, -1, 1, 1, -1, -1]
    w3 = [1, -1, 1, -1, 1, -1, 1, -1]
    r2 = [-1, 1, 1, 1, 1, -1, -1, -1]
    Z = np.tile(np.array([w1, r2, w2, w3]), (1, 25))
    path = tmp_path / "flat.csv"
    path.write_text("\n".join(",".join(str(x) for x in row) for row in Z) + "\n")
    return path


def test_estimate_both(data_file, capsys):
    path, Z = data_file
    assert main(["estimate", "--input", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["m"] == 8 and doc["n"] == 1500
    assert [r["method"] for r in doc["results"]] == ["tensor", "likelihood"]
    for rep in doc["results"]:
        assert {"method", "b", "delta", "classifiers", "v", "residual"} <= set(rep)
        assert len(rep["classifiers"]) == 8
        c = rep["classifiers"][0]
        assert {"psi", "eta", "pi", "clipped"} <= set(c)
        assert c["pi"] == pytest.approx((c["psi"] + c["eta"]) / 2)
    assert "alpha" in doc["results"][0]
    assert doc["results"][1]["b"] == pytest.approx(estimate_b_likelihood(Z).b, abs=1e-12)


def test_estimate_csv_and_out(data_file, tmp_path):
    path, _ = data_file
    out = tmp_path / "report.csv"
    assert main(["estimate", "-i", str(path), "--method", "tensor", "--format", "csv",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("method,b,delta,classifier,psi")
    assert len(lines) == 9


def test_too_few_classifiers(tmp_path, capsys):
    path = tmp_path / "two.csv"
    path.write_text("1,-1,1\n-1,1,1\n")
    assert main(["estimate", "--input", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "TooFewClassifiers"


def test_missing_file_is_parse_error(tmp_path, capsys):
    assert main(["estimate", "--input", str(tmp_path / "nope.csv")]) == 2


def test_usage_errors(capsys):
    assert main(["estimate", "--delta", "0.7"]) == 1
    assert main(["bogus"]) == 1
    assert main([]) == 1


def test_human_errors(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n1,1\n1,1\n")
    assert main(["estimate", "--input", str(path), "--human-errors"]) == 2
    assert capsys.readouterr().err.startswith("error: BadLabel")


def test_degenerate_design_reports_likelihood(tmp_path, capsys):
    path = uncorrelated_tail_file(tmp_path)
    assert main(["estimate", "--input", str(path)]) == 3
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert [r["method"] for r in doc["results"]] == ["likelihood"]
    assert doc["errors"][0]["error"] == "DegenerateDesign"
    assert doc["errors"][0]["method"] == "tensor"
    assert json.loads(captured.err.splitlines()[0])["error"] == "DegenerateDesign"


def test_zero_one_encoding(tmp_path, capsys):
    path = tmp_path / "z01.csv"
    path.write_text("1,0,1,1\n1,1,0,1\n0,0,1,1\n")
    assert main(["predict", "-i", str(path), "--encoding", "zero_one", "--ensemble", "mv",
                 "--format", "csv"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "instance,label,score"
    assert [r.split(",")[1] for r in rows[1:]] == ["1", "-1", "1", "1"]


def test_predict_mv(data_file, capsys):
    path, Z = data_file
    assert main(["predict", "-i", str(path), "--ensemble", "mv", "--format", "csv"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert len(rows) == Z.n
    labels = np.array([int(r.split(",")[1]) for r in rows])
    np.testing.assert_array_equal(labels, majority_vote(Z).labels)


def test_predict_isml_wiring(data_file, capsys):
    path, Z = data_file
    assert main(["predict", "-i", str(path), "--ensemble", "isml"]) == 0
    doc = json.loads(capsys.readouterr().out)
    est = estimate_b_likelihood(Z)
    acc = clip_accuracies(psi_eta_from_b(est.mu, est.spectral.v, est.b), 1e-3)
    np.testing.assert_array_equal(doc["labels"], ml_predict(Z, acc).labels)
    assert len(doc["scores"]) == Z.n


@pytest.mark.parametrize("ensemble", ["sml", "isml-em"])
def test_predict_other_ensembles(data_file, capsys, ensemble):
    path, Z = data_file
    assert main(["predict", "-i", str(path), "--ensemble", ensemble, "--method", "tensor"]) == 0
    assert len(json.loads(capsys.readouterr().out)["labels"]) == Z.n


SMALL = ["--trials", "2", "--n-values", "500,1000", "--b-values", "0.3", "--m", "5"]


def test_simulate_determinism(tmp_path, capsys):
    outs = []
    for k, threads in enumerate(("1", "4")):
        d = tmp_path / f"run{k}"
        assert main(["simulate", "--scenario", "imbalance", "--seed", "42", "--threads", threads,
                     "--out", str(d)] + SMALL) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"imbalance.csv", "imbalance.plot.dat", "imbalance.summary.json"}


def test_simulate_ensemble_rows(capsys):
    assert main(["simulate", "--scenario", "ensemble", "--trials", "2", "--n", "500",
                 "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["mv", "sml", "isml", "oracle"]


def test_simulate_scenario_file(tmp_path, capsys):
    spec = tmp_path / "scen.json"
    spec.write_text(json.dumps({"scenario": "mae-vs-m", "m_values": [3, 5], "trials": 2,
                                "n": 800}))
    assert main(["simulate", "--scenario", str(spec), "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("b,m,metric")


def test_simulate_unknown_scenario(capsys):
    assert main(["simulate", "--scenario", "nonsense"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "UsageError"
