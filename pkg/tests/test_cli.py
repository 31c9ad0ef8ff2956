import json

import numpy as np
import pytest

from coreset_kit.cli import main
from coreset_kit.core import save_matrix


@pytest.fixture
def matrix_file(tmp_path):
    g = np.random.default_rng(0)
    path = tmp_path / "m.csv"
    save_matrix(path, g.normal(size=(60, 3)))
    return str(path)


def _read_report(out_dir):
    with open(out_dir / "report.json") as f:
        return json.load(f)


def test_spanning_set_subcommand(matrix_file, tmp_path):
    out = tmp_path / "out"
    code = main(["spanning-set", "--input", matrix_file, "--eps", "0.25",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    report = _read_report(out)
    assert report["subcommand"] == "spanning-set"
    assert all(b["pass"] for b in report["budgets"].values())
    assert (out / "series.csv").exists()


def test_report_determinism_modulo_timestamp(matrix_file, tmp_path):
    out = tmp_path / "same"
    outs = []
    for _ in range(2):
        assert main(["lewis", "--input", matrix_file, "--p", "3", "--seed", "11",
                     "--out", str(out)]) == 0
        rep = _read_report(out)
        rep.pop("timestamp")
        outs.append(json.dumps(rep, sort_keys=True))
    assert outs[0] == outs[1]


def test_css_subcommand(matrix_file, tmp_path):
    out = tmp_path / "css"
    code = main(["css", "--loss", "huber", "--k", "2", "--seed", "7",
                 "--input", matrix_file, "--out", str(out)])
    assert code == 0
    report = _read_report(out)
    assert "selected" in report["results"]
    assert "residual" in report["results"]


def test_online_subspace_writes_coreset_csv(matrix_file, tmp_path):
    out = tmp_path / "online"
    code = main(["online-subspace", "--k", "1", "--p", "1", "--eps", "0.5",
                 "--stream", matrix_file, "--seed", "3", "--out", str(out),
                 "--const", "repetition_c=1"])
    assert code == 0
    report = _read_report(out)
    assert report["results"]["net_check_deviation"] <= 0.5
    lines = (out / "coreset.csv").read_text().splitlines()
    assert lines[0] == "index,weight"
    assert len(lines) > 1


def test_online_cluster_subcommand(tmp_path):
    g = np.random.default_rng(1)
    pts = np.vstack([g.normal(size=(20, 2)), g.normal(size=(20, 2)) + 9])
    path = tmp_path / "pts.csv"
    save_matrix(path, pts)
    out = tmp_path / "cluster"
    code = main(["online-cluster", "--k", "2", "--p", "2", "--seed", "5",
                 "--stream", str(path), "--out", str(out)])
    assert code == 0
    assert (out / "assignments.csv").exists()


def test_active_regression_subcommand(tmp_path):
    g = np.random.default_rng(2)
    a = g.normal(size=(120, 3))
    b = a @ g.normal(size=3) + 0.1 * g.normal(size=120)
    apath, bpath = tmp_path / "a.csv", tmp_path / "b.csv"
    save_matrix(apath, a)
    save_matrix(bpath, b.reshape(-1, 1))
    out = tmp_path / "active"
    code = main(["active-regression", "--input", str(apath), "--labels", str(bpath),
                 "--p", "4", "--eps", "0.3", "--seed", "9", "--out", str(out)])
    assert code == 0
    report = _read_report(out)
    assert report["results"]["relative_error"] <= (1.3) ** 4


def test_verify_suite(tmp_path):
    out = tmp_path / "verify"
    assert main(["verify", "--suite", "spanning", "--seed", "1", "--out", str(out)]) == 0
    assert main(["verify", "--suite", "nope", "--seed", "1", "--out", str(out)]) == 2


def test_usage_errors(matrix_file):
    assert main(["not-a-command", "--seed", "1"]) == 2
    assert main(["active-regression", "--input", matrix_file, "--seed", "1"]) == 2


def test_const_overrides_echoed(matrix_file, tmp_path):
    out = tmp_path / "c"
    assert main(["css", "--k", "1", "--seed", "2", "--input", matrix_file,
                 "--out", str(out), "--const", "guard=2", "--const", "drop_denom=4"]) == 0
    report = _read_report(out)
    assert report["config"]["constants"]["guard"] == 2.0
