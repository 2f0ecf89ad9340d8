import csv
import json
import math

import numpy as np
import pytest

from sparseport.cli import EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, fmt, main, run
from sparseport.instance import Instance, save_instance
from sparseport.synthetic import orlibrary_like, write_orlibrary


@pytest.fixture
def files(tmp_path):
    save_instance(Instance(mu=np.zeros(3), k=2, gamma=1.0, cov=np.eye(3)), tmp_path / "tiny.json")
    save_instance(Instance(mu=np.array([0.3, 0.2, 0.1]), k=2, gamma=1.0, cov=np.eye(3)), tmp_path / "ex2.json")
    mu, sd, corr = orlibrary_like(np.random.default_rng(61), 12)
    write_orlibrary(tmp_path / "port.txt", mu, sd, corr)
    return tmp_path


def test_solve_hand_instance(files):
    report = files / "r.json"
    trace = files / "t.csv"
    code, rep = run(["solve", "--instance", str(files / "tiny.json"), "--k", "2",
                     "--report", str(report), "--trace", str(trace)])
    assert code == EXIT_OK
    stored = json.loads(report.read_text())
    assert stored["value_regularized"] == pytest.approx(0.5)
    assert stored["status"] == "optimal"
    assert stored["settings"]["k"] == 2
    # gap recomputed from the stored values matches the stored gap
    assert stored["value_regularized"] - stored["lower_bound"] == pytest.approx(stored["gap"], abs=1e-9)
    rows = list(csv.DictReader(trace.open()))
    assert list(rows[0]) == ["elapsed_s", "nodes", "cuts", "incumbent", "bound"]
    times = [float(r["elapsed_s"]) for r in rows]
    bounds = [float(r["bound"]) for r in rows]
    assert times == sorted(times) and bounds == sorted(bounds)
    assert float(rows[-1]["bound"]) == pytest.approx(stored["lower_bound"], abs=1e-9)
    assert float(rows[-1]["incumbent"]) == pytest.approx(stored["value_regularized"], abs=1e-9)


def test_orlib_auto_gamma(files, capsys):
    code, rep = run(["solve", "--instance", str(files / "port.txt"), "--k", "5", "--gamma", "auto",
                     "--kappa", "1"])
    assert code == EXIT_OK
    assert rep["settings"]["gamma"] == pytest.approx(100 / math.sqrt(12))
    code, rep = run(["relax", "--instance", str(files / "port.txt"), "--k", "5", "--gamma", "auto1000"])
    assert rep["settings"]["gamma"] == pytest.approx(1000 / math.sqrt(12))


def test_min_return_and_options(files):
    code, rep = run(["solve", "--instance", str(files / "port.txt"), "--k", "3", "--kappa", "0",
                     "--min-return", "auto", "--copy-vars", "on", "--warm-start", "off",
                     "--root-inout", "on", "--diag", "gershgorin"])
    assert code == EXIT_OK and rep["settings"]["rows"] == 1
    en_code, en = run(["enumerate", "--instance", str(files / "port.txt"), "--k", "3", "--kappa", "0",
                       "--min-return", "auto"])
    assert en_code == EXIT_OK
    assert rep["value_regularized"] == pytest.approx(en["value"], abs=1e-6)


def test_x_min_and_diag_files(files):
    (files / "xmin.txt").write_text("0.1\n0.1\n0.1\n")
    (files / "diag.txt").write_text("0.5\n0.5\n0.5\n")
    code, rep = run(["solve", "--instance", str(files / "ex2.json"), "--x-min", str(files / "xmin.txt"),
                     "--diag", str(files / "diag.txt")])
    assert code == EXIT_OK and rep["settings"]["x_min"] and rep["settings"]["diag"] == "file"
    code, _ = run(["solve", "--instance", str(files / "ex2.json"), "--diag", str(files / "nope.txt")])
    assert code == EXIT_USAGE


def test_usage_errors(files):
    assert main(["solve", "--instance", str(files / "missing.txt")]) == EXIT_USAGE
    assert main(["solve", "--instance", str(files / "tiny.json"), "--bogus"]) == EXIT_USAGE
    assert main(["solve", "--instance", str(files / "tiny.json"), "--gamma", "-1"]) == EXIT_USAGE
    assert main(["solve", "--instance", str(files / "tiny.json"), "--warm-start", "maybe"]) == EXIT_USAGE
    assert main(["solve", "--instance", str(files / "tiny.json"), "--k", "9"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    (files / "bad.txt").write_text("2\n0.1\n")
    assert main(["solve", "--instance", str(files / "bad.txt")]) == EXIT_USAGE
    (files / "p.csv").write_text("A,B\n1,2\n1,3\n2,2\n")
    assert main(["solve", "--instance", str(files / "p.csv")]) == EXIT_USAGE
    assert main(["solve", "--instance", str(files / "p.csv"), "--rank", "1", "--k", "1"]) == EXIT_OK


def test_infeasible_and_limit_exit_codes(files):
    inst = Instance(mu=np.full(3, 0.1), k=2, gamma=1.0, cov=np.eye(3)).add_row(np.full(3, 0.1), lower=0.5)
    save_instance(inst, files / "inf.json")
    assert main(["solve", "--instance", str(files / "inf.json")]) == EXIT_INFEASIBLE
    assert main(["enumerate", "--instance", str(files / "inf.json")]) == EXIT_INFEASIBLE
    assert main(["heuristic", "--instance", str(files / "inf.json")]) == EXIT_INFEASIBLE
    mu, sd, corr = orlibrary_like(np.random.default_rng(62), 30)
    write_orlibrary(files / "big.txt", mu, sd, corr)
    code, rep = run(["solve", "--instance", str(files / "big.txt"), "--k", "8", "--gamma", "100",
                     "--node-limit", "1", "--root-inout", "off"])
    if rep["status"] == "optimal":
        assert code == EXIT_OK
    else:
        assert code == EXIT_LIMIT and rep["status"] == "node_limit"
        assert rep["lower_bound"] <= rep["value_regularized"]


def test_enumerate_and_relax(files):
    code, rep = run(["enumerate", "--instance", str(files / "ex2.json"), "--k", "2"])
    assert code == EXIT_OK and rep["support"] == [0, 1] and rep["value"] == pytest.approx(0.24875)
    code, rep = run(["relax", "--instance", str(files / "tiny.json")])
    assert code == EXIT_OK and rep["theta_socp"] <= 5 / 12 + 1e-6
    code, rep = run(["enumerate", "--instance", str(files / "port.txt"), "--k", "5", "--cap", "10"])
    assert code == EXIT_USAGE and rep["refused_supports"] == math.comb(12, 5)


def test_heuristic_is_deterministic(files, capsys):
    args = ["heuristic", "--instance", str(files / "port.txt"), "--k", "4", "--seed", "3"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first


def test_solve_and_enumerate_agree(files):
    for k in (1, 2, 3):
        _, s = run(["solve", "--instance", str(files / "port.txt"), "--k", str(k)])
        _, e = run(["enumerate", "--instance", str(files / "port.txt"), "--k", str(k)])
        assert s["value_regularized"] == pytest.approx(e["value"], abs=1e-6)


def test_bench_empty_and_grid(files, tmp_path_factory, capsys):
    empty = tmp_path_factory.mktemp("empty")
    out = empty / "out.csv"
    assert main(["bench", "--dir", str(empty), "--out", str(out)]) == EXIT_OK
    assert list(csv.DictReader(out.open())) == []
    grid = tmp_path_factory.mktemp("grid")
    for i in (1, 2):
        mu, sd, corr = orlibrary_like(np.random.default_rng(70 + i), 10)
        write_orlibrary(grid / f"port{i}.txt", mu, sd, corr)
    (grid / "broken.txt").write_text("3\n0.1 0.1\n")
    out = grid / "bench.csv"
    code = main(["bench", "--dir", str(grid), "--ks", "2,3", "--kappas", "1,0", "--out", str(out), "--jobs", "2"])
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 * 2 * 2
    broken = [r for r in rows if r["instance"] == "broken"]
    assert all(r["status"] == "error" and r["error"] for r in broken)
    good = [r for r in rows if r["instance"] != "broken"]
    assert all(r["status"] == "optimal" and float(r["gap"]) <= 1e-6 for r in good)
    assert all(r["min_return"] != "none" for r in good if float(r["kappa"]) == 0)
    assert main(["bench", "--dir", str(grid / "nowhere")]) == EXIT_USAGE


def test_number_format():
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(12345678912.0) == "1.23456789e+10"
    assert fmt(3) == "3" and fmt(True) == "true" and fmt(None) == "none"
