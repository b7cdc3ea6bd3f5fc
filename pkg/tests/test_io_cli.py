import json
import math

import numpy as np
import pytest

from glx.cli import main
from glx.closed_form import CLOSED_EXACT
from glx.covariance import residue
from glx.io import MM_HEADER, read_matrix_market, read_samples_csv, write_matrix_market
from glx.numerics import SparseSymmetric, inverse
from glx.solver import warm_start_solve

from conftest import EX1, ex1_sigma


def run(*argv):
    return main([str(a) for a in argv])


def test_matrix_market_format(tmp_path):
    m = EX1 + np.diag([0.1, 0.2, 0.3, 0.4])
    m[3, 3] = 1 / 3
    path = tmp_path / "m.mtx"
    write_matrix_market(path, m)
    lines = path.read_text().splitlines()
    assert lines[0] == MM_HEADER
    assert lines[1] == "4 4 7"
    body = [tuple(map(int, ln.split()[:2])) for ln in lines[2:]]
    assert all(i >= j >= 1 for i, j in body)
    assert "0.33333333333333331" in path.read_text()
    assert np.array_equal(read_matrix_market(path), m)
    sp = read_matrix_market(path, dense=False)
    assert isinstance(sp, SparseSymmetric) and sp.nnz_offdiag == 3


def test_matrix_market_errors(tmp_path):
    bad = tmp_path / "bad.mtx"
    bad.write_text("not a matrix\n")
    with pytest.raises(ValueError):
        read_matrix_market(bad)
    with pytest.raises(OSError):
        read_matrix_market(tmp_path / "missing.mtx")


def test_csv_missing_values(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n,4\n3,NA\n5,8\n")
    _, drop = read_samples_csv(p)
    assert drop.tolist() == [[1, 2], [5, 8]]
    _, lin = read_samples_csv(p, missing="linear-time")
    assert lin.tolist() == [[1, 2], [2, 4], [3, 6], [5, 8]]
    p.write_text("a,b\n1,x\n")
    with pytest.raises(ValueError):
        read_samples_csv(p)


def test_estimate_closed_on_example(tmp_path):
    cov = tmp_path / "ex1.mtx"
    write_matrix_market(cov, ex1_sigma(0.6))
    out = tmp_path / "est.mtx"
    assert run("estimate", "--cov", cov, "--lambda", 0.6, "--method", "closed", "--out", out) == 0
    report = json.loads((tmp_path / "est.report.json").read_text())
    assert set(report) >= {"schema_version", "command", "lambda", "k", "components", "metrics", "timings_ms"}
    assert report["method"] == CLOSED_EXACT and report["k"] == 3
    est = read_matrix_market(out)
    assert est[0, 0] == pytest.approx(1 / 0.91, abs=1e-12)
    assert est[1, 2] == pytest.approx(0.4 / 0.84, abs=1e-12)


def test_estimate_exit_codes(tmp_path, capsys):
    tri = np.array([[1.0, 0.6, 0.6], [0.6, 1.0, 0.6], [0.6, 0.6, 1.0]])
    cov = tmp_path / "tri.mtx"
    write_matrix_market(cov, tri)
    rep = tmp_path / "r.json"
    code = run("estimate", "--cov", cov, "--lambda", 0.5, "--method", "closed", "--out", tmp_path / "o.mtx",
               "--report", rep)
    assert code == 2 and rep.exists() and not (tmp_path / "o.mtx").exists()
    assert json.loads(rep.read_text())["components"][0]["acyclic"] is False
    assert run("estimate", "--cov", tmp_path / "nope.mtx", "--lambda", 1, "--out", tmp_path / "o.mtx") == 1
    assert run("estimate", "--cov", cov, "--lambda", 1, "--k", 2, "--out", tmp_path / "o.mtx") == 1
    assert run("estimate", "--cov", cov, "--lambda", -1, "--out", tmp_path / "o.mtx") == 1
    garbage = tmp_path / "g.csv"
    garbage.write_text("a,b\n1,zz\n")
    assert run("estimate", "--samples", garbage, "--lambda", 0.1, "--out", tmp_path / "o.mtx") == 1
    tie = tmp_path / "tie.mtx"
    write_matrix_market(tie, tri)
    assert run("estimate", "--cov", tie, "--k", 1, "--out", tmp_path / "o.mtx") == 1
    err = capsys.readouterr().err
    assert "glx: error" in err


def test_estimate_glasso_lambda_zero(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((20, 4))
    sigma = a.T @ a / 20
    cov = tmp_path / "c.mtx"
    write_matrix_market(cov, sigma)
    out = tmp_path / "s.mtx"
    assert run("estimate", "--cov", cov, "--lambda", 0, "--method", "glasso", "--out", out) == 0
    assert np.allclose(read_matrix_market(out), inverse(read_matrix_market(cov)), atol=1e-7)


def test_gen_then_estimate_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("GLX_THREADS", "1")
    assert run("gen", "random", "--d", 40, "--nnz", 200, "--seed", 3, "--out-dir", tmp_path) == 0
    gen = json.loads((tmp_path / "gen.report.json").read_text())
    assert gen["seed"] == 3 and gen["n"] == 20
    out = tmp_path / "w.mtx"
    assert run("estimate", "--samples", tmp_path / "samples.csv", "--k", 50, "--method", "warm", "--out", out,
               "--truth", tmp_path / "precision.mtx") == 0
    report = json.loads((tmp_path / "w.report.json").read_text())
    assert report["k"] == 50 and report["metrics"]["tpr"] is not None
    from glx.covariance import lambda_for_k, magnitude_ladder, sample_covariance

    _, x = read_samples_csv(tmp_path / "samples.csv")
    sigma = sample_covariance(x)
    sol = warm_start_solve(sigma, lambda_for_k(magnitude_ladder(sigma), 50))
    assert report["lambda"] == lambda_for_k(magnitude_ladder(sigma), 50)
    assert np.array_equal(read_matrix_market(out), sol.to_dense())


def test_gen_table_size_instance(tmp_path):
    assert run("gen", "random", "--d", 2000, "--nnz", 9894, "--n", 0, "--seed", 1, "--out-dir", tmp_path) == 0
    gen = json.loads((tmp_path / "gen.report.json").read_text())
    assert abs(gen["nnz_rel_error"]) <= 0.15
    assert 2 * read_matrix_market(tmp_path / "precision.mtx", dense=False).nnz_offdiag == gen["achieved_nnz"]


def test_gen_cycle_and_tree(tmp_path):
    assert run("gen", "cycle", "--d", 9, "--out-dir", tmp_path / "c") == 0
    cyc = json.loads((tmp_path / "c" / "gen.report.json").read_text())
    assert cyc["lam"] == 0.75 and len(cyc["edges"]) == 9
    assert run("gen", "tree", "--d", 100, "--omega", 0.02, "--out-dir", tmp_path / "t") == 0
    tree = json.loads((tmp_path / "t" / "gen.report.json").read_text())
    lo, hi = tree["lam_interval"]
    assert lo < tree["lam"] < hi and tree["omega"] == 0.02


def test_check_reports(tmp_path):
    diag = tmp_path / "d.mtx"
    write_matrix_market(diag, np.diag([1.0, 2.0, 3.0]))
    rep = tmp_path / "r.json"
    assert run("check", "--cov", diag, "--lambda", 0.1, "--report", rep) == 0
    r = json.loads(rep.read_text())
    assert r["components"] == [] and r["certificate"]["epsilon"] == 0.0
    assert run("gen", "cycle", "--d", 9, "--seed", 2, "--out-dir", tmp_path) == 0
    assert run("check", "--cov", tmp_path / "covariance.mtx", "--lambda", 0.75, "--report", rep) == 0
    r = json.loads(rep.read_text())
    comp = r["components"][0]
    assert comp["girth"] == 9 and comp["p_max"] == 2 and comp["max_degree"] == 2
    alpha = 0.05
    delta = 1 + 2 * alpha**2 / (1 - alpha**2) + 1 / (1 - alpha**2)
    assert r["certificate"]["epsilon"] == pytest.approx(delta * alpha**5, rel=1e-9)
    psd = tmp_path / "psd.mtx"
    write_matrix_market(psd, np.ones((3, 3)))
    assert run("check", "--cov", psd, "--lambda", 0.0, "--report", rep) == 0
    r = json.loads(rep.read_text())
    assert "degenerate_entry" in r and r["certificate"] is None


def test_check_to_stdout(tmp_path, capsys):
    cov = tmp_path / "c.mtx"
    write_matrix_market(cov, ex1_sigma(0.5))
    assert run("check", "--cov", cov, "--k", 3) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["conditions"]["global"]["acyclic"] is True


def test_bench_rows_deterministic(tmp_path):
    rep = tmp_path / "b.json"
    csv = tmp_path / "b.csv"
    assert run("bench", "--sizes", 60, "--seeds", "0,1,2", "--methods", "closed,glasso", "--report", rep,
               "--csv", csv) == 0
    r = json.loads(rep.read_text())
    assert len(r["rows"]) == 3 and len(csv.read_text().splitlines()) == 4
    again = tmp_path / "b2.json"
    assert run("bench", "--sizes", 60, "--seeds", "0,1,2", "--methods", "closed", "--report", again) == 0
    r2 = json.loads(again.read_text())
    for a, b in zip(r["rows"], r2["rows"]):
        assert a["lambda"] == b["lambda"] and a["closed_tpr"] == b["closed_tpr"]


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        from glx.cli import build_parser

        build_parser().parse_args(["--help"])
    assert exc.value.code == 0
    assert main(["--version"]) == 0
    assert main([]) == 1
