import contextlib
import io
import json
import os

import pytest

from fss.cli import dispatch
from fss.ensemble import critical_point, make_regular
from fss.scaling import predict_block, reference_params


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = dispatch(argv)
    return code, out.getvalue(), err.getvalue()


def test_exit_codes():
    assert run(["bogus"])[0] == 2
    assert run([])[0] == 2
    assert run(["threshold"])[0] == 2  # missing --ensemble
    code, _, err = run(["threshold", "--ensemble", "9"])
    assert code == 1 and "error:" in err
    code, _, err = run(["predict", "--ensemble", "3,6", "--n", "1024"])
    assert code == 1  # neither --eps nor --grid


def test_threshold_output():
    code, out, _ = run(["threshold", "--ensemble", "3,6"])
    assert code == 0
    lines = out.splitlines()
    assert any(l.startswith("epsilon_star=0.4294") for l in lines)


def test_threshold_json_both_positions():
    for argv in (["--json", "threshold", "--ensemble", "3,6"],
                 ["threshold", "--ensemble", "3,6", "--json"]):
        code, out, _ = run(argv)
        assert code == 0
        doc = json.loads(out)
        assert doc["command"] == "threshold"
        assert abs(doc["epsilon_star"] - 0.42943981) < 1e-6


def test_critical_json():
    code, out, _ = run(["critical", "--ensemble", "3,6", "--json"])
    assert code == 0
    doc = json.loads(out)
    cp = critical_point(make_regular(3, 6))
    assert doc["nu_star"] == pytest.approx(cp.nu_star, abs=1e-12)
    assert doc["x_star"] == pytest.approx(cp.x_star, abs=1e-12)


def test_alpha_with_trajectory(tmp_path):
    traj = tmp_path / "traj.csv"
    code, out, _ = run(["alpha", "--ensemble", "3,6", "--mode", "conditional",
                        "--step", "5e-4", "--trajectory", str(traj), "--json"])
    assert code == 0
    doc = json.loads(out)
    assert doc["mode"] == "conditional"
    assert abs(doc["alpha"] - 0.2626) < 2e-3
    assert abs(doc["tau_star"] - 0.2265) < 2e-3
    assert doc["sigma_star"] > 0 and doc["c"] > 0
    lines = traj.read_text().splitlines()
    assert lines[0] == "tau,v,s,t"
    assert len(lines) > 100
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 0.0 and first[1] == pytest.approx(doc["epsilon_star"], abs=1e-9)


def test_predict_matches_library():
    code, out, _ = run(["predict", "--ensemble", "3,6", "--n", "4096",
                        "--eps", "0.41", "--json"])
    assert code == 0
    doc = json.loads(out)
    p = reference_params((3, 6), mode="binomial")
    assert doc["pB"] == pytest.approx(
        predict_block(p, 4096, 0.41, refined=True), abs=1e-12)
    # conditional alpha with the default iid channel is a contradiction
    code, _, err = run(["predict", "--ensemble", "3,6", "--n", "4096",
                        "--eps", "0.41", "--mode", "conditional"])
    assert code == 1 and "conditional" in err


def test_predict_grid_roundtrip(tmp_path):
    grid = tmp_path / "grid.csv"
    code, out, _ = run(["predict", "--ensemble", "3,6", "--n", "2048",
                        "--grid", "0.40:0.43:0.005", "--out", str(grid)])
    assert code == 0
    lines = grid.read_text().splitlines()
    assert lines[0] == "n,eps,z,pB,pb"
    assert len(lines) == 1 + 7
    # re-emitting parsed rows reproduces the file byte for byte
    redone = [lines[0]]
    for line in lines[1:]:
        vals = line.split(",")
        redone.append("%d,%.12g,%.12g,%.12g,%.12g"
                      % (int(vals[0]), *(float(v) for v in vals[1:])))
    assert "\n".join(redone) + "\n" == grid.read_text()


def test_predict_grid_requires_out():
    code, _, err = run(["predict", "--ensemble", "3,6", "--n", "2048",
                        "--grid", "0.40:0.41:0.01"])
    assert code == 1 and "--out" in err


def test_simulate_reordered_flags_hit_cache(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("FSS_CACHE_DIR", str(cache))
    a = ["simulate", "--ensemble", "3,6", "--n", "512", "--eps",
         "0.40:0.42:0.01", "--trials", "300", "--seed", "7",
         "--out", str(tmp_path / "a.csv"), "--json"]
    b = ["simulate", "--seed", "7", "--trials", "300",
         "--out", str(tmp_path / "b.csv"), "--eps", "0.40:0.42:0.01",
         "--n", "512", "--ensemble", "3,6", "--json"]
    code_a, out_a, _ = run(a)
    assert code_a == 0
    cache_file = next(cache.iterdir())
    lines_before = len(cache_file.read_text().splitlines())
    code_b, out_b, _ = run(b)
    assert code_b == 0
    lines_after = len(cache_file.read_text().splitlines())
    assert lines_before == lines_after == 3  # second run recomputed nothing
    assert json.loads(out_a)["cache_key"] == json.loads(out_b)["cache_key"]
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_no_cache_flag(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("FSS_CACHE_DIR", str(cache))
    code, _, _ = run(["simulate", "--ensemble", "3,6", "--n", "256", "--eps",
                      "0.41", "--trials", "100", "--seed", "1", "--no-cache",
                      "--out", str(tmp_path / "x.csv")])
    assert code == 0
    assert not cache.exists()


def test_simulate_seed_changes_output(tmp_path):
    base = ["simulate", "--ensemble", "3,6", "--n", "256", "--eps", "0.41",
            "--trials", "200", "--out", str(tmp_path / "s.csv")]
    run(base + ["--seed", "1"])
    first = (tmp_path / "s.csv").read_bytes()
    run(base + ["--seed", "1"])
    assert (tmp_path / "s.csv").read_bytes() == first
    run(base + ["--seed", "2"])
    assert (tmp_path / "s.csv").read_bytes() != first


def test_simulate_collapse(tmp_path):
    z = tmp_path / "z.csv"
    code, _, _ = run(["simulate", "--ensemble", "3,6", "--n", "256,512",
                      "--eps", "0.41,0.42", "--trials", "150", "--seed", "3",
                      "--out", str(tmp_path / "s.csv"), "--collapse", str(z)])
    assert code == 0
    lines = z.read_text().splitlines()
    assert lines[0] == "n,eps,z,pB_hat,pB_lo,pB_hi"
    assert len(lines) == 1 + 4
    # z must decrease with eps at fixed n
    rows = [[float(v) for v in l.split(",")] for l in lines[1:]]
    assert rows[0][2] > rows[1][2]


def test_fit_command(tmp_path):
    data = tmp_path / "sweep.csv"
    run(["simulate", "--ensemble", "3,6", "--n", "1024,2048", "--eps",
         "0.40:0.44:0.005", "--trials", "600", "--seed", "11",
         "--out", str(data)])
    code, out, _ = run(["fit", "--data", str(data), "--free", "alpha,beta",
                        "--json"])
    assert code == 0
    doc = json.loads(out)
    assert 0.4 < doc["alpha"] < 0.7
    assert 0.2 < doc["beta"] < 1.0
    assert doc["se_alpha"] > 0 and doc["se_beta"] > 0
    assert doc["n_used"] > 0
    # fixing a parameter pins it exactly
    code, out, _ = run(["fit", "--data", str(data), "--free", "alpha",
                        "--fix", "epsilon_star=0.43", "--json"])
    assert code == 0
    assert json.loads(out)["epsilon_star"] == 0.43
    # malformed --fix is a usage error
    assert run(["fit", "--data", str(data), "--free", "alpha",
                "--fix", "nonsense=1"])[0] == 2
    assert run(["fit", "--data", str(data), "--free", "alpha",
                "--fix", "alpha0.5"])[0] == 2


def test_estimate_threshold_command():
    code, out, _ = run(["estimate-threshold", "--ensemble", "3,6", "--n", "512",
                        "--trials-per-probe", "800", "--tol", "4e-3",
                        "--seed", "5", "--json"])
    assert code == 0
    doc = json.loads(out)
    assert doc["bracket_lo"] <= doc["estimate"] <= doc["bracket_hi"]
    assert 0.40 < doc["estimate"] < 0.44
    assert doc["trials_used"] == doc["probes"] * 800


def test_toy_command(tmp_path):
    out_csv = tmp_path / "toy.csv"
    code, out, _ = run(["toy", "--n", "256,512", "--trials", "2000",
                        "--seed", "3", "--out", str(out_csv), "--json"])
    assert code == 0
    doc = json.loads(out)
    assert len(doc["points"]) == 2
    for pt in doc["points"]:
        assert 0.5 < pt["p_hat"] < 1.0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == ("n,trials,failures,p_hat,ci_lo,ci_hi,"
                        "median_lg_offset,median_depth")
    assert len(lines) == 3


def test_io_error_exit_code(tmp_path):
    code, _, err = run(["toy", "--n", "256", "--trials", "100", "--seed", "1",
                        "--out", str(tmp_path / "no" / "dir" / "toy.csv")])
    assert code == 1 and "io error" in err
