import json
import subprocess
import sys

import numpy as np
import pytest

from fbmgirsanov import __version__
from fbmgirsanov.cli import InputFormatError, main, read_path, write_path
from fbmgirsanov.core import SampledPath, TimeGrid


def run(*argv):
    return main([str(a) for a in argv])


def report(d):
    return json.loads((d / "report.json").read_text())


@pytest.fixture
def fou_dir(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--hurst", 0.7, "--n", 512, "--horizon", 5, "--seed", 3, "--paths", 2,
               "--model", "fou", "--rho", 1, "--x0", 1, "--out", out) == 0
    return out


def test_path_file_round_trip(tmp_path):
    g = TimeGrid(10, 0.3)
    v = np.random.default_rng(0).standard_normal(11)
    write_path(tmp_path / "p.csv", g.nodes, v)
    p = read_path(tmp_path / "p.csv")
    assert p.grid == g
    assert np.array_equal(p.values, v)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "time,value\n0,0\n1,1\n",
        "t,value\n0,0\n",
        "t,value\n0,0\n1,x\n",
        "t,value\n0,0\n1,1,1\n",
        "t,value\n0,0\n1,nan\n",
        "t,value\n0.1,0\n1,1\n",
        "t,value\n0,0\n0.2,1\n1,2\n",
        "t,value\n0,0\n1,1\n0.5,2\n",
    ],
)
def test_malformed_path_files(tmp_path, text):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(InputFormatError):
        read_path(f)
    assert run("density", "--in", f, "--hurst", 0.3, "--drift", "zero", "--out", tmp_path / "o") == 4


def test_simulate_writes_files_and_report(fou_dir):
    rep = report(fou_dir)
    assert rep["command"] == "simulate" and rep["version"] == __version__
    assert rep["results"]["files"] == ["path_0000.csv", "path_0001.csv"]
    assert rep["results"]["sampler"] == "circulant"
    p = read_path(fou_dir / "path_0001.csv")
    assert p.grid == TimeGrid(512, 5.0) and p.values[0] == 1.0
    assert rep["results"]["terminal_values"][1] == p.values[-1]


def test_simulate_is_deterministic(tmp_path, fou_dir):
    again = tmp_path / "again"
    run("simulate", "--hurst", 0.7, "--n", 512, "--horizon", 5, "--seed", 3, "--paths", 2,
        "--model", "fou", "--rho", 1, "--x0", 1, "--out", again)
    for name in ("path_0000.csv", "path_0001.csv"):
        assert (again / name).read_bytes() == (fou_dir / name).read_bytes()


def test_simulate_non_power_of_two_uses_cholesky(tmp_path):
    assert run("simulate", "--hurst", 0.4, "--n", 100, "--seed", 1, "--out", tmp_path) == 0
    assert report(tmp_path)["results"]["sampler"] == "cholesky"


def test_transform_and_round_trip(tmp_path):
    sim = tmp_path / "sim"
    run("simulate", "--hurst", 0.3, "--n", 1024, "--seed", 2, "--out", sim)
    out = tmp_path / "tr"
    assert run("transform", "--in", sim / "path_0000.csv", "--hurst", 0.3,
               "--emit", "M", "B", "recon", "--out", out) == 0
    res = report(out)["results"]
    assert res["files"] == ["M.csv", "B.csv", "recon.csv"]
    assert res["roundtrip_rel_l2_error"] < 0.05
    assert res["qv_rel_error"] < 0.1
    back = tmp_path / "back"
    assert run("transform", "--in", out / "B.csv", "--hurst", 0.3, "--source", "B", "--emit", "recon",
               "--reference", sim / "path_0000.csv", "--out", back) == 0
    assert report(back)["results"]["roundtrip_rel_l2_error"] == pytest.approx(res["roundtrip_rel_l2_error"])
    assert (back / "recon.csv").read_bytes() == (out / "recon.csv").read_bytes()


def test_transform_needs_zero_start(tmp_path, fou_dir):
    assert run("transform", "--in", fou_dir / "path_0000.csv", "--hurst", 0.7, "--out", tmp_path) == 4
    assert run("transform", "--in", fou_dir / "path_0000.csv", "--hurst", 0.7, "--x0", 1,
               "--out", tmp_path) == 0


def test_density_zero_drift_and_determinism(tmp_path, fou_dir):
    f = fou_dir / "path_0000.csv"
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("density", "--in", f, "--hurst", 0.7, "--drift", "zero", "--x0", 1, "--out", a) == 0
    assert report(a)["results"]["logDensity"] == 0.0
    run("density", "--in", f, "--hurst", 0.7, "--drift", "fou:1,0", "--x0", 1, "--out", a)
    run("density", "--in", f, "--hurst", 0.7, "--drift", "fou:1,0", "--x0", 1, "--out", b)
    ra, rb = report(a), report(b)
    assert ra["results"] == rb["results"]
    assert isinstance(ra["results"]["singularFlag"], bool)


def test_mle_and_degenerate_exit(tmp_path, fou_dir):
    assert run("mle", "--in", fou_dir / "path_0000.csv", "--hurst", 0.7, "--x0", 1, "--out", tmp_path) == 0
    assert report(tmp_path)["results"]["rhoHat"] > 0
    flat = tmp_path / "flat.csv"
    write_path(flat, TimeGrid(16).nodes, np.zeros(17))
    out = tmp_path / "deg"
    assert run("mle", "--in", flat, "--hurst", 0.7, "--out", out) == 5
    assert "degenerate" in report(out)["results"]


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--hurst", "1.2", "--n", "8", "--seed", "1", "--out", "x"],
        ["simulate", "--hurst", "0.3", "--n", "0", "--seed", "1", "--out", "x"],
        ["simulate", "--hurst", "0.3", "--n", "8", "--seed", "-4", "--out", "x"],
        ["density", "--in", "p.csv", "--hurst", "0.3", "--drift", "ou:1", "--out", "x"],
        ["bogus"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_verify_constants_suite(tmp_path):
    assert run("verify", "--suite", "constants", "--out", tmp_path) == 0
    res = report(tmp_path)["results"]
    assert res["passed"] and res["checks"][0]["check"] == "1"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fbmgirsanov", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == __version__
