"""End-to-end tests of the command-line interface."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest


def run_cli(*args, **kw):
    return subprocess.run(
        [sys.executable, "-m", "karlin.cli", *args],
        capture_output=True,
        text=True,
        **kw,
    )


def read_manifest(out_dir):
    with open(out_dir / "manifest.json") as fh:
        return json.load(fh)


class TestSimulate:
    def test_shape_contract(self, tmp_path):
        out = tmp_path / "run"
        r = run_cli(
            "simulate", "--mode", "discrete", "--alpha", "0.5", "--n", "2000",
            "--grid", "0:1:0.1", "--replicas", "20", "--seed", "7",
            "--out", str(out),
        )
        assert r.returncode == 0, r.stderr
        with open(out / "paths.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 11 * 8 * 20
        assert set(rows[0]) == {"t", "process", "value", "replica"}
        zeros = [float(x["value"]) for x in rows if float(x["t"]) == 0.0]
        assert all(v == 0.0 for v in zeros)

    def test_reruns_are_byte_identical(self, tmp_path):
        args = ("simulate", "--alpha", "0.4", "--n", "500", "--grid", "0:1:0.25",
                "--replicas", "10", "--seed", "3")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*args, "--out", str(a)).returncode == 0
        assert run_cli(*args, "--out", str(b)).returncode == 0
        assert (a / "paths.csv").read_bytes() == (b / "paths.csv").read_bytes()
        ma, mb = read_manifest(a), read_manifest(b)
        ma.pop("wall_clock_s"), mb.pop("wall_clock_s")
        assert ma == mb

    def test_bad_alpha_exits_2(self, tmp_path):
        r = run_cli("simulate", "--alpha", "1.5", "--n", "10", "--out", str(tmp_path))
        assert r.returncode == 2
        assert "alpha" in r.stderr
        assert len(r.stderr.strip().splitlines()) == 1

    def test_manifest_references_every_file(self, tmp_path):
        out = tmp_path / "m"
        r = run_cli("simulate", "--alpha", "0.5", "--n", "100", "--replicas", "5",
                    "--grid", "0,0.5,1", "--seed", "1", "--out", str(out))
        assert r.returncode == 0
        man = read_manifest(out)
        emitted = {p.name for p in out.iterdir()} - {"manifest.json"}
        assert {f["name"] for f in man["files"]} == emitted
        assert all("sha256" in f for f in man["files"])


class TestVerify:
    def test_identities_report(self, tmp_path):
        r = run_cli("verify", "identities", "--draws", "5", "--seed", "1",
                    "--out", str(tmp_path))
        assert r.returncode == 0, r.stdout + r.stderr
        with open(tmp_path / "report.json") as fh:
            rep = json.load(fh)
        assert rep["suite"] == "identities"
        assert rep["passed"] is True
        assert all(c["passed"] for c in rep["checks"])
        assert "PASS" in r.stdout

    def test_psd_single_alpha(self, tmp_path):
        r = run_cli("verify", "psd", "--alpha", "0.3", "--out", str(tmp_path))
        assert r.returncode == 0
        with open(tmp_path / "report.json") as fh:
            rep = json.load(fh)
        names = [c["name"] for c in rep["checks"]]
        assert names == ["bifbm-psd-alpha-0.3"]

    def test_unknown_suite_exits_2(self, tmp_path):
        r = run_cli("verify", "everything", "--out", str(tmp_path))
        assert r.returncode == 2

    def test_walk_suite_small(self, tmp_path):
        r = run_cli("verify", "walk", "--replicas", "20", "--n", "100",
                    "--out", str(tmp_path))
        assert r.returncode == 0, r.stdout

    def test_worker_count_leaves_reports_identical(self, tmp_path):
        args = ("verify", "poisson-cov", "--alpha", "0.5", "--n", "200",
                "--replicas", "24", "--seed", "5", "--grid", "0,0.5,1")
        a, b = tmp_path / "w1", tmp_path / "w2"
        ra = run_cli(*args, "--workers", "1", "--out", str(a))
        rb = run_cli(*args, "--workers", "2", "--out", str(b))
        assert ra.returncode == rb.returncode
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


class TestGpSample:
    def test_limit_u_paths_pinned_at_zero(self, tmp_path):
        out = tmp_path / "gp"
        r = run_cli("gp-sample", "--family", "limit-u", "--alpha", "0.5",
                    "--grid", "0:1:0.01", "--paths", "10", "--seed", "1",
                    "--out", str(out))
        assert r.returncode == 0, r.stderr
        with open(out / "paths.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 101 * 10
        assert all(float(x["value"]) == 0.0 for x in rows if float(x["t"]) == 0.0)
        cov = np.loadtxt(out / "covariance.csv", delimiter=",", skiprows=1)[:, 1:]
        assert cov.shape == (101, 101)
        np.testing.assert_allclose(cov, cov.T, atol=1e-14)

    def test_classical_bifbm(self, tmp_path):
        r = run_cli("gp-sample", "--family", "bifbm", "--H", "0.5", "--K", "0.5",
                    "--out", str(tmp_path))
        assert r.returncode == 0

    def test_extended_bifbm_reports_jitter(self, tmp_path):
        r = run_cli("gp-sample", "--family", "bifbm", "--H", "2.5", "--K", "0.2",
                    "--out", str(tmp_path))
        assert r.returncode == 0
        man = read_manifest(tmp_path)
        assert "jitter_used" in man["config"]

    def test_invalid_params_exit_2(self, tmp_path):
        r = run_cli("gp-sample", "--family", "bifbm", "--H", "2.5", "--K", "0.5",
                    "--out", str(tmp_path))
        assert r.returncode == 2


class TestFigures:
    def test_simulate_figures_written(self, tmp_path):
        out = tmp_path / "figs"
        r = run_cli("simulate", "--alpha", "0.5", "--n", "200", "--replicas", "6",
                    "--grid", "0:1:0.5", "--seed", "2", "--out", str(out), "--figures")
        assert r.returncode == 0
        assert (out / "paths.png").exists()
        man = read_manifest(out)
        assert "paths.png" in {f["name"] for f in man["files"]}

    def test_verify_figures_written(self, tmp_path):
        out = tmp_path / "vfigs"
        r = run_cli("verify", "psd", "--alpha", "0.4", "--out", str(out), "--figures")
        assert r.returncode == 0
        assert (out / "psd_margins.png").exists()
