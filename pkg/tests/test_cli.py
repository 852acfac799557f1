"""Command-line interface: exit codes, CSV artifacts and reproducibility."""

import csv
import os

import numpy as np
import pytest

from stopbound import cli


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestUsage:
    def test_no_command(self, capsys):
        assert cli.main([]) == cli.EXIT_USAGE

    def test_unknown_problem_file(self, tmp_path, capsys):
        rc = cli.main(
            ["solve", "--problem-file", "/no/such/file", "--out-dir", str(tmp_path)]
        )
        assert rc == cli.EXIT_USAGE

    def test_missing_problem(self, tmp_path, capsys):
        rc = cli.main(["solve", "--out-dir", str(tmp_path)])
        assert rc == cli.EXIT_USAGE

    def test_version(self, capsys):
        assert cli.main(["--version"]) == cli.EXIT_OK


class TestConstants:
    def test_table_and_csv(self, tmp_path, capsys):
        rc = cli.main(["constants", "--beta", "1.0", "--out-dir", str(tmp_path)])
        assert rc == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "2.4503" in out
        header, rows = _read_csv(tmp_path / "constants.csv")
        assert "B" in header
        assert len(rows) == 1
        assert float(rows[0][header.index("B")]) == pytest.approx(2.4503, abs=1e-3)
        assert (tmp_path / "manifest.txt").exists()


class TestResiduals:
    def test_reference_curve(self, tmp_path, capsys):
        rc = cli.main(
            ["residuals", "--problem", "linear", "--nodes", "20", "--cvals", "8",
             "--out-dir", str(tmp_path)]
        )
        assert rc == cli.EXIT_OK
        header, rows = _read_csv(tmp_path / "residuals.csv")
        assert header == ["c", "residual", "penalty"]
        assert len(rows) == 8

    def test_boundary_csv_input(self, tmp_path, capsys):
        # feed its own reference output back through the boundary reader
        nodes = np.linspace(0.0, np.sqrt(0.5), 20)
        path = tmp_path / "b.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "d"])
            for y, d in zip(nodes, -2.45 * nodes**2):
                w.writerow([repr(float(y)), repr(float(d))])
        rc = cli.main(
            ["residuals", "--problem", "linear", "--cvals", "8",
             "--boundary", str(path), "--out-dir", str(tmp_path)]
        )
        assert rc == cli.EXIT_OK


class TestBounds:
    def test_envelope_csv(self, tmp_path, capsys):
        rc = cli.main(
            ["bounds", "--problem", "linear", "--nodes", "16", "--cvals", "8",
             "--iterations", "2", "--out-dir", str(tmp_path)]
        )
        assert rc == cli.EXIT_OK
        header, rows = _read_csv(tmp_path / "envelope.csv")
        assert header == ["y", "d_lower", "d_upper", "iteration"]
        iters = sorted({int(r[3]) for r in rows})
        assert iters == [0, 1, 2]
        for r in rows:
            assert float(r[1]) <= float(r[2]) + 1e-12


class TestSolve:
    def test_small_run_artifacts(self, tmp_path, capsys):
        rc = cli.main(
            ["solve", "--problem", "linear", "--nodes", "12", "--cvals", "8",
             "--iterations", "1", "--out-dir", str(tmp_path)]
        )
        assert rc in (cli.EXIT_OK, cli.EXIT_NO_CONVERGENCE)
        for name in ("boundary.csv", "trace.csv", "residuals.csv",
                     "plot.dat", "plot.gp", "manifest.txt"):
            assert (tmp_path / name).exists(), name
        header, rows = _read_csv(tmp_path / "boundary.csv")
        assert header == ["y", "d", "d_lower", "d_upper"]
        assert len(rows) == 12
        d = np.array([float(r[1]) for r in rows])
        assert d[0] == 0.0
        assert np.all(np.diff(d) <= 1e-12)


class TestOracle:
    def test_small_run(self, tmp_path, capsys):
        rc = cli.main(
            ["oracle", "--problem", "linear", "--t-min", "-1.0",
             "--t-steps", "64", "--x-steps", "64", "--nodes", "10",
             "--out-dir", str(tmp_path)]
        )
        assert rc == cli.EXIT_OK
        header, rows = _read_csv(tmp_path / "oracle_tb.csv")
        assert header == ["t", "b"]
        assert (tmp_path / "oracle_yd.csv").exists()


class TestConfigAndManifest:
    def test_config_defaults_and_explicit_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem = linear\nnodes = 20\ncvals = 8\n")
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        rc1 = cli.main(
            ["residuals", "--config", str(cfg), "--out-dir", str(out1)]
        )
        # explicit flag beats the config file
        rc2 = cli.main(
            ["residuals", "--config", str(cfg), "--cvals", "4",
             "--out-dir", str(out2)]
        )
        assert rc1 == rc2 == cli.EXIT_OK
        assert len(_read_csv(out1 / "residuals.csv")[1]) == 8
        assert len(_read_csv(out2 / "residuals.csv")[1]) == 4

    def test_manifest_reproducibility(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem = linear\nnodes = 16\ncvals = 6\n")
        outs = []
        for sub in ("x", "y"):
            out = tmp_path / sub
            assert (
                cli.main(["residuals", "--config", str(cfg), "--out-dir", str(out)])
                == cli.EXIT_OK
            )
            outs.append(out)
        a = (outs[0] / "residuals.csv").read_bytes()
        b = (outs[1] / "residuals.csv").read_bytes()
        assert a == b
        ma = (outs[0] / "manifest.txt").read_text().replace(str(outs[0]), "OUT")
        mb = (outs[1] / "manifest.txt").read_text().replace(str(outs[1]), "OUT")
        assert ma == mb
