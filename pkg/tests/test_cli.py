"""CLI contract: config validation paths, exit codes, CSV artifacts,
deterministic reruns from the effective config."""

import csv
import subprocess
import sys

from concircle.cli import main

FLAT_CIRCLE = """
[metric]
name = "flat"

[lagrangian]
m = 1.0

[integration]
method = "rk4"
h = 1e-3
t_span = [0.0, 6.283185307179586]
stride = 10
formulation = "euler_poisson"

[integration.initial]
x = [0.0, 0.0]
u = [1.0, 0.0]
w = [0.0, -1.0]

[verification]
samples = 30
seed = 42
"""


def run_cli(args):
    return main(args)


def write(tmp_path, text, name="scenario.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        code = run_cli(["check-metric", "--config", str(tmp_path / "nope.toml")])
        assert code == 2

    def test_missing_initial_velocity(self, tmp_path, capsys):
        text = """
[metric]
name = "flat"
[integration]
formulation = "euler_poisson"
[integration.initial]
x = [0.0, 0.0]
w = [0.0, -1.0]
"""
        code = run_cli(["integrate", "--config", write(tmp_path, text),
                        "--out", str(tmp_path / "out")])
        assert code == 2
        assert "integration.initial.u" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        code = run_cli(["check-metric", "--config",
                        write(tmp_path, "[metric]\nname='flat'\nbogus=1\n"),
                        "--out", str(tmp_path / "out")])
        assert code == 2
        assert "metric.bogus" in capsys.readouterr().err

    def test_asymmetric_explicit_metric(self, tmp_path, capsys):
        text = """
[metric]
g00 = "1"
g01 = "0"
g10 = "x0"
g11 = "1"
"""
        code = run_cli(["check-metric", "--config", write(tmp_path, text),
                        "--out", str(tmp_path / "out")])
        assert code == 2
        assert "metric.g10" in capsys.readouterr().err

    def test_bad_expression_reports_path(self, tmp_path, capsys):
        text = """
[metric]
g00 = "1 +"
g01 = "0"
g11 = "1"
"""
        code = run_cli(["check-metric", "--config", write(tmp_path, text),
                        "--out", str(tmp_path / "out")])
        assert code == 2
        assert "metric.g00" in capsys.readouterr().err

    def test_corrupted_source_form_fails_checks(self, tmp_path, capsys):
        text = """
[metric]
name = "flat"
[verification]
samples = 30
corrupt_source_form = true
"""
        code = run_cli(["verify-variational", "--config",
                        write(tmp_path, text), "--out", str(tmp_path / "out")])
        assert code == 1

    def test_flat_check_metric_passes(self, tmp_path, capsys):
        code = run_cli(["check-metric", "--config",
                        write(tmp_path, "[metric]\nname='flat'\n[verification]\nsamples=20\n"),
                        "--out", str(tmp_path / "out")])
        assert code == 0


class TestArtifacts:
    def test_trajectory_csv_header_and_summary(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = run_cli(["integrate", "--config", write(tmp_path, FLAT_CIRCLE),
                        "--out", str(out)])
        assert code == 0
        with open(out / "trajectory.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "x0", "x1", "u0", "u1", "w0", "w1", "speed",
                           "k", "H", "S01"]
        assert len(rows) > 600
        with open(out / "summary.csv", newline="") as fh:
            summary = dict(list(csv.reader(fh))[1:])
        assert float(summary["endpoint_return_distance"]) < 1e-6
        assert summary["status"] == "ok"
        assert (out / "effective.toml").exists()

    def test_rerun_from_effective_config_is_byte_identical(self, tmp_path,
                                                           capsys):
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert run_cli(["integrate", "--config",
                        write(tmp_path, FLAT_CIRCLE), "--out", str(out1)]) == 0
        assert run_cli(["integrate", "--config", str(out1 / "effective.toml"),
                        "--out", str(out2)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() == \
            (out2 / "trajectory.csv").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == \
            (out2 / "summary.csv").read_bytes()

    def test_report_rows_sorted(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run_cli(["check-metric", "--config",
                        write(tmp_path, "[metric]\nname='sphere(1)'\n[verification]\nsamples=10\n"),
                        "--out", str(out)]) == 0
        with open(out / "check_metric.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        keys = [(r[0], r[1]) for r in rows]
        assert keys == sorted(keys)
        # K column of the unit sphere ~ 1.0, and the gated deviation is tiny
        kvals = [float(r[2]) for r in rows
                 if r[0] == "gaussian-curvature-value"]
        assert kvals and all(abs(v - 1.0) < 1e-8 for v in kvals)
        kerr = [float(r[2]) for r in rows
                if r[0] == "gaussian-curvature-error"]
        assert kerr and max(kerr) < 1e-8

    def test_explicit_metric_round_trips(self, tmp_path, capsys):
        text = """
[metric]
g00 = "1"
g01 = "0"
g11 = "sin(x0)^2"

[integration]
method = "rk4"
h = 1e-3
t_span = [0.0, 1.0]
stride = 10
formulation = "concircular"

[integration.initial]
x = [1.5707963267948966, 0.0]
u = [0.0, -1.0]
w = [-2.0, 0.0]
"""
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        assert run_cli(["integrate", "--config", write(tmp_path, text),
                        "--out", str(out1)]) == 0
        eff = (out1 / "effective.toml").read_text()
        assert 'g11 = "sin(x0)^2"' in eff
        assert run_cli(["integrate", "--config", str(out1 / "effective.toml"),
                        "--out", str(out2)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() == \
            (out2 / "trajectory.csv").read_bytes()

    def test_seed_flag_changes_effective_config(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run_cli(["check-metric", "--config",
                        write(tmp_path, "[metric]\nname='flat'\n[verification]\nsamples=5\n"),
                        "--seed", "7", "--out", str(out)]) == 0
        assert "seed = 7" in (out / "effective.toml").read_text()

    def test_crlf_line_endings(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run_cli(["integrate", "--config",
                        write(tmp_path, FLAT_CIRCLE), "--out", str(out)]) == 0
        raw = (out / "trajectory.csv").read_bytes()
        assert b"\r\n" in raw


class TestVerifyCommands:
    def test_verify_operators_flat(self, tmp_path, capsys):
        text = "[metric]\nname='flat'\n[verification]\nsamples=30\n"
        code = run_cli(["verify-operators", "--config", write(tmp_path, text),
                        "--out", str(tmp_path / "out")])
        assert code == 0
        report = capsys.readouterr().out
        assert "FAIL" not in report
        assert "spin-force-flat-zero" in report

    def test_verify_operators_sphere(self, tmp_path, capsys):
        text = "[metric]\nname='sphere(1)'\n[verification]\nsamples=30\n"
        code = run_cli(["verify-operators", "--config", write(tmp_path, text),
                        "--out", str(tmp_path / "out")])
        assert code == 0
        report = capsys.readouterr().out
        for check in ("commutator-eq8", "momenta-relation-covariant",
                      "frenet-horizontal-cancellation", "spin-force-rewrite"):
            assert f"PASS {check}" in report

    def test_verify_variational_flat(self, tmp_path, capsys):
        text = "[metric]\nname='flat'\n[verification]\nsamples=40\n"
        code = run_cli(["verify-variational", "--config",
                        write(tmp_path, text), "--out", str(tmp_path / "out")])
        assert code == 0

    def test_convergence_command(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli(["convergence", "--config",
                        write(tmp_path, FLAT_CIRCLE), "--out", str(out)])
        assert code == 0
        text = (out / "convergence.csv").read_text()
        assert "observed_order" in text
        order = float([ln for ln in text.splitlines()
                       if ln.startswith("observed_order")][0].split(",")[1])
        assert abs(order - 4.0) < 0.3


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "concircle.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
