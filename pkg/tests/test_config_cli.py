"""Configuration parsing, CLI subcommands, artifacts and exit codes."""

import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kerrcoupler import ConfigError, analyze
from kerrcoupler.cli import main
from kerrcoupler.config import (load_config, render_resolved, resolve_params,
                                SweepAxis, SweepSpec, GridConfig)
from kerrcoupler.sweep import cell_params, run_sweep

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"


def write_config(tmp_path: Path, body: str, name: str = "cfg.toml") -> Path:
    path = tmp_path / name
    path.write_text(body)
    return path


BASE_PARAMS = """
[params]
gamma1 = 1.0
gamma2 = 2.0
coupling_j = 1.5
delta1 = 0.3
delta2 = -0.2
eps1 = [20.0, 5.0]
eps2 = 30.0
chi1 = 0.0
chi2 = 0.0
"""


class TestConfigParsing:
    def test_expression_resolution(self):
        config = load_config(CONFIGS / "fig2.toml")
        p = config.params
        assert p.delta1 == pytest.approx(0.005)
        assert p.delta2 == pytest.approx(1.0)
        assert p.eps2 == pytest.approx(80e3 + 0j)
        assert p.chi2 == pytest.approx(1e-7)

    def test_complex_pump_forms(self, tmp_path):
        config = load_config(write_config(tmp_path, BASE_PARAMS))
        assert config.params.eps1 == 20.0 + 5.0j
        assert config.params.eps2 == 30.0 + 0.0j

    def test_chained_expressions(self):
        section = dict(gamma1=1.0, gamma2=4.0, coupling_j=2.0,
                       delta1="0.5 * coupling_j", delta2="delta1 ** 2",
                       eps1=3.0, eps2="2 * eps1 + 1", chi1=0.0, chi2=0.0)
        p = resolve_params(section)
        assert p.delta1 == 1.0
        assert p.delta2 == 1.0
        assert p.eps2 == 7.0 + 0j

    def test_negative_loss_names_field(self, tmp_path):
        path = write_config(tmp_path,
                            BASE_PARAMS.replace("gamma1 = 1.0",
                                                "gamma1 = -1.0"))
        with pytest.raises(ConfigError, match="gamma1"):
            load_config(path)

    def test_unknown_parameter_rejected(self, tmp_path):
        path = write_config(tmp_path, BASE_PARAMS + "gamma3 = 1.0\n")
        with pytest.raises(ConfigError, match="gamma3"):
            load_config(path)

    def test_missing_parameter_rejected(self, tmp_path):
        body = BASE_PARAMS.replace("chi2 = 0.0\n", "")
        with pytest.raises(ConfigError, match="chi2"):
            load_config(write_config(tmp_path, body))

    def test_circular_expression_rejected(self, tmp_path):
        body = BASE_PARAMS.replace('chi1 = 0.0', 'chi1 = "chi2"') \
                          .replace('chi2 = 0.0', 'chi2 = "chi1"')
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, body))

    def test_expression_syntax_is_restricted(self, tmp_path):
        body = BASE_PARAMS.replace('chi1 = 0.0',
                                   'chi1 = "__import__(\'os\').getpid()"')
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, body))

    def test_sweep_validation(self, tmp_path):
        body = BASE_PARAMS + """
[sweep]
observable = "min_epr_12"
axis1 = { name = "eps2", scale = "log", lo = 1.0, hi = 10.0, n = 3 }
axis2 = { name = "delta2", scale = "linear", lo = 0.0, hi = 1.0, n = 3 }
"""
        config = load_config(write_config(tmp_path, body))
        assert config.sweep.axis1.name == "eps2"
        bad = body.replace('lo = 1.0', 'lo = -1.0')
        with pytest.raises(ConfigError, match="axis1"):
            load_config(write_config(tmp_path, bad, name="bad.toml"))

    def test_render_round_trip(self, tmp_path):
        config = load_config(CONFIGS / "fig2.toml")
        rendered = render_resolved(config)
        path = write_config(tmp_path, rendered, name="resolved.toml")
        again = load_config(path)
        assert again.params == config.params
        assert again.ensemble == config.ensemble


class TestCliExitCodes:
    def test_config_error_is_exit_2(self, tmp_path, capsys):
        bad = write_config(tmp_path, BASE_PARAMS.replace("gamma1 = 1.0",
                                                         "gamma1 = -1.0"))
        code = main(["steady", "--config", str(bad)])
        assert code == 2
        assert "gamma1" in capsys.readouterr().err

    def test_missing_file_is_exit_2(self, tmp_path):
        assert main(["steady", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_simulate_requires_ensemble(self, tmp_path, capsys):
        path = write_config(tmp_path, BASE_PARAMS)
        assert main(["simulate", "--config", str(path)]) == 2
        assert "ensemble" in capsys.readouterr().err

    def test_numerical_failure_is_exit_3(self, tmp_path, capsys):
        # pump far beyond the overflow guard of the relaxation
        body = BASE_PARAMS.replace("eps1 = [20.0, 5.0]",
                                   "eps1 = 1.0e14")
        path = write_config(tmp_path, body)
        code = main(["steady", "--config", str(path)])
        assert code == 3


class TestCliArtifacts:
    def test_steady_writes_artifacts(self, tmp_path, capsys):
        path = write_config(tmp_path, BASE_PARAMS)
        out = tmp_path / "out"
        assert main(["steady", "--config", str(path),
                     "--out", str(out)]) == 0
        text = (out / "steady.txt").read_text()
        assert "stable = true" in text
        assert (out / "resolved_config.toml").exists()

    def test_point_on_linear_config(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["point", "--config", str(CONFIGS / "linear.toml"),
                     "--out", str(out), "--omega-points", "60",
                     "--theta-points", "30"])
        assert code == 0
        report = (out / "report.txt").read_text()
        assert 'classification = "no_steering"' in report
        with open(out / "point_spectra.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert list(rows[0]) == ["omega", "epr_12", "epr_21",
                                 "duan_simon_scaled"]
        values = np.array([[float(r[k]) for k in rows[0]] for r in rows])
        assert np.allclose(values[:, 1:], 1.0, atol=1e-10)

    def test_point_report_round_trip_bitwise(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        cfg = CONFIGS / "fig2_smoke.toml"
        assert main(["point", "--config", str(cfg), "--out",
                     str(out1)]) == 0
        assert main(["point", "--config", str(out1 / "report.txt"),
                     "--out", str(out2)]) == 0
        assert (out1 / "report.csv").read_bytes() == \
            (out2 / "report.csv").read_bytes()

    def test_check_passes_on_smoke_config(self, tmp_path, capsys):
        code = main(["check", "--config", str(CONFIGS / "fig2_smoke.toml"),
                     "--out", str(tmp_path)])
        output = capsys.readouterr().out
        assert code == 0
        assert "FAIL" not in output


BISTABLE = """
[params]
gamma1 = 1.0
gamma2 = 1.0
delta1 = -3.0
delta2 = 0.0
eps1 = 4.47213595499958
eps2 = 0.0
chi1 = 0.1
chi2 = 0.0
coupling_j = 0.0
"""


class TestMultistability:
    def test_steady_reports_branches_and_requires_selection(self, tmp_path,
                                                            capsys):
        path = write_config(tmp_path, BISTABLE)
        code = main(["steady", "--config", str(path),
                     "--out", str(tmp_path / "out")])
        err = capsys.readouterr().err
        assert code == 2
        assert "branch 0" in err and "branch 1" in err

    def test_initial_selects_branch(self, tmp_path, capsys):
        path = write_config(tmp_path, BISTABLE)
        code = main(["steady", "--config", str(path),
                     "--initial", "5.0,0.0,0.0,0.0",
                     "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "stable = true" in out

    def test_bad_initial_is_config_error(self, tmp_path):
        path = write_config(tmp_path, BISTABLE)
        code = main(["steady", "--config", str(path),
                     "--initial", "1.0,2.0",
                     "--out", str(tmp_path / "out")])
        assert code == 2


class TestSimulateCli:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = CONFIGS / "linear.toml"
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["simulate", "--config", str(cfg), "--out",
                         str(out)]) == 0
            outs.append((out / "moments.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_seed_override_changes_output(self, tmp_path):
        cfg = CONFIGS / "linear.toml"
        out1 = tmp_path / "s1"
        out2 = tmp_path / "s2"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1),
                     "--seed", "11"]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2),
                     "--seed", "12"]) == 0
        # zero-noise regime: identical even with different seeds
        assert (out1 / "moments.csv").read_bytes() == \
            (out2 / "moments.csv").read_bytes()

    def test_moments_csv_schema(self, tmp_path):
        out = tmp_path / "m"
        assert main(["simulate", "--config", str(CONFIGS / "linear.toml"),
                     "--out", str(out)]) == 0
        with open(out / "moments.csv") as handle:
            header = handle.readline().strip().split(",")
        assert header == ["time", "re_mean_a1", "im_mean_a1", "se_a1",
                          "re_mean_a2", "im_mean_a2", "se_a2",
                          "re_n1", "im_n1", "se_n1",
                          "re_n2", "im_n2", "se_n2"]


class TestSweep:
    def test_vacuum_sweep_is_constant_one(self, tmp_path):
        body = BASE_PARAMS + """
[grids]
omega_points = 40
theta_points = 20

[sweep]
observable = "min_epr_12"
axis1 = { name = "eps2", scale = "linear", lo = 10.0, hi = 40.0, n = 2 }
axis2 = { name = "delta2", scale = "linear", lo = -0.5, hi = 0.5, n = 2 }
"""
        path = write_config(tmp_path, body)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(path), "--out",
                     str(out)]) == 0
        with open(out / "sweep.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 4
        assert {r["status"] for r in rows} == {"ok"}
        assert all(float(r["value"]) == 1.0 for r in rows)
        with open(out / "sweep_report.csv") as handle:
            full = list(csv.DictReader(handle))
        assert all(r["classification"] == "no_steering" for r in full)

    def test_cell_matches_single_point_run(self):
        config = load_config(CONFIGS / "fig2.toml")
        spec = SweepSpec(
            axis1=SweepAxis(name="eps2", scale="log", lo=5e4, hi=1.2e5,
                            n_points=2),
            axis2=SweepAxis(name="delta2", scale="log", lo=0.5, hi=2.0,
                            n_points=2),
            observable="min_epr_12", fixed=config.params)
        grids = GridConfig(omega_points=80, theta_points=40)
        grid = run_sweep(spec, grids=grids)
        assert (grid.status == "ok").all()
        params = cell_params(spec, grid.axis1_values[1],
                             grid.axis2_values[0])
        from kerrcoupler.criteria import (default_omega_grid,
                                          default_theta_grid)
        single = analyze(params,
                         omega_grid=default_omega_grid(params, n_points=80),
                         theta_grid=default_theta_grid(40))
        assert abs(single.report.min_epr_12 - grid.min_epr_12[1, 0]) \
            <= 1e-10
        assert abs(single.report.min_epr_21 - grid.min_epr_21[1, 0]) \
            <= 1e-10
        assert single.report.classification == grid.classification[1, 0]

    def test_thread_count_does_not_change_results(self):
        config = load_config(CONFIGS / "fig2.toml")
        spec = SweepSpec(
            axis1=SweepAxis(name="eps2", scale="log", lo=5e4, hi=1.2e5,
                            n_points=2),
            axis2=SweepAxis(name="delta2", scale="log", lo=0.5, hi=2.0,
                            n_points=2),
            observable="min_epr_12", fixed=config.params)
        grids = GridConfig(omega_points=50, theta_points=24)
        g1 = run_sweep(spec, grids=grids, threads=1)
        g3 = run_sweep(spec, grids=grids, threads=3)
        assert np.array_equal(g1.min_epr_12, g3.min_epr_12)
        assert np.array_equal(g1.min_epr_21, g3.min_epr_21)
        assert np.array_equal(g1.min_duan_simon, g3.min_duan_simon)
        assert (g1.classification == g3.classification).all()

    def test_sweep_csv_schema(self, tmp_path):
        body = BASE_PARAMS + """
[grids]
omega_points = 30
theta_points = 12

[sweep]
observable = "classification"
axis1 = { name = "gamma2", scale = "log", lo = 1.0, hi = 4.0, n = 2 }
axis2 = { name = "chi2", scale = "linear", lo = 0.0, hi = 1.0e-6, n = 2 }
"""
        path = write_config(tmp_path, body)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(path), "--out",
                     str(out)]) == 0
        with open(out / "sweep.csv") as handle:
            header = handle.readline().strip().split(",")
        assert header == ["axis1", "axis2", "value", "status"]
        assert (out / "sweep.svg").exists()


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "kerrcoupler.cli",
                           *args], capture_output=True, text=True)


class TestSubprocessRoundTrip:
    def test_entry_point_runs(self):
        proc = run_cli("steady", "--config",
                       str(CONFIGS / "linear.toml"), "--out",
                       "/tmp/kerrcoupler_test_steady")
        assert proc.returncode == 0
        assert "stable = true" in proc.stdout
