import os

import numpy as np
import pytest

from unrollreg import ConfigError, IterateTrace, StepRecord
from unrollreg.cli import (
    emit_trace,
    main,
    make_denoiser_spec,
    read_trace,
    run_experiment,
)
from unrollreg.config import parse_config, parse_config_text

FAST_SCENARIO = """
geometry.n1 = 16
geometry.n2 = 16
geometry.m1 = 23
geometry.m2 = 8
scheme.n_steps = 4
scheme.inner_steps = 2
scheme.tau = auto
scheme.denoiser = gain:1.2
scheme.leaveout_fraction = 0.05
"""


class TestConfigParsing:
    def test_minimal_config_gets_defaults(self):
        cfg = parse_config_text("")
        assert cfg["scheme.n_steps"] == 100
        assert cfg["scheme.tau"] == 1e-5
        assert cfg["scheme.leaveout_fraction"] == 0.01
        assert cfg["scheme.beta_mode"] == "cv"
        assert cfg["geometry.m2"] == 60

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("scheme.stepsize = 0.1\n")
        assert "scheme.stepsize" in str(err.value)
        assert "line 1" in str(err.value)

    def test_nonpositive_tau_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("scheme.tau = 0\n")
        assert "scheme.tau" in str(err.value)

    def test_empty_sweep_list_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("sweep.inner_steps =\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("geometry.n1: 3\n")
        assert "line 1" in str(err.value)

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config_text("# comment\n\ngeometry.n1 = 32\n")
        assert cfg["geometry.n1"] == 32

    def test_paper_grid_is_eight_points(self):
        cfg = parse_config_text("sweep.inner_steps = 1, 10, 50, 100\nsweep.beta_mode = 1, cv\n")
        grid = cfg.sweep_grid()
        assert len(grid) == 8
        assert {p["inner_steps"] for p in grid} == {1, 10, 50, 100}
        assert {p["beta_mode"] for p in grid} == {1.0, "cv"}

    def test_bad_beta_mode(self):
        with pytest.raises(ConfigError):
            parse_config_text("scheme.beta_mode = 1.5\n")

    def test_parse_config_reads_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST_SCENARIO)
        cfg = parse_config(path)
        assert cfg["geometry.n1"] == 16
        assert cfg["scheme.tau"] == "auto"

    def test_denoiser_spec_strings(self):
        assert make_denoiser_spec("identity").kind == "identity"
        assert make_denoiser_spec("gain:1.5").gain_value == 1.5
        assert make_denoiser_spec("gaussian:2.0").sigma == 2.0
        assert make_denoiser_spec("median:5").window == 5
        assert make_denoiser_spec("conv_residual").weights is not None
        with pytest.raises(ValueError):
            make_denoiser_spec("wavelet:3")


def _toy_trace(n=3, with_none=False):
    trace = IterateTrace()
    for i in range(1, n + 1):
        trace.records.append(
            StepRecord(
                step=i,
                iterate_norm=1.0 / i,
                beta=0.1 * i,
                direction_norm=0.01 * i,
                leaveout_residual=2.0 / i,
                relative_norm=None if with_none else 0.5 / i,
                psnr=None if with_none else 20.0 + i,
                ssim=None if with_none else 0.9,
            )
        )
    return trace


class TestTraceCsv:
    def test_line_count(self, tmp_path):
        path = tmp_path / "trace.csv"
        emit_trace(_toy_trace(3), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 4
        assert lines[0].startswith("step,iterate_norm")

    def test_round_trip_precision(self, tmp_path):
        trace = _toy_trace(5)
        trace.records[2].iterate_norm = np.pi * 1e-7
        path = tmp_path / "trace.csv"
        emit_trace(trace, path)
        records, diverged = read_trace(path)
        assert diverged is None
        for rec, orig in zip(records, trace.records):
            assert rec["iterate_norm"] == pytest.approx(orig.iterate_norm, rel=1e-15)
            assert rec["beta"] == pytest.approx(orig.beta, rel=1e-15)

    def test_missing_optionals_empty(self, tmp_path):
        path = tmp_path / "trace.csv"
        emit_trace(_toy_trace(2, with_none=True), path)
        rows = path.read_text().splitlines()[1:]
        assert rows[0].endswith(",,")
        records, _ = read_trace(path)
        assert records[0]["psnr"] is None

    def test_divergence_footer(self, tmp_path):
        path = tmp_path / "trace.csv"
        emit_trace(_toy_trace(3), path, diverged_at=4)
        lines = path.read_text().splitlines()
        assert lines[-1] == "# diverged at step 4"
        records, diverged = read_trace(path)
        assert len(records) == 3
        assert diverged == 4


class TestRunExperiment:
    def test_sweep_artifacts_and_summary(self, tmp_path):
        cfg = parse_config_text(
            FAST_SCENARIO + "sweep.inner_steps = 1, 2\nsweep.beta_mode = 1, cv\n"
        )
        out = tmp_path / "runs"
        code, rows = run_experiment(cfg, out_dir=str(out), jobs=1)
        assert code == 0
        assert len(rows) == 4
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 5
        assert all(row["status"] == "ok" for row in rows)
        point_dirs = [d for d in os.listdir(out) if d.startswith("views")]
        assert len(point_dirs) == 4
        for d in point_dirs:
            assert (out / d / "trace.csv").exists()
            assert (out / d / "final.pgm").exists()
            assert (out / d / "s0_pick.pgm").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg_text = FAST_SCENARIO + "sweep.beta_mode = 1, cv\n"
        outs = []
        for name in ("a", "b"):
            cfg = parse_config_text(cfg_text)
            out = tmp_path / name
            code, _ = run_experiment(cfg, out_dir=str(out), jobs=1)
            assert code == 0
            outs.append(out)
        for sub in os.listdir(outs[0]):
            if sub in ("run.log",):
                continue
            a, b = outs[0] / sub, outs[1] / sub
            if a.is_file():
                assert a.read_bytes() == b.read_bytes(), sub
            else:
                for f in os.listdir(a):
                    assert (a / f).read_bytes() == (b / f).read_bytes(), f"{sub}/{f}"

    def test_parallel_jobs_match_serial(self, tmp_path):
        cfg_text = FAST_SCENARIO + "sweep.inner_steps = 1, 2\n"
        cfg = parse_config_text(cfg_text)
        code1, _ = run_experiment(cfg, out_dir=str(tmp_path / "serial"), jobs=1)
        cfg2 = parse_config_text(cfg_text)
        code2, _ = run_experiment(cfg2, out_dir=str(tmp_path / "par"), jobs=2)
        assert code1 == code2 == 0
        assert (tmp_path / "serial" / "summary.csv").read_bytes() == (
            tmp_path / "par" / "summary.csv"
        ).read_bytes()

    def test_divergence_recorded_not_fatal(self, tmp_path):
        cfg = parse_config_text(
            FAST_SCENARIO.replace("gain:1.2", "gain:1e200") + "sweep.beta_mode = 1, cv\n"
        )
        code, rows = run_experiment(cfg, out_dir=str(tmp_path / "div"), jobs=1)
        statuses = {row["beta_mode"]: row["status"] for row in rows}
        assert statuses["1"] == "diverged"
        summary = (tmp_path / "div" / "summary.csv").read_text()
        assert "diverged" in summary
        trace = (tmp_path / "div" / "views8_i01e+06_n02_beta1" / "trace.csv").read_text()
        assert "# diverged at step" in trace

    def test_all_diverged_exit_code(self, tmp_path):
        cfg = parse_config_text(FAST_SCENARIO.replace("gain:1.2", "gain:1e200"))
        cfg.values["scheme.beta_mode"] = 1.0
        code, rows = run_experiment(cfg, out_dir=str(tmp_path / "alldiv"), jobs=1)
        assert code == 3
        assert all(row["status"] == "diverged" for row in rows)

    def test_probe_output(self, tmp_path):
        cfg = parse_config_text(FAST_SCENARIO + "output.probe = true\n")
        code, _ = run_experiment(cfg, out_dir=str(tmp_path / "probe"), jobs=1)
        assert code == 0
        dirs = [d for d in os.listdir(tmp_path / "probe") if d.startswith("views")]
        assert (tmp_path / "probe" / dirs[0] / "probe.csv").exists()


class TestMainEntry:
    def test_config_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("scheme.tau = -1\n")
        assert main(["reconstruct", "--config", str(path)]) == 1
        assert "scheme.tau" in capsys.readouterr().err

    def test_missing_config_exit_code(self, tmp_path, capsys):
        assert main(["reconstruct", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_phantom_and_sinogram_commands(self, tmp_path, capsys):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST_SCENARIO)
        out = tmp_path / "art"
        assert main(["phantom", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "phantom.pgm").exists()
        assert main(["sinogram", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "sinogram_clean.pgm").exists()
        assert (out / "sinogram_noisy.pgm").exists()
        assert "noise level" in capsys.readouterr().out

    def test_reconstruct_with_plot_and_seed(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST_SCENARIO)
        out = tmp_path / "rec"
        assert main(
            ["reconstruct", "--config", str(path), "--out", str(out), "--seed", "7", "--plot"]
        ) == 0
        dirs = [d for d in os.listdir(out) if d.startswith("views")]
        assert (out / dirs[0] / "trace.svg").exists()

    def test_seed_override_changes_outputs(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST_SCENARIO)
        main(["reconstruct", "--config", str(path), "--out", str(tmp_path / "s1"), "--seed", "1"])
        main(["reconstruct", "--config", str(path), "--out", str(tmp_path / "s2"), "--seed", "2"])
        d1 = [d for d in os.listdir(tmp_path / "s1") if d.startswith("views")][0]
        a = (tmp_path / "s1" / d1 / "trace.csv").read_bytes()
        b = (tmp_path / "s2" / d1 / "trace.csv").read_bytes()
        assert a != b

    def test_probe_command(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST_SCENARIO)
        out = tmp_path / "probe"
        assert main(["probe", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "probe.csv").exists()

    def test_sweep_command_with_jobs(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(FAST_SCENARIO + "sweep.inner_steps = 1, 2\n")
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(path), "--out", str(out), "--jobs", "2"]) == 0
        assert (out / "summary.csv").exists()
