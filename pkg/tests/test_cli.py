import json

import numpy as np
import pytest
from click.testing import CliRunner

from sparsep import fileio
from sparsep.cli import main
from sparsep.probes import ProblemDims, generate_probes


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


def gen(runner, tmp_path, name="probes.csv", n=4, m=8, p=2, seed=7):
    path = tmp_path / name
    result = invoke(runner, "gen-probes", "--n", n, "--m", m, "--p", p,
                    "--seed", seed, "--out", path)
    assert result.exit_code == 0, result.output
    return path


class TestGenProbes:
    def test_byte_identical_reruns(self, runner, tmp_path):
        a = gen(runner, tmp_path, "a.csv")
        b = gen(runner, tmp_path, "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_missing_flag_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["gen-probes", "--n", "4", "--p", "2",
                                      "--seed", "1", "--out", str(tmp_path / "x.csv")])
        assert result.exit_code == 2

    def test_m_less_than_n_exit_2(self, runner, tmp_path):
        result = runner.invoke(main, ["gen-probes", "--n", "8", "--m", "4", "--p", "2",
                                      "--seed", "1", "--out", str(tmp_path / "x.csv")])
        assert result.exit_code == 2
        assert "m must be >= n" in result.output

    def test_unwritable_path_exit_3(self, runner):
        result = runner.invoke(main, ["gen-probes", "--n", "4", "--m", "8", "--p", "2",
                                      "--seed", "1", "--out", "/nonexistent-dir/x.csv"])
        assert result.exit_code == 3


class TestSimulate:
    def test_zero_channels_zero_measurements(self, runner, tmp_path):
        probes = gen(runner, tmp_path)
        chan = tmp_path / "h.csv"
        fileio.write_channels(chan, n=4, p=2, h=np.zeros(8))
        out = tmp_path / "y.csv"
        result = invoke(runner, "simulate", "--probes", probes, "--channels", chan,
                        "--out", out)
        assert result.exit_code == 0
        _, y = fileio.read_measurements(out)
        assert np.array_equal(y, np.zeros(11))

    def test_impulse_channel_gives_shifted_probe(self, runner, tmp_path):
        probes_path = gen(runner, tmp_path)
        ps = fileio.read_probes(probes_path)
        h = np.zeros(8)
        h[2] = 1.0  # source 0, offset 2
        chan = tmp_path / "h.csv"
        fileio.write_channels(chan, n=4, p=2, h=h)
        out = tmp_path / "y.csv"
        assert invoke(runner, "simulate", "--probes", probes_path, "--channels", chan,
                      "--out", out).exit_code == 0
        _, y = fileio.read_measurements(out)
        expected = np.zeros(11)
        expected[2:10] = ps.phi[0]
        assert np.max(np.abs(y - expected)) < 1e-12

    def test_noise_norm_exact(self, runner, tmp_path):
        probes = gen(runner, tmp_path)
        clean = tmp_path / "clean.csv"
        noisy = tmp_path / "noisy.csv"
        for eps, out in [(0.0, clean), (0.1, noisy)]:
            args = ["simulate", "--probes", probes, "--random-sparse", 2,
                    "--channel-seed", 5, "--out", out]
            if eps:
                args += ["--noise-eps", eps, "--noise-seed", 3]
            assert invoke(runner, *args).exit_code == 0
        _, y0 = fileio.read_measurements(clean)
        _, y1 = fileio.read_measurements(noisy)
        assert abs(np.linalg.norm(y1 - y0) - 0.1) < 1e-12

    def test_requires_exactly_one_channel_source(self, runner, tmp_path):
        probes = gen(runner, tmp_path)
        result = runner.invoke(main, ["simulate", "--probes", str(probes),
                                      "--out", str(tmp_path / "y.csv")])
        assert result.exit_code == 2


class TestRecover:
    def setup_instance(self, runner, tmp_path, s=2, seed=5, noise=0.0):
        probes = gen(runner, tmp_path, n=4, m=16, p=2, seed=11)
        y = tmp_path / "y.csv"
        h = tmp_path / "h.csv"
        args = ["simulate", "--probes", probes, "--random-sparse", s,
                "--channel-seed", seed, "--out", y, "--save-channels", h]
        if noise:
            args += ["--noise-eps", noise, "--noise-seed", 1]
        assert invoke(runner, *args).exit_code == 0
        return probes, y, h

    def test_roundtrip_bpdn_recovery(self, runner, tmp_path):
        probes, y, h = self.setup_instance(runner, tmp_path)
        out_json = tmp_path / "rec.json"
        out_csv = tmp_path / "x.csv"
        result = invoke(runner, "recover", "--probes", probes, "--measurements", y,
                        "--method", "bpdn", "--out-json", out_json, "--out-csv", out_csv)
        assert result.exit_code == 0, result.output
        _, h_true = fileio.read_channels(h)
        _, x_hat = fileio.read_vector_file(out_csv)
        assert np.linalg.norm(x_hat - h_true) < 1e-4 * np.linalg.norm(h_true)
        payload = json.loads(out_json.read_text())
        assert payload["converged"] is True
        assert payload["method"] == "bpdn"

    def test_oracle_with_true_support(self, runner, tmp_path):
        probes, y, h = self.setup_instance(runner, tmp_path)
        _, h_true = fileio.read_channels(h)
        # --support is 1-based
        support = ",".join(str(i + 1) for i in np.flatnonzero(h_true))
        out_json = tmp_path / "rec.json"
        out_csv = tmp_path / "x.csv"
        result = invoke(runner, "recover", "--probes", probes, "--measurements", y,
                        "--method", "oracle", "--support", support,
                        "--out-json", out_json, "--out-csv", out_csv)
        assert result.exit_code == 0
        _, x_hat = fileio.read_vector_file(out_csv)
        assert np.linalg.norm(x_hat - h_true) < 1e-10

    def test_iht_method(self, runner, tmp_path):
        probes, y, h = self.setup_instance(runner, tmp_path)
        out_json = tmp_path / "rec.json"
        result = invoke(runner, "recover", "--probes", probes, "--measurements", y,
                        "--method", "iht", "--s-target", 2, "--out-json", out_json)
        assert result.exit_code == 0, result.output

    def test_mismatched_dims_exit_2(self, runner, tmp_path):
        probes, y, _ = self.setup_instance(runner, tmp_path)
        other = gen(runner, tmp_path, name="other.csv", n=4, m=8, p=2, seed=1)
        result = runner.invoke(main, ["recover", "--probes", str(other),
                                      "--measurements", str(y), "--method", "bpdn",
                                      "--out-json", str(tmp_path / "r.json")])
        assert result.exit_code == 2

    def test_nonconvergence_exit_4(self, runner, tmp_path):
        probes, y, _ = self.setup_instance(runner, tmp_path, noise=0.0)
        result = runner.invoke(main, ["recover", "--probes", str(probes),
                                      "--measurements", str(y), "--method", "bpdn",
                                      "--max-iter", "2",
                                      "--out-json", str(tmp_path / "r.json")])
        assert result.exit_code == 4


class TestExperiment:
    CONFIG = {
        "kind": "phase_transition",
        "n_grid": [4], "m_grid": [8, 12], "p_grid": [2], "s_grid": [1],
        "trials": 5, "base_seed": 11, "method": "bpdn",
    }

    def write_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(self.CONFIG))
        return path

    def test_deterministic_across_runs_and_threads(self, runner, tmp_path):
        cfg = self.write_config(tmp_path)
        for name, threads in [("r1", 1), ("r2", 8)]:
            result = invoke(runner, "experiment", "--config", cfg,
                            "--out-dir", tmp_path / name, "--threads", threads)
            assert result.exit_code == 0, result.output
        assert (tmp_path / "r1/trials.csv").read_bytes() == (tmp_path / "r2/trials.csv").read_bytes()
        rec1 = json.loads((tmp_path / "r1/record.json").read_text())
        rec2 = json.loads((tmp_path / "r2/record.json").read_text())
        for rec in (rec1, rec2):
            for trial in rec["trials"]:
                trial["wall_time"] = 0.0
        assert rec1 == rec2

    def test_resume_skips_complete_points(self, runner, tmp_path):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "out"
        assert invoke(runner, "experiment", "--config", cfg, "--out-dir", out).exit_code == 0
        first = (out / "trials.csv").read_bytes()
        result = invoke(runner, "experiment", "--config", cfg, "--out-dir", out, "--resume")
        assert result.exit_code == 0
        assert "reusing 2 complete grid points" in result.output
        assert (out / "trials.csv").read_bytes() == first

    def test_resume_rejects_other_config(self, runner, tmp_path):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "out"
        assert invoke(runner, "experiment", "--config", cfg, "--out-dir", out).exit_code == 0
        changed = dict(self.CONFIG, base_seed=99)
        cfg2 = tmp_path / "cfg2.json"
        cfg2.write_text(json.dumps(changed))
        result = runner.invoke(main, ["experiment", "--config", str(cfg2),
                                      "--out-dir", str(out), "--resume"])
        assert result.exit_code == 2

    def test_malformed_json_exit_2_with_position(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"kind": phase_transition}')
        result = runner.invoke(main, ["experiment", "--config", str(bad),
                                      "--out-dir", str(tmp_path / "o")])
        assert result.exit_code == 2
        assert "line 1" in result.output and "column" in result.output

    def test_manifest_written(self, runner, tmp_path):
        from sparsep.experiments import ExperimentConfig

        cfg = self.write_config(tmp_path)
        out = tmp_path / "out"
        assert invoke(runner, "experiment", "--config", cfg, "--out-dir", out).exit_code == 0
        manifest = fileio.read_manifest(out / "manifest.json")
        expected = fileio.config_hash(ExperimentConfig.from_dict(self.CONFIG))
        assert manifest["config_hash"] == expected
        assert manifest["tool_version"]
