import json

import numpy as np
import pytest

from sparsep import fileio
from sparsep.errors import FormatError
from sparsep.experiments import ExperimentConfig, TrialRow
from sparsep.probes import ProblemDims, generate_probes


def test_float_format_roundtrips_exactly():
    g = np.random.default_rng(0)
    for x in list(g.standard_normal(200)) + [0.0, -0.0, 1e-300, 1e300, 1 / 3]:
        assert float(fileio.fmt_float(x)) == x


def test_probe_roundtrip_bit_identical(tmp_path):
    ps = generate_probes(ProblemDims(4, 8, 2), 7)
    path = tmp_path / "probes.csv"
    fileio.write_probes(path, ps)
    again = fileio.read_probes(path)
    assert np.array_equal(again.phi, ps.phi)
    assert np.array_equal(again.g, ps.g)
    assert again.seed == ps.seed and again.dims == ps.dims


def test_probe_header_fields(tmp_path):
    ps = generate_probes(ProblemDims(4, 8, 2), 7)
    path = tmp_path / "probes.csv"
    fileio.write_probes(path, ps)
    header = json.loads(path.read_text().splitlines()[0])
    assert header == {
        "format_version": 1, "kind": "probes", "n": 4, "m": 8, "p": 2, "seed": 7
    }


def test_unknown_version_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text('{"format_version": 2, "kind": "probes"}\n1.0\n')
    with pytest.raises(FormatError):
        fileio.read_vector_file(path)


def test_wrong_kind_rejected(tmp_path):
    ps = generate_probes(ProblemDims(2, 4, 1), 1)
    path = tmp_path / "p.csv"
    fileio.write_probes(path, ps)
    with pytest.raises(FormatError):
        fileio.read_channels(path)


def test_channels_roundtrip(tmp_path):
    h = np.linspace(-1, 1, 12)
    path = tmp_path / "h.csv"
    fileio.write_channels(path, n=3, p=4, h=h)
    header, again = fileio.read_channels(path)
    assert np.array_equal(again, h)
    assert header["n"] == 3 and header["p"] == 4


def test_measurements_roundtrip(tmp_path):
    d = ProblemDims(3, 6, 2)
    y = np.arange(8.0) / 7
    path = tmp_path / "y.csv"
    fileio.write_measurements(path, d, "linear", y, epsilon=0.25)
    header, again = fileio.read_measurements(path)
    assert np.array_equal(again, y)
    assert header["variant"] == "linear" and header["epsilon"] == 0.25


def test_measurement_length_checked(tmp_path):
    d = ProblemDims(3, 6, 2)
    path = tmp_path / "y.csv"
    fileio.write_measurements(path, d, "folded", np.zeros(6))
    text = path.read_text().splitlines()
    path.write_text("\n".join(text[:-1]) + "\n")  # drop one sample
    with pytest.raises(FormatError):
        fileio.read_measurements(path)


def test_config_hash_stable_and_order_independent():
    cfg = {"b": 1, "a": [2, 3]}
    assert fileio.config_hash(cfg) == fileio.config_hash({"a": [2, 3], "b": 1})
    assert fileio.config_hash(cfg) != fileio.config_hash({"a": [2, 4], "b": 1})


def test_trials_csv_roundtrip(tmp_path):
    rows = [
        TrialRow(grid_index=0, trial_index=0, seed=12345, n=4, m=8, p=2, s=1,
                 epsilon=0.0, method="bpdn", relative_error=1.25e-7,
                 residual=3.5e-9, success=True, converged=True, wall_time=0.37),
        TrialRow(grid_index=0, trial_index=1, seed=9, n=4, m=8, p=2, s=1,
                 epsilon=0.5, method="snorm", snorm=0.875, note="x"),
    ]
    path = tmp_path / "trials.csv"
    fileio.write_trials_csv(path, rows)
    again = fileio.read_trials_csv(path)
    assert again[0].relative_error == rows[0].relative_error
    assert again[0].seed == rows[0].seed
    assert again[0].success is True and again[0].converged is True
    assert again[1].snorm == 0.875
    assert again[1].relative_error is None
    assert again[1].note == "x"
    # wall time never lands in the CSV
    assert "0.37" not in path.read_text()


def test_record_json_written(tmp_path):
    cfg = ExperimentConfig(
        kind="phase_transition", n_grid=(4,), m_grid=(8,), p_grid=(2,),
        s_grid=(1,), trials=2, base_seed=0,
    )
    from sparsep.experiments import run_experiment

    record = run_experiment(cfg)
    path = tmp_path / "record.json"
    fileio.write_record_json(path, record)
    payload = json.loads(path.read_text())
    assert payload["config"]["kind"] == "phase_transition"
    assert len(payload["trials"]) == 2
    assert payload["aggregates"]["per_point"][0]["trials"] == 2


def test_manifest_roundtrip(tmp_path):
    path = tmp_path / "manifest.json"
    fileio.write_manifest(
        path, tool_version="0.1.0", cfg_hash="ab" * 32,
        inputs={"config": "c.json"}, outputs={"record": "r.json"},
        started_at="2020-01-01T00:00:00+00:00", finished_at="2020-01-01T00:00:01+00:00",
    )
    manifest = fileio.read_manifest(path)
    assert manifest["config_hash"] == "ab" * 32
    assert manifest["tool_version"] == "0.1.0"


def test_dense_csv_roundtrip(tmp_path):
    from sparsep.operators import build_dense_folded

    ps = generate_probes(ProblemDims(3, 6, 2), 4)
    dense = build_dense_folded(ps)
    path = tmp_path / "dense.csv"
    fileio.write_dense_csv(path, dense)
    assert path.read_text().startswith("# rows=6 cols=6\n")
    assert np.array_equal(fileio.read_dense_csv(path), dense)
