"""File formats and the one place 1-based conventions meet 0-based arrays.

All numeric files are text: a single-line JSON header carrying
``format_version`` followed by one float per line, printed with 17
significant digits so that write-then-read round-trips every value
exactly.  Metadata (configs, results, manifests) is plain JSON.

Formats (all carry ``format_version``; readers reject other major
versions):

* probes        -- header {kind, n, m, p, seed}; p*m samples, row-major
  by source then time.
* channels      -- header {kind, n, p, receiver_id}; n*p samples, blocks
  concatenated by source.
* measurements  -- header {kind, variant, n, m, p, epsilon}; m+n-1
  (linear) or m (folded) samples.
* recovery JSON -- RecoveryResult fields plus the estimate as CSV.
* experiment outputs -- record JSON, flat trials CSV (no wall-clock
  column: trial CSVs are byte-identical across runs and thread counts),
  run manifest JSON with the canonical config hash.
"""

import csv
import hashlib
import json
from dataclasses import asdict

import numpy as np

from .errors import DimensionError, FormatError
from .experiments import ExperimentConfig, TrialRow
from .probes import ProblemDims, ProbeSet

FORMAT_VERSION = 1

TRIAL_CSV_COLUMNS = (
    "grid_index",
    "trial_index",
    "seed",
    "n",
    "m",
    "p",
    "s",
    "epsilon",
    "method",
    "relative_error",
    "residual",
    "snorm",
    "success",
    "converged",
    "psnr",
    "note",
)


def fmt_float(x):
    """17-significant-digit decimal text; round-trips float64 exactly."""
    return format(float(x), ".17g")


def _check_version(header, path):
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {version!r}")


def write_vector_file(path, header, values):
    header = {"format_version": FORMAT_VERSION, **header}
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True))
        fh.write("\n")
        for x in np.asarray(values, dtype=np.float64).reshape(-1):
            fh.write(fmt_float(x))
            fh.write("\n")


def read_vector_file(path):
    with open(path) as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad header: {exc}") from exc
        _check_version(header, path)
        values = np.array([float(line) for line in fh if line.strip()])
    return header, values


def write_probes(path, probes):
    header = {
        "kind": "probes",
        "n": probes.dims.n,
        "m": probes.dims.m,
        "p": probes.dims.p,
        "seed": probes.seed,
    }
    write_vector_file(path, header, probes.phi)


def read_probes(path):
    header, values = read_vector_file(path)
    if header.get("kind") != "probes":
        raise FormatError(f"{path}: not a probes file")
    dims = ProblemDims(n=header["n"], m=header["m"], p=header["p"])
    if values.size != dims.p * dims.m:
        raise FormatError(
            f"{path}: expected {dims.p * dims.m} samples, found {values.size}"
        )
    phi = values.reshape(dims.p, dims.m)
    return ProbeSet.from_time_samples(dims, header["seed"], phi)


def write_channels(path, n, p, h, receiver_id=0):
    h = np.asarray(h, dtype=np.float64)
    if h.size != n * p:
        raise DimensionError(f"channel vector must have length {n * p}, got {h.size}")
    header = {"kind": "channels", "n": int(n), "p": int(p), "receiver_id": int(receiver_id)}
    write_vector_file(path, header, h)


def read_channels(path):
    header, values = read_vector_file(path)
    if header.get("kind") != "channels":
        raise FormatError(f"{path}: not a channels file")
    if values.size != header["n"] * header["p"]:
        raise FormatError(f"{path}: sample count does not match n*p")
    return header, values


def write_measurements(path, dims, variant, y, epsilon=0.0):
    header = {
        "kind": "measurements",
        "variant": variant,
        "n": dims.n,
        "m": dims.m,
        "p": dims.p,
        "epsilon": float(epsilon),
    }
    write_vector_file(path, header, y)


def read_measurements(path):
    header, values = read_vector_file(path)
    if header.get("kind") != "measurements":
        raise FormatError(f"{path}: not a measurements file")
    n, m = header["n"], header["m"]
    expected = m if header["variant"] == "folded" else m + n - 1
    if values.size != expected:
        raise FormatError(f"{path}: expected {expected} samples, found {values.size}")
    return header, values


def write_recovery(json_path, csv_path, result, meta=None):
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "recovery",
        "method": result.method,
        "residual_norm": result.residual_norm,
        "l1_norm": result.l1_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "note": result.note,
    }
    if meta:
        payload.update(meta)
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path:
        write_vector_file(csv_path, {"kind": "estimate"}, result.x_hat)


def write_dense_csv(path, matrix):
    """Debug export of a dense operator matrix.

    Row-major, comma separated, with a comment line carrying the shape.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"# rows={matrix.shape[0]} cols={matrix.shape[1]}\n")
        for row in matrix:
            fh.write(",".join(fmt_float(x) for x in row))
            fh.write("\n")


def read_dense_csv(path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise FormatError(f"{path}: missing shape comment line")
        rows = [
            [float(tok) for tok in line.split(",")] for line in fh if line.strip()
        ]
    return np.asarray(rows)


def config_hash(config):
    """Stable hash: sha256 of the canonical (sorted, compact) config JSON."""
    if isinstance(config, ExperimentConfig):
        config = config.to_dict()
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    return ExperimentConfig.from_dict(raw)


def write_record_json(path, record):
    with open(path, "w") as fh:
        json.dump(
            {"format_version": FORMAT_VERSION, **record.to_dict()},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def write_trials_csv(path, trials):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_CSV_COLUMNS)
        for row in trials:
            data = asdict(row)
            writer.writerow(_cell(data[col]) for col in TRIAL_CSV_COLUMNS)


def read_trials_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for raw in reader:
            def get(col, conv):
                text = raw.get(col, "")
                return conv(text) if text != "" else None

            rows.append(
                TrialRow(
                    grid_index=get("grid_index", int),
                    trial_index=get("trial_index", int),
                    seed=get("seed", int),
                    n=get("n", int),
                    m=get("m", int),
                    p=get("p", int),
                    s=get("s", int),
                    epsilon=get("epsilon", float),
                    method=raw.get("method", ""),
                    relative_error=get("relative_error", float),
                    residual=get("residual", float),
                    snorm=get("snorm", float),
                    success=get("success", lambda v: v == "1"),
                    converged=get("converged", lambda v: v == "1"),
                    psnr=get("psnr", float),
                    wall_time=0.0,
                    note=raw.get("note", ""),
                )
            )
    return rows


def write_manifest(path, tool_version, cfg_hash, inputs, outputs, started_at, finished_at):
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "run_manifest",
        "tool_version": tool_version,
        "config_hash": cfg_hash,
        "inputs": inputs,
        "outputs": outputs,
        "started_at": started_at,
        "finished_at": finished_at,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path) as fh:
        payload = json.load(fh)
    _check_version(payload, path)
    return payload
