"""On-disk artifact formats.

Binary containers (little-endian, magic-tagged, bit-exact round trips):

``QMON1`` grid snapshot
    magic ``QMON1`` | ndim:int64 | per axis (min:float64, max:float64,
    points:int64) | payload row-major float64 (a density) or complex128
    interleaved (a wave function); the payload kind is inferred from size.

``QREC1`` measurement record
    magic ``QREC1`` | dt:float64 | gamma:float64 | axes:int64 | seed:uint64
    | payload row-major float64, one dQ row per step.

Text traces are tab-separated with a header row and 17 significant digits,
which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grids import Grid
from .sde import MeasurementRecord
from .state import WaveFunction

SNAPSHOT_MAGIC = b"QMON1"
RECORD_MAGIC = b"QREC1"


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file: expected {n} bytes of {what}, got {len(data)}")
    return data


def write_snapshot(path, grid: Grid, values: np.ndarray) -> None:
    """Write a wave function (complex) or density (real) on its grid."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"payload shape {values.shape} does not match grid {grid.shape}")
    if np.iscomplexobj(values):
        payload = np.ascontiguousarray(values, dtype="<c16")
    else:
        payload = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<q", grid.ndim))
        for (lo, hi), n in zip(grid.extents, grid.points):
            fh.write(struct.pack("<ddq", lo, hi, n))
        fh.write(payload.tobytes())


def read_snapshot(path):
    """Returns ``(grid, values)``; complex when the payload is a wave function."""
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise FormatError(f"not a QMON1 snapshot: magic {magic!r}")
        (ndim,) = struct.unpack("<q", _read_exact(fh, 8, "dimension"))
        if ndim not in (1, 2):
            raise FormatError(f"unsupported snapshot dimension {ndim}")
        extents, points = [], []
        for _ in range(ndim):
            lo, hi, n = struct.unpack("<ddq", _read_exact(fh, 24, "axis header"))
            extents.append((lo, hi))
            points.append(int(n))
        grid = Grid(tuple(extents), tuple(points))
        payload = fh.read()
    count = int(np.prod(points))
    if len(payload) == 8 * count:
        values = np.frombuffer(payload, dtype="<f8").reshape(points)
    elif len(payload) == 16 * count:
        values = np.frombuffer(payload, dtype="<c16").reshape(points)
    else:
        raise FormatError(
            f"snapshot payload of {len(payload)} bytes does not match "
            f"{count} real or complex values")
    return grid, values.copy()


def write_wavefunction(path, wf: WaveFunction) -> None:
    write_snapshot(path, wf.grid, wf.values)


def write_record(path, record: MeasurementRecord) -> None:
    gamma = float(record.meta.get("gamma", 0.0))
    seed = int(record.meta.get("seed", 0))
    with open(path, "wb") as fh:
        fh.write(RECORD_MAGIC)
        fh.write(struct.pack("<ddqQ", record.dt, gamma, record.n_axes, seed & (2**64 - 1)))
        fh.write(np.ascontiguousarray(record.increments, dtype="<f8").tobytes())


def read_record(path) -> MeasurementRecord:
    with open(path, "rb") as fh:
        magic = fh.read(len(RECORD_MAGIC))
        if magic != RECORD_MAGIC:
            raise FormatError(f"not a QREC1 record: magic {magic!r}")
        dt, gamma, n_axes, seed = struct.unpack("<ddqQ", _read_exact(fh, 32, "record header"))
        payload = fh.read()
    if n_axes < 1:
        raise FormatError(f"record declares {n_axes} axes")
    row = 8 * n_axes
    if len(payload) % row:
        raise FormatError(
            f"truncated record: payload of {len(payload)} bytes is not a "
            f"whole number of {n_axes}-axis rows")
    increments = np.frombuffer(payload, dtype="<f8").reshape(-1, n_axes)
    return MeasurementRecord(dt, increments.copy(),
                             meta={"gamma": gamma, "seed": int(seed)})


# -- delimited text traces ---------------------------------------------------

_FMT = "%.17g"
_AXIS_NAMES = ("x", "y")


def _write_table(path, header: list[str], columns: list[np.ndarray]) -> None:
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("all columns must have equal length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for i in range(n):
            fh.write("\t".join(_FMT % c[i] for c in columns) + "\n")


def read_table(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        data = [[] for _ in header]
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(header):
                raise FormatError(f"malformed trace row in {path}: {line!r}")
            for col, p in zip(data, parts):
                col.append(float(p))
    return {name: np.asarray(col) for name, col in zip(header, data)}


def write_fidelity_trace(path, times: np.ndarray, fidelities: np.ndarray) -> None:
    _write_table(path, ["time_ms", "fidelity"], [np.asarray(times), np.asarray(fidelities)])


def write_observables(path, result) -> None:
    """Time series of per-axis position mean/variance for both states."""
    ndim = result.true_mean.shape[1]
    header = ["time_ms", "fidelity"]
    cols = [result.times, result.fidelity]
    for label, mean, var in (("true", result.true_mean, result.true_var),
                             ("est", result.est_mean, result.est_var)):
        for a in range(ndim):
            header.append(f"{label}_mean_{_AXIS_NAMES[a]}")
            cols.append(mean[:, a])
        for a in range(ndim):
            header.append(f"{label}_var_{_AXIS_NAMES[a]}")
            cols.append(var[:, a])
    _write_table(path, header, cols)


def write_mean_fidelity(path, times, mean, se, n: int) -> None:
    counts = np.full(len(np.asarray(times)), float(n))
    _write_table(path, ["time_ms", "mean_fidelity", "se_fidelity", "n"],
                 [np.asarray(times), np.asarray(mean), np.asarray(se), counts])


# -- run manifest ------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    master_seed: int
    scheme: str
    mode: str
    started_utc: str
    finished_utc: str = ""
    warnings: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def write_manifest(out_dir, manifest: RunManifest) -> Path:
    """Checksum every artifact in the directory tree, then write the
    manifest itself (always written last)."""
    out_dir = Path(out_dir)
    files = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            files[p.relative_to(out_dir).as_posix()] = sha256_file(p)
    manifest.files = files
    payload = {
        "tool_version": manifest.tool_version,
        "config_hash": manifest.config_hash,
        "master_seed": manifest.master_seed,
        "scheme": manifest.scheme,
        "mode": manifest.mode,
        "started_utc": manifest.started_utc,
        "finished_utc": manifest.finished_utc,
        "warnings": manifest.warnings,
        "files": manifest.files,
    }
    payload.update(manifest.extra)
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def verify_manifest(out_dir) -> list[str]:
    """Re-hash every file referenced by the manifest; returns mismatches."""
    out_dir = Path(out_dir)
    with open(out_dir / MANIFEST_NAME, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    problems = []
    for rel, digest in payload.get("files", {}).items():
        p = out_dir / rel
        if not p.is_file():
            problems.append(f"missing file: {rel}")
        elif sha256_file(p) != digest:
            problems.append(f"checksum mismatch: {rel}")
    return problems
