"""On-disk artifacts: diagnostics CSV, BSF1 binary snapshots and the run manifest.

BSF1 layout: 16-byte header ``b"BSF1" | u32 dim0 | u32 dim1 | u32 tag`` (little
endian) followed by ``dim0 * dim1`` little-endian float64 values in row-major
order.  Wall fields are stored with shape ``(nx, 1)``.
"""
from __future__ import annotations

import math
import os
import struct
import subprocess
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord

MAGIC = b"BSF1"
_HEADER = struct.Struct("<4sIII")

FIELD_TAGS = {
    "phi": 1, "mu": 2, "psi_bottom": 3, "psi_top": 4, "theta_bottom": 5, "theta_top": 6,
    "u_x": 7, "u_y": 8, "p": 9,
}
_TAG_NAMES = {v: k for k, v in FIELD_TAGS.items()}


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def csv_header() -> list[str]:
    return ["step"] + DiagnosticsRecord.field_names()


class TimeseriesWriter:
    """Streams diagnostics rows to a CSV file, one row per diagnostic time."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="ascii", newline="")
        self._fh.write(",".join(csv_header()) + "\n")
        self.rows = 0

    def write(self, step: int, record: DiagnosticsRecord) -> None:
        self._fh.write(",".join([_fmt(step)] + [_fmt(v) for v in record.values()]) + "\n")
        self.rows += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_timeseries(path, rows) -> None:
    """Write ``rows`` = iterable of ``(step, DiagnosticsRecord)`` in one go."""
    with TimeseriesWriter(path) as w:
        for step, rec in rows:
            w.write(step, rec)


def read_timeseries(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_field(path, array: np.ndarray, tag: int) -> None:
    a = np.asarray(array, dtype="<f8")
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"snapshot fields must be 1-D or 2-D, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, a.shape[0], a.shape[1], tag))
        fh.write(np.ascontiguousarray(a).tobytes(order="C"))


def read_field(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, d0, d1, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * d0 * d1:
        raise ValueError(f"{path}: expected {d0 * d1} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(d0, d1).copy(), tag


def snapshot_fields(state) -> dict[str, np.ndarray]:
    ch, flow = state.ch, state.flow
    return {
        "phi": ch.phi, "mu": ch.mu,
        "psi_bottom": ch.psi[0], "psi_top": ch.psi[1],
        "theta_bottom": ch.theta[0], "theta_top": ch.theta[1],
        "u_x": flow.u.x, "u_y": flow.u.y, "p": flow.p,
    }


def write_snapshot(directory, step: int, state) -> list[str]:
    """Write one BSF1 file per field; returns the file names (relative to ``directory``)."""
    directory = Path(directory)
    names = []
    for name, arr in snapshot_fields(state).items():
        fname = f"{name}_{step:06d}.bsf"
        write_field(directory / fname, arr, FIELD_TAGS[name])
        names.append(fname)
    return names


def revision() -> str:
    """Git-style revision of the source tree, or a version-based fallback."""
    from . import __version__
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}-nogit"


def write_manifest(directory, files: list[str], config_hash: str, rev: str | None = None) -> Path:
    path = Path(directory) / "manifest.txt"
    lines = [f"config_sha256 {config_hash}", f"revision {rev or revision()}", "files"]
    lines += [f"  {f}" for f in files]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path
