"""File I/O and reproducibility plumbing.

CSV columns are written as 17-significant-digit decimals so 64-bit floats
round-trip exactly across languages.  All writes are atomic (temp file +
rename).  Seeds for components and replicates are derived from the single
global seed with a stable splitting function, so changing a replicate count
never reshuffles earlier replicates.
"""

from __future__ import annotations

import json
import os
import tempfile
import zlib
from pathlib import Path

import numpy as np


def derive_seed(global_seed: int, label: str, index: int = 0) -> int:
    """Stable per-component seed from (global seed, component label, index)."""
    tag = zlib.crc32(label.encode("utf-8"))
    seq = np.random.SeedSequence([int(global_seed) & 0xFFFFFFFF, tag, int(index)])
    return int(seq.generate_state(1)[0])


def _atomic_write(path: Path, data: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list, columns: list) -> None:
    """Delimited output with a header row and %.17g float formatting."""
    columns = [np.asarray(c) for c in columns]
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("all columns must have equal length")
    lines = [",".join(header)]
    for i in range(n):
        cells = []
        for c in columns:
            v = c[i]
            if np.issubdtype(c.dtype, np.integer):
                cells.append(str(int(v)))
            else:
                cells.append(format(float(v), ".17g"))
        lines.append(",".join(cells))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_csv(path):
    """Read a delimited file written by :func:`write_csv`.

    Returns (header, dict of column name -> float array).
    """
    path = Path(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise ValueError(f"malformed or unreadable CSV {path}: {exc}") from exc
    if data.shape[1] != len(header):
        raise ValueError(
            f"{path}: {data.shape[1]} columns but {len(header)} header fields"
        )
    return header, {name: data[:, i] for i, name in enumerate(header)}


class _NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return super().default(obj)


def write_json(path, payload: dict) -> None:
    _atomic_write(Path(path), json.dumps(payload, indent=2, cls=_NumpyEncoder) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_manifest(out_dir, command: str, config: dict) -> Path:
    """Record the fully resolved configuration and seed of a run."""
    path = Path(out_dir) / "manifest.json"
    write_json(path, {"command": command, "config": config})
    return path
