"""Output helpers: full-precision CSV, JSON, atomic writes and run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "atomic_write",
    "format_value",
    "write_csv",
    "read_csv",
    "write_json",
    "sha256_file",
    "RunManifest",
]


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_value(v) -> str:
    """17 significant digits in scientific notation; strings pass through."""
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isnan(x):
        return "nan"
    return f"{x:.16e}"


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    return atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """``(header, rows)`` with numeric fields parsed as floats."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    rows = []
    for line in text[1:]:
        out = []
        for tok in line.split(","):
            try:
                out.append(float(tok))
            except ValueError:
                out.append(tok)
        rows.append(out)
    return header, rows


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> Path:
    """Deterministic JSON (sorted keys; NaN and inf become null)."""
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    return atomic_write(path, text + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """What a command produced.  Wall time lives here, not in data files."""

    command: str
    config: dict
    version: str
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    digests: dict = field(default_factory=dict)

    def add(self, path):
        path = Path(path)
        self.outputs.append(path.name)
        self.digests[path.name] = sha256_file(path)

    def write(self, directory) -> Path:
        return write_json(Path(directory) / "manifest.json", asdict(self))

    @staticmethod
    def verify(directory) -> list:
        """Names of outputs that are missing or whose digest differs."""
        directory = Path(directory)
        doc = json.loads((directory / "manifest.json").read_text())
        bad = []
        for name in doc["outputs"]:
            p = directory / name
            if not p.exists() or sha256_file(p) != doc["digests"][name]:
                bad.append(name)
        return bad
