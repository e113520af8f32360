"""Plot-ready tables, run manifests and configuration files."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from ..fock import BASIS_ORDER_VERSION
from ..spectral import FORMAT_VERSION

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _plain(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_config(path) -> dict:
    """Read a TOML or JSON configuration file (chosen by extension)."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(data)
    return tomllib.loads(data.decode("utf-8"))


def versions() -> dict:
    out = {"basis_order": BASIS_ORDER_VERSION, "cache_format": FORMAT_VERSION, "python": sys.version.split()[0]}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def settings_hash(settings: dict) -> str:
    blob = json.dumps(_plain(settings), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Output directory of one command, named by the hash of its settings."""

    def __init__(self, out_dir, command: str, settings: dict):
        self.command = command
        self.settings = _plain(settings)
        self.key = settings_hash({"command": command, **self.settings})
        self.directory = Path(out_dir) / f"{command}-{self.key}"
        self.directory.mkdir(parents=True, exist_ok=True)
        self.outputs = []

    def csv(self, name, columns, rows) -> Path:
        path = write_csv(self.directory / name, columns, rows)
        self.outputs.append(path)
        return path

    def json(self, name, obj) -> Path:
        path = write_json(self.directory / name, obj)
        self.outputs.append(path)
        return path

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "settings": self.settings,
            "versions": versions(),
            "outputs": {p.name: file_digest(p) for p in self.outputs},
        }
        return write_json(self.directory / "manifest.json", manifest)
