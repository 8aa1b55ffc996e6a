"""Persistence: canonical JSON, CSV series, a content-addressed cache and run manifests.

Reals are written with Python's shortest round-trip ``repr``, so every value
read back is bitwise equal to the one written.  All writes go to a temporary
file in the target directory and are renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "CACHE_ENV",
    "Cache",
    "RunManifest",
    "atomic_write_text",
    "canonical_json",
    "digest",
    "file_digest",
    "load_config",
    "read_csv",
    "read_json",
    "write_csv",
    "write_json",
]

CACHE_ENV = "NLSINSTAB_CACHE"


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def canonical_json(obj, indent: int | None = None) -> str:
    """Sorted-key JSON; non-finite reals are written as ``NaN``/``Infinity``."""
    return json.dumps(_plain(obj), sort_keys=True, indent=indent, separators=(",", ":") if indent is None else None)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the result ordinary umask permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write_text(path, canonical_json(obj, indent=1) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def write_csv(path, columns: dict) -> Path:
    """Write equal-length columns (name -> sequence) with a header row."""
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    rows = zip(*cols) if cols else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def _parse(v: str) -> float:
    if v == "":
        return math.nan
    if v in ("true", "false"):
        return float(v == "true")
    return float(v)


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a CSV written by :func:`write_csv`; empty cells become NaN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        data = [[_parse(v) for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(names))
    return {n: arr[:, i] for i, n in enumerate(names)}


def load_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.  Keys use dashes or underscores."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


class Cache:
    """Content-addressed JSON store keyed by canonicalised parameters.

    The root comes from ``root`` or the ``NLSINSTAB_CACHE`` environment
    variable; with neither, the cache is disabled and every lookup misses.
    Entries record the tool version and are ignored if it differs.
    """

    def __init__(self, root=None, version: str = __version__):
        root = root if root is not None else os.environ.get(CACHE_ENV)
        self.root = Path(root) if root else None
        self.version = version

    @property
    def enabled(self) -> bool:
        return self.root is not None

    def key(self, kind: str, params: dict) -> str:
        return digest({"kind": kind, "version": self.version, "params": params})

    def _path(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.json"

    def get(self, kind: str, params: dict):
        if not self.enabled:
            return None
        key = self.key(kind, params)
        path = self._path(kind, key)
        if not path.exists():
            return None
        try:
            entry = read_json(path)
            if entry.get("version") != self.version or entry.get("key") != key:
                return None
            return entry["payload"]
        except (OSError, ValueError, KeyError, TypeError, AttributeError) as exc:
            warnings.warn(f"ignoring corrupt cache entry {path}: {exc}", RuntimeWarning, stacklevel=2)
            return None

    def put(self, kind: str, params: dict, payload) -> str | None:
        if not self.enabled:
            return None
        key = self.key(kind, params)
        atomic_write_text(
            self._path(kind, key),
            canonical_json({"version": self.version, "key": key, "params": params, "payload": payload}),
        )
        return key

    def clear(self) -> None:
        if not self.enabled or not self.root.exists():
            return
        for p in self.root.glob("*/*.json"):
            p.unlink()


@dataclass
class RunManifest:
    """Provenance of one CLI invocation, written next to its outputs."""

    command: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    wall_clock: float = 0.0
    steps: int | None = None
    fixtures: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)
    tool_version: str = __version__

    def add_input(self, path) -> None:
        if path is not None:
            self.inputs[str(path)] = file_digest(path)

    def write(self, out_path) -> Path:
        out_path = Path(out_path)
        self.outputs = sorted(set(self.outputs) | {str(out_path)})
        return write_json(out_path.with_name(out_path.name + ".manifest.json"), asdict(self))

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**read_json(path))
