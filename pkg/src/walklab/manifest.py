"""Deterministic run manifests and serialization helpers.

Every CLI run writes its outputs plus a manifest recording the command, the
full configuration echo, seeds, code version, input and output hashes, and
wall-clock time.  Output files themselves are byte-deterministic: floats are
serialized with 17 significant digits and rows in sorted key order, so
identical configurations reproduce identical bytes at any worker count.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

CODE_VERSION = "walklab-0.1.0"


def fmt_float(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: list = field(default_factory=list)
    code_version: str = CODE_VERSION
    input_hashes: dict = field(default_factory=dict)
    output_hashes: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    flags: list = field(default_factory=list)

    def finish(self, t0: float, outputs: list[str]) -> None:
        self.wall_clock_s = time.time() - t0
        for path in outputs:
            self.output_hashes[path] = sha256_file(path)

    def write(self, path: str) -> None:
        payload = {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "code_version": self.code_version,
            "input_hashes": self.input_hashes,
            "output_hashes": self.output_hashes,
            "wall_clock_s": self.wall_clock_s,
            "flags": self.flags,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    """Deterministic CSV writer: fixed float formatting, LF newlines."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_float(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    import numpy as np

    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")
