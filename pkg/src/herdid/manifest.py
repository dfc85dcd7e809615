"""Run manifests: resolved config, derived seeds, and artifact checksums.

Stage seeds are split from the master seed via SeedSequence([master,
crc32(label)]), so any stage can be re-run standalone with its recorded seed
and reproduce its artifacts bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from pathlib import Path

import numpy as np


def derive_seed(master_seed: int, label: str) -> int:
    seq = np.random.SeedSequence([int(master_seed), zlib.crc32(label.encode("utf-8"))])
    return int(seq.generate_state(1, np.uint64)[0])


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, params: dict, inputs: list, outputs: list,
                   wall_clock: float, extra: dict | None = None) -> dict:
    from . import __version__

    payload = {
        "command": command,
        "herdid_version": __version__,
        "params": params,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "wall_clock_seconds": wall_clock,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return payload


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
