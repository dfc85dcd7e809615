"""Versioned binary checkpoint: all head parameters + batch-norm running
stats + learnable loss scalars + optimizer state, magic "HERDCKP\\x01".

Layout (little-endian): magic | u32 entry count | entries. Each entry is
u16 name length | name utf8 | u8 dtype code | u8 ndim | ndim * u64 dims |
raw little-endian payload. Dtype codes: 0=f32, 1=f64, 2=i64, 3=utf8 bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, LengthError
from .head import Affine, ProjectionHead
from .objective import LossParams
from .optim import SGD

MAGIC = b"HERDCKP\x01"

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int64"): 2}
_STRING = 3


def _write_entry(f, name: str, value) -> None:
    raw_name = name.encode("utf-8")
    f.write(struct.pack("<H", len(raw_name)))
    f.write(raw_name)
    if isinstance(value, str):
        payload = value.encode("utf-8")
        f.write(struct.pack("<BB", _STRING, 1))
        f.write(struct.pack("<Q", len(payload)))
        f.write(payload)
        return
    arr = np.asarray(value)  # tobytes() serializes C-order for any layout
    code = _CODES[arr.dtype]
    f.write(struct.pack("<BB", code, arr.ndim))
    for dim in arr.shape:
        f.write(struct.pack("<Q", dim))
    f.write(arr.tobytes())


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) < n:
        raise LengthError(f"truncated checkpoint: wanted {n} bytes, got {len(data)}")
    return data


def _read_entry(f):
    (name_len,) = struct.unpack("<H", _read_exact(f, 2))
    name = _read_exact(f, name_len).decode("utf-8")
    code, ndim = struct.unpack("<BB", _read_exact(f, 2))
    dims = [struct.unpack("<Q", _read_exact(f, 8))[0] for _ in range(ndim)]
    count = int(np.prod(dims)) if dims else 1
    if code == _STRING:
        return name, _read_exact(f, count).decode("utf-8")
    dtype = _DTYPES.get(code)
    if dtype is None:
        raise FormatError(f"unknown dtype code {code} for entry {name!r}")
    raw = _read_exact(f, count * dtype.itemsize)
    return name, np.frombuffer(raw, dtype=dtype).reshape(dims).copy()


def write_entries(path, entries: dict) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(entries)))
        for name in entries:
            _write_entry(f, name, entries[name])


def read_entries(path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        (count,) = struct.unpack("<I", _read_exact(f, 4))
        out = {}
        for _ in range(count):
            name, value = _read_entry(f)
            out[name] = value
        return out


@dataclass
class Checkpoint:
    head: ProjectionHead
    loss_params: LossParams
    classifier: Affine | None
    optim_state: dict[str, np.ndarray]
    meta: dict


def save(path, head: ProjectionHead, loss_params: LossParams, optimizer: SGD | None = None,
         classifier: Affine | None = None, meta: dict | None = None) -> None:
    entries: dict = {
        "meta.format": "herdid-checkpoint",
        "meta.input_dim": np.asarray(head.input_dim, dtype=np.int64),
        "meta.loss_variant": loss_params.variant,
        "meta.tau": np.asarray(loss_params.tau, dtype=np.float64),
    }
    for key, value in (meta or {}).items():
        entries[f"meta.{key}"] = value
    for name, arr in head.named_state():
        entries[f"head.{name}"] = arr
    entries["loss.t"] = np.asarray(loss_params.t, dtype=np.float64)
    entries["loss.b"] = np.asarray(loss_params.b, dtype=np.float64)
    if classifier is not None:
        entries["clf.weight"] = classifier.weight
        entries["clf.bias"] = classifier.bias
    if optimizer is not None:
        for name, arr in optimizer.state_arrays():
            entries[f"optim.{name}"] = arr
    write_entries(path, entries)


def load(path, dtype=np.float32) -> Checkpoint:
    entries = read_entries(path)
    if entries.get("meta.format") != "herdid-checkpoint":
        raise FormatError("not a herdid checkpoint")
    input_dim = int(entries["meta.input_dim"])
    head = ProjectionHead(input_dim, seed=0, dtype=dtype)
    head.load_state_dict({
        name[len("head."):]: arr for name, arr in entries.items() if name.startswith("head.")
    })
    head.eval()
    loss_params = LossParams.create(
        entries["meta.loss_variant"], tau=float(entries["meta.tau"]), dtype=dtype
    )
    loss_params.t[...] = entries["loss.t"]
    loss_params.b[...] = entries["loss.b"]
    classifier = None
    if "clf.weight" in entries:
        w = entries["clf.weight"]
        classifier = Affine(w.shape[1], w.shape[0],
                            np.random.Generator(np.random.PCG64(0)), dtype)
        classifier.weight[...] = w
        classifier.bias[...] = entries["clf.bias"]
    optim_state = {
        name[len("optim."):]: arr for name, arr in entries.items() if name.startswith("optim.")
    }
    meta = {name[len("meta."):]: v for name, v in entries.items() if name.startswith("meta.")}
    return Checkpoint(head=head, loss_params=loss_params, classifier=classifier,
                      optim_state=optim_state, meta=meta)
