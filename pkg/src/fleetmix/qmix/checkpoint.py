"""Binary checkpoint container.

Layout (all little-endian):
    magic  b"FQMX"
    u32    format version (1)
    u32    tensor count
    per tensor, sorted by name:
        u16   name byte length, then the UTF-8 name
        u32   ndim, then u64 per dimension
        f64   values, C order
Network shape metadata travels as scalar tensors under ``meta/``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from ..errors import InputError
from .nets import DTYPE, NetDims, QmixNetworks

MAGIC = b"FQMX"
VERSION = 1

_META_KEYS = ("num_locations", "num_epochs", "n_agents", "hidden")


def write_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.tobytes())


def read_tensors(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise InputError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise InputError(f"{path}: unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = arr.copy()
        return out


def save_checkpoint(path: str | Path, nets: QmixNetworks) -> None:
    tensors = {name: p.detach().numpy() for name, p in nets.state_dict().items()}
    dims = nets.dims
    for key in _META_KEYS:
        tensors[f"meta/{key}"] = np.array(float(getattr(dims, key)))
    write_tensors(path, tensors)


def load_checkpoint(path: str | Path) -> QmixNetworks:
    tensors = read_tensors(path)
    try:
        dims = NetDims(**{key: int(tensors[f"meta/{key}"]) for key in _META_KEYS})
    except KeyError as exc:
        raise InputError(f"{path}: missing checkpoint metadata {exc}") from exc
    nets = QmixNetworks(dims)
    state = {name: torch.as_tensor(arr, dtype=DTYPE)
             for name, arr in tensors.items() if not name.startswith("meta/")}
    nets.load_state_dict(state)
    return nets
