"""Parameter files: magic, version, JSON header, raw little-endian float64.

Layout::

    b"CTLPARAM" | u32 version | u64 header bytes | header JSON | array data

The header carries the predictor config, seed and checkpoint metadata plus
an index of (name, shape, byte offset) for every array.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTLPARAM"
VERSION = 1


def save_params(path, params: dict[str, np.ndarray], header: dict) -> None:
    index = []
    offset = 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    meta = dict(header)
    meta["arrays"] = index
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(meta_bytes)))
        fh.write(meta_bytes)
        for name in sorted(params):
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    tmp.replace(path)


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a parameter file")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported parameter file version {version}")
    header = json.loads(data[20 : 20 + hlen])
    base = 20 + hlen
    params = {}
    for entry in header.pop("arrays"):
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = base + entry["offset"]
        arr = np.frombuffer(data[start : start + 8 * count], dtype="<f8")
        params[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
    return params, header
