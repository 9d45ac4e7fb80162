"""Self-describing binary weight files.

Layout: magic ``GFNN``, little-endian uint32 version, uint32 header length,
UTF-8 JSON header, then every parameter as little-endian float32 in the
declaration order given by the header. The header carries the architecture,
the orientation grid the model was trained against, and the training recipe,
so a file is loadable (and checkable) on its own.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..io import FormatError
from .layers import Network, NetworkSpec, build_network

__all__ = ["save_weights", "load_weights", "LoadedModel"]

MAGIC = b"GFNN"
VERSION = 1


def save_weights(path, network: Network, grid_info: dict | None = None, extra: dict | None = None) -> None:
    params = network.parameters()
    header = {
        "spec": network.spec.to_dict(),
        "grid": grid_info,
        "extra": extra or {},
        "params": [{"name": name, "shape": list(arr.shape)} for name, arr in params],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in params:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class LoadedModel:
    def __init__(self, network: Network, grid_info: dict | None, extra: dict):
        self.network = network
        self.grid_info = grid_info
        self.extra = extra


def load_weights(path) -> LoadedModel:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError("not a GFNN weight file")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != VERSION:
        raise FormatError(f"unsupported GFNN version {version}")
    header_len = struct.unpack("<I", raw[8:12])[0]
    if len(raw) < 12 + header_len:
        raise FormatError("truncated GFNN header")
    try:
        header = json.loads(raw[12:12 + header_len].decode("utf-8"))
        spec = NetworkSpec.from_dict(header["spec"])
        param_table = header["params"]
    except (ValueError, KeyError) as exc:
        raise FormatError(f"malformed GFNN header: {exc}") from exc
    network = build_network(spec, rng=None, dtype=np.float32)
    expected = network.parameters()
    if [n for n, _ in expected] != [p["name"] for p in param_table]:
        raise FormatError("GFNN parameter table does not match the architecture")
    offset = 12 + header_len
    arrays = []
    for entry in param_table:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise FormatError("truncated GFNN parameter data")
        arrays.append(np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape).copy())
        offset = end
    if offset != len(raw):
        raise FormatError("trailing bytes after GFNN parameter data")
    it = iter(arrays)
    for layer in network.layers:
        if hasattr(layer, "set_parameters"):
            n = len(layer.parameters())
            layer.set_parameters([next(it) for _ in range(n)])
    return LoadedModel(network, header.get("grid"), header.get("extra", {}))
