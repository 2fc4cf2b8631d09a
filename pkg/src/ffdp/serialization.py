"""Binary model files.

Layout: ``b"FFDPMODL"``, uint32 format version, uint32 header length, UTF-8
JSON header (sorted keys), then every tensor as little-endian float32 in
the order listed under ``"tensors"`` in the header.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ffdp.features import ATTRIBUTES
from ffdp.network import ModelParams

MAGIC = b"FFDPMODL"
FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")


class ModelFormatError(ValueError):
    pass


def dumps_model(params: ModelParams, meta: dict) -> bytes:
    tensors = params.tensors()
    header = dict(meta)
    header["tensors"] = [{"name": name, "shape": list(arr.shape)} for name, arr in tensors]
    header["feature_counts"] = dict(params.feature_counts)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(blob)), blob]
    parts += [np.ascontiguousarray(arr, dtype=_LE_F32).tobytes() for _, arr in tensors]
    return b"".join(parts)


def loads_model(data: bytes) -> tuple[ModelParams, dict]:
    if data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    pos = len(MAGIC)
    version, n = struct.unpack_from("<II", data, pos)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    pos += 8
    header = json.loads(data[pos:pos + n].decode("utf-8"))
    pos += n
    arrays = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype=_LE_F32, count=count, offset=pos).reshape(shape)
        arrays[spec["name"]] = arr.astype(np.float32)
        pos += 4 * count
    if pos != len(data):
        raise ModelFormatError(f"{len(data) - pos} trailing bytes after tensors")
    params = ModelParams(
        embeddings={a: arrays[f"E_{a}"] for a in ATTRIBUTES},
        W1=arrays["W1"], b1=arrays["b1"], W2=arrays["W2"], b2=arrays["b2"],
        feature_counts=dict(header.pop("feature_counts")),
    )
    del header["tensors"]
    return params, header


def save_model(path, params: ModelParams, meta: dict) -> None:
    with open(path, "wb") as f:
        f.write(dumps_model(params, meta))


def load_model(path) -> tuple[ModelParams, dict]:
    with open(path, "rb") as f:
        return loads_model(f.read())
