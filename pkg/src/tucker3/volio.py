"""Raw volume files with JSON sidecar headers.

A volume at ``path`` is stored as little-endian scalars in row-major order
with a sidecar ``path + ".json"`` describing it:

    {"dims": [I1, I2, I3], "dtype": "f64", "order": "row-major",
     "scale": [min, max]}

f64 round trips are bitwise lossless.  `scale` records the data range at
write time so downstream tools can invert any prior normalization; reads
never rescale.  All writes are atomic (write-temp-then-rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .tensors import DenseTensor3

__all__ = ["write_volume", "read_volume", "atomic_write_bytes",
           "atomic_write_text"]

_DTYPES = {"f32": "<f4", "f64": "<f8"}


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_volume(t: DenseTensor3, path, dtype: str = "f64") -> None:
    """Write payload at `path` plus the JSON sidecar at `path`.json."""
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {dtype!r}")
    path = Path(path)
    arr = np.ascontiguousarray(t.data, dtype=_DTYPES[dtype])
    header = {
        "dims": list(t.dims),
        "dtype": dtype,
        "order": "row-major",
        "scale": [float(t.data.min()), float(t.data.max())],
    }
    atomic_write_bytes(path, arr.tobytes())
    atomic_write_text(str(path) + ".json",
                      json.dumps(header, separators=(",", ":")) + "\n")


def read_volume(path) -> tuple[DenseTensor3, dict]:
    """Read a volume plus its sidecar header dict."""
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing sidecar {sidecar}")
    header = json.loads(sidecar.read_text())
    dims = tuple(int(d) for d in header["dims"])
    dtype = header.get("dtype", "f64")
    if dtype not in _DTYPES:
        raise ValueError(f"unsupported dtype {dtype!r} in sidecar")
    expect = dims[0] * dims[1] * dims[2] * np.dtype(_DTYPES[dtype]).itemsize
    payload = path.read_bytes()
    if len(payload) != expect:
        raise ValueError(f"payload length {len(payload)} does not match dims "
                         f"{dims} with dtype {dtype} (expected {expect})")
    arr = np.frombuffer(payload, dtype=_DTYPES[dtype]).reshape(dims)
    return DenseTensor3(arr.astype(np.float64)), header
