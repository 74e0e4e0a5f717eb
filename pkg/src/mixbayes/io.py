"""On-disk formats: GMXB1 model containers and signal CSV + JSON metadata."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import MixtureModel

MAGIC = b"GMXB1"


def write_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named float64 arrays into a GMXB1 container.

    Layout: magic, little-endian u32 header length, JSON header, then the
    arrays back to back as little-endian float64 in C order. Offsets in the
    header are relative to the start of the payload.
    """
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"arrays": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def read_arrays(path):
    """Return (arrays, meta) from a GMXB1 container."""
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ValueError(f"{path}: not a GMXB1 container")
    (hlen,) = struct.unpack("<I", data[5:9])
    header = json.loads(data[9 : 9 + hlen].decode("utf-8"))
    base = 9 + hlen
    arrays = {}
    for e in header["arrays"]:
        shape = tuple(e["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = base + e["offset"]
        arrays[e["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=start).reshape(shape).copy()
    return arrays, header.get("meta", {})


def save_model(path, model: MixtureModel, meta: dict | None = None) -> None:
    arrays = {"weights": model.weights, "means": model.means, "covariances": model.covariances}
    if model.factors is not None:
        for i, B in enumerate(model.factors):
            arrays[f"factor_{i}"] = B
    write_arrays(path, arrays, {"L": model.L, "n": model.n, **(meta or {})})


def load_model(path) -> MixtureModel:
    arrays, meta = read_arrays(path)
    factors = None
    if "factor_0" in arrays:
        factors = tuple(arrays[f"factor_{i}"] for i in range(int(meta["L"])))
    return MixtureModel(arrays["weights"], arrays["means"], arrays["covariances"], factors=factors)


def write_signals(path, X: np.ndarray, meta: dict) -> None:
    """Write one signal per row as CSV plus a sibling ``.json`` metadata file.

    Floats use ``repr`` so values read back bit-exactly and the decimal point
    is always '.'.
    """
    path = Path(path)
    X = np.atleast_2d(X)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
    info = {"n": int(X.shape[1]), "count": int(X.shape[0]), **meta}
    path.with_suffix(".json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def read_signals(path):
    """Return (signals, metadata) written by :func:`write_signals`."""
    path = Path(path)
    X = np.loadtxt(path, delimiter=",", ndmin=2)
    meta_path = path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return X, meta
