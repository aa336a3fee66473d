"""Versioned binary checkpoints for parameters and optimizer state.

Layout: 8-byte magic, little-endian u32 format version, u64 header
length, a UTF-8 JSON header, then the raw bytes of each array section in
header order.  Arrays round-trip bit-exactly because they are written as
raw C-order buffers with dtype recorded in the header.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"TBVMCCKP"
FORMAT_VERSION = 1


def save_checkpoint(path, ansatz: dict, n_so: int, n_elec: int, sections: dict, extra: dict | None = None):
    """Write arrays plus JSON-safe metadata; section order is preserved."""
    header = {
        "format_version": FORMAT_VERSION,
        "ansatz": dict(ansatz),
        "n_so": int(n_so),
        "n_elec": int(n_elec),
        "sections": [
            {
                "name": name,
                "dtype": np.asarray(arr).dtype.str,
                "shape": list(np.asarray(arr).shape),
            }
            for name, arr in sections.items()
        ],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in sections.values():
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path):
    """Returns (header dict, sections dict of arrays)."""
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != MAGIC:
                raise CheckpointError(f"bad magic {magic!r} in {path}")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != FORMAT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen).decode())
            sections = {}
            for meta in header["sections"]:
                dtype = np.dtype(meta["dtype"])
                shape = tuple(meta["shape"])
                count = int(np.prod(shape)) if shape else 1
                raw = fh.read(count * dtype.itemsize)
                if len(raw) != count * dtype.itemsize:
                    raise CheckpointError(f"truncated section {meta['name']!r}")
                sections[meta["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
            return header, sections
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
