"""Binary tensor container used by checkpoints and extractor weight files.

Layout: magic "HNRF", u32 version, u32 header length, canonical-JSON
header {kind, meta, tensors: [names...]}, then one self-describing tensor
record per name in listed order. Headers are canonicalized (sorted keys,
no whitespace) and tensor names are sorted, so load->save round-trips are
byte-identical. Writes go to a temp file and rename into place.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .errors import DataError
from .tensor import read_tensor, write_tensor

MAGIC = b"HNRF"
VERSION = 1


def write_container(path: str, kind: str, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    names = sorted(tensors)
    header = {"kind": kind, "meta": meta, "tensors": names}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hnrf-")
    try:
        with os.fdopen(fd, "wb") as fp:
            fp.write(MAGIC)
            fp.write(struct.pack("<I", VERSION))
            fp.write(struct.pack("<I", len(blob)))
            fp.write(blob)
            for name in names:
                write_tensor(fp, np.asarray(tensors[name]))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_container(path: str) -> tuple[str, dict, dict[str, np.ndarray]]:
    if not os.path.exists(path):
        raise DataError(f"container file not found: {path}")
    with open(path, "rb") as fp:
        if fp.read(4) != MAGIC:
            raise DataError(f"{path}: bad magic, not a container file")
        (version,) = struct.unpack("<I", fp.read(4))
        if version != VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        (hlen,) = struct.unpack("<I", fp.read(4))
        try:
            header = json.loads(fp.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataError(f"{path}: malformed container header: {e}") from None
        tensors = {}
        for name in header["tensors"]:
            tensors[name] = read_tensor(fp)
    return header["kind"], header["meta"], tensors
