"""Writer for TREP containers, the wire format the scoring engine consumes.

Byte layout (little-endian throughout):

    offset  size            field
    0       4               magic ``TREP``
    4       2               u16 version = 1
    6       2               u16 flags = 0
    8       4               u32 d_model
    12      4               u32 layer
    16      4               u32 reference_patch
    20      8               u64 rows
    28      rows*d_model*4  float32 row-major matrix
    ...     rows*8          u64 reference times
    last 4  u32             CRC32 over every preceding byte

A JSON sidecar ``<file>.meta.json`` carries provenance: model id, dataset
name, the window spec, and capture details.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"TREP"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIIQ")


def container_name(dataset: str, layer: int, patch: int, region: str) -> str:
    return f"{dataset}__L{layer}__p{patch}__{region}.trep"


def write_container(
    path: str | Path,
    matrix: np.ndarray,
    times: np.ndarray,
    *,
    layer: int,
    reference_patch: int,
    meta: dict,
) -> Path:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    times = np.asarray(times, dtype="<u8")
    if matrix.ndim != 2 or matrix.shape[0] != len(times):
        raise ValueError(
            f"matrix {matrix.shape} does not align with {len(times)} times"
        )
    rows, d_model = matrix.shape
    body = (
        _HEADER.pack(MAGIC, VERSION, 0, d_model, layer, reference_patch, rows)
        + matrix.tobytes(order="C")
        + times.tobytes()
    )
    crc = zlib.crc32(body) & 0xFFFFFFFF
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + struct.pack("<I", crc))
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )
    return path


def stored_checksum(path: str | Path) -> int:
    """The trailing CRC32 of an existing container."""
    raw = Path(path).read_bytes()
    return struct.unpack("<I", raw[-4:])[0]
