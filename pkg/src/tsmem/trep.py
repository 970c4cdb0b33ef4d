"""TREP: a bit-exact binary container for embedding matrices.

Byte layout (all integers little-endian):

    offset  size            field
    0       4               magic ``TREP``
    4       2               u16 version, currently 1
    6       2               u16 flags, currently 0
    8       4               u32 d_model
    12      4               u32 layer
    16      4               u32 reference_patch
    20      8               u64 rows
    28      rows*d_model*4  float32 row-major matrix
    ...     rows*8          u64 reference times
    last 4  u32             CRC32 over every preceding byte of the file

A JSON sidecar ``<file>.meta.json`` written next to the container carries
the provider id, source dataset name, window spec, and any extra metadata
(bank provenance, novelty threshold, coreset stats).
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .embedding import EmbeddingConfig, EmbeddingMatrix
from .errors import (
    BadMagicError,
    ChecksumMismatchError,
    TrepError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .ingest import WindowSpec

MAGIC = b"TREP"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIIQ")


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


def trep_filename(dataset: str, layer: int, patch: int, region: str) -> str:
    """Canonical file name binding a container to (dataset, layer, patch, region)."""
    return f"{dataset}__L{layer}__p{patch}__{region}.trep"


def write_trep(
    matrix: EmbeddingMatrix,
    config: EmbeddingConfig,
    path: str | Path,
    dataset: str = "",
    extra: dict | None = None,
) -> None:
    """Write matrix + config to ``path`` and its JSON sidecar."""
    if matrix.dim != config.d_model:
        raise TrepError(
            f"matrix dim {matrix.dim} does not match config d_model {config.d_model}"
        )
    if matrix.rows and int(matrix.reference_times[0]) < 0:
        raise TrepError("reference times must be non-negative")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        0,
        config.d_model,
        config.layer,
        config.spec.reference_patch,
        matrix.rows,
    )
    body = (
        header
        + matrix.data.astype("<f4", copy=False).tobytes(order="C")
        + matrix.reference_times.astype("<u8").tobytes()
    )
    crc = zlib.crc32(body) & 0xFFFFFFFF
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + struct.pack("<I", crc))

    meta = {
        "provider_id": config.provider_id,
        "dataset": dataset,
        "layer": config.layer,
        "d_model": config.d_model,
        "window_spec": {
            "window_length": config.spec.window_length,
            "stride": config.spec.stride,
            "patch_length": config.spec.patch_length,
            "reference_patch": config.spec.reference_patch,
        },
    }
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_sidecar(path: str | Path) -> dict | None:
    sc = sidecar_path(path)
    if not sc.exists():
        return None
    return json.loads(sc.read_text())


def read_trep(path: str | Path) -> tuple[EmbeddingMatrix, EmbeddingConfig]:
    """Read a container back; the matrix round-trips bit-exactly.

    Raises:
        BadMagicError, VersionMismatchError, TruncatedPayloadError,
        ChecksumMismatchError: each names the specific corruption.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size + 4:
        # Too short to even hold a header; check magic first for a better error.
        if raw[:4] != MAGIC:
            raise BadMagicError(f"{path.name}: not a TREP file")
        raise TruncatedPayloadError(f"{path.name}: file shorter than header")
    magic, version, flags, d_model, layer, reference_patch, rows = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != MAGIC:
        raise BadMagicError(f"{path.name}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(
            f"{path.name}: container version {version}, expected {VERSION}"
        )
    if d_model == 0:
        raise TrepError(f"{path.name}: d_model must be positive")
    expected = _HEADER.size + rows * d_model * 4 + rows * 8 + 4
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"{path.name}: {len(raw)} bytes, header promises {expected}"
        )
    if len(raw) > expected:
        raise TrepError(f"{path.name}: {len(raw) - expected} trailing bytes")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    actual_crc = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumMismatchError(
            f"{path.name}: CRC32 {actual_crc:#010x} != stored {stored_crc:#010x}"
        )

    data_end = _HEADER.size + rows * d_model * 4
    data = np.frombuffer(raw[_HEADER.size : data_end], dtype="<f4").reshape(
        rows, d_model
    )
    times = np.frombuffer(raw[data_end:-4], dtype="<u8").astype(np.int64)
    matrix = EmbeddingMatrix(data=data.copy(), reference_times=times)

    meta = read_sidecar(path)
    if meta is not None and "window_spec" in meta:
        ws = meta["window_spec"]
        spec = WindowSpec(
            window_length=int(ws["window_length"]),
            stride=int(ws["stride"]),
            patch_length=int(ws["patch_length"]),
            reference_patch=int(ws["reference_patch"]),
        )
        provider_id = str(meta.get("provider_id", ""))
    else:
        # Sidecar lost: reconstruct a best-effort spec from the header alone.
        n = 512 // 8
        patch = reference_patch if 1 <= reference_patch <= n else n
        spec = WindowSpec(reference_patch=patch)
        provider_id = "unknown"
    config = EmbeddingConfig(
        spec=spec,
        layer=max(1, int(layer)),
        d_model=int(d_model),
        provider_id=provider_id,
    )
    return matrix, config
