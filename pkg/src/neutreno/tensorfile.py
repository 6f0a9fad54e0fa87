"""Binary tensor container with a bit-exact round trip.

Layout (all integers little-endian):

    bytes 0..7    magic ``NTRNTNSR``
    bytes 8..11   u32 version (currently 1)
    bytes 12..15  u32 rank
    then          u64 dims[rank]
    then          row-major IEEE-754 little-endian float64 payload
                  (8 * prod(dims) bytes)

Write-then-read reproduces the array bit for bit on any platform.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = [
    "MAGIC",
    "VERSION",
    "TensorFileError",
    "TensorMagicError",
    "TensorVersionError",
    "TensorTruncatedError",
    "save_tensor",
    "load_tensor",
]

MAGIC = b"NTRNTNSR"
VERSION = 1


class TensorFileError(ValueError):
    """Base class for malformed tensor files."""


class TensorMagicError(TensorFileError):
    """File does not start with the expected magic bytes."""


class TensorVersionError(TensorFileError):
    """File declares an unsupported format version."""


class TensorTruncatedError(TensorFileError):
    """File ends before the declared header or payload is complete."""


def save_tensor(path, array) -> None:
    """Write ``array`` (any rank) to ``path`` in the container format."""
    a = np.ascontiguousarray(array, dtype=np.float64)
    header = MAGIC + struct.pack("<II", VERSION, a.ndim)
    header += struct.pack(f"<{a.ndim}Q", *a.shape) if a.ndim else b""
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.astype("<f8", copy=False).tobytes())


def load_tensor(path) -> np.ndarray:
    """Read a tensor written by ``save_tensor``, validating the header.

    Raises ``TensorMagicError`` / ``TensorVersionError`` /
    ``TensorTruncatedError`` for the respective defects.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8:
        raise TensorTruncatedError(
            f"file is {len(blob)} bytes, shorter than the fixed header"
        )
    if blob[: len(MAGIC)] != MAGIC:
        raise TensorMagicError(
            f"bad magic {blob[:len(MAGIC)]!r}, expected {MAGIC!r}"
        )
    version, rank = struct.unpack_from("<II", blob, len(MAGIC))
    if version != VERSION:
        raise TensorVersionError(f"unsupported version {version}, expected {VERSION}")
    offset = len(MAGIC) + 8
    dims_bytes = 8 * rank
    if len(blob) < offset + dims_bytes:
        raise TensorTruncatedError("file ends inside the dimension list")
    dims = struct.unpack_from(f"<{rank}Q", blob, offset) if rank else ()
    offset += dims_bytes
    count = 1
    for d in dims:
        count *= d
    expected = 8 * count
    payload = blob[offset:]
    if len(payload) < expected:
        raise TensorTruncatedError(
            f"payload is {len(payload)} bytes, expected {expected} "
            f"for dims {tuple(dims)}"
        )
    if len(payload) > expected:
        raise TensorFileError(
            f"{len(payload) - expected} bytes of trailing data after payload"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    return flat.astype(np.float64).reshape(dims)
