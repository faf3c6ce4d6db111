"""Binary checkpoints: magic, format version, JSON header, raw float64 payload.

Layout::

    b"NMCK" | u16 version | u32 header_len | header (JSON) | u32 crc32(payload) | payload

The header holds the network spec, the parameter count and free-form metadata.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from .nn import NetworkSpec

MAGIC = b"NMCK"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


def save_checkpoint(theta, spec: NetworkSpec, path, metadata: Optional[dict] = None) -> None:
    theta = np.ascontiguousarray(theta, dtype="<f8")
    if theta.shape != (spec.num_params,):
        raise CheckpointShapeError(
            f"theta has {theta.size} values, spec implies {spec.num_params}")
    header = json.dumps({"spec": spec.to_dict(), "count": int(theta.size),
                         "metadata": metadata or {}}, sort_keys=True).encode()
    payload = theta.tobytes()
    blob = b"".join([MAGIC, struct.pack("<HI", FORMAT_VERSION, len(header)), header,
                     struct.pack("<I", zlib.crc32(payload)), payload])
    Path(path).write_bytes(blob)


def load_checkpoint(path, expected_spec: Optional[NetworkSpec] = None, with_metadata: bool = False):
    """Return ``(theta, spec)`` (plus metadata if asked).

    Raises :class:`CheckpointVersionError`, :class:`CheckpointCorruptError` or
    :class:`CheckpointShapeError` (stored spec differs from ``expected_spec``).
    """
    blob = Path(path).read_bytes()
    if len(blob) < 10 or blob[:4] != MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint (bad magic or too short)")
    version, hlen = struct.unpack_from("<HI", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    off = 10
    if len(blob) < off + hlen + 4:
        raise CheckpointCorruptError(f"{path}: truncated header")
    try:
        header = json.loads(blob[off:off + hlen])
        spec = NetworkSpec.from_dict(header["spec"])
        count = int(header["count"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable header ({exc})") from exc
    off += hlen
    (crc,) = struct.unpack_from("<I", blob, off)
    payload = blob[off + 4:]
    if len(payload) != 8 * count or count != spec.num_params:
        raise CheckpointCorruptError(
            f"{path}: payload holds {len(payload)} bytes, expected {8 * count}")
    if zlib.crc32(payload) != crc:
        raise CheckpointCorruptError(f"{path}: checksum mismatch")
    if expected_spec is not None and expected_spec != spec:
        raise CheckpointShapeError(
            f"{path}: stored network {spec.to_dict()} does not match {expected_spec.to_dict()}")
    theta = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if with_metadata:
        return theta, spec, header.get("metadata", {})
    return theta, spec
