"""Model checkpoint container.

Layout: magic "LTCK", u16 format version, u32 JSON header length, JSON
header (model kind + network spec + parameter shapes), then the parameter
arrays as little-endian float64 in declared layer order, and finally a
64-bit checksum (first 8 bytes of SHA-256 over everything before it).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, StageError
from .nn import Network, NetworkSpec, build_network

MAGIC = b"LTCK"
VERSION = 1


class CheckpointIoError(StageError):
    pass


class ChecksumMismatch(DataError):
    pass


class VersionMismatch(DataError):
    pass


def _checksum(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()[:8]


def save_checkpoint(net: Network, path: str | Path, extra: dict | None = None) -> None:
    """Write the network's spec and parameters atomically (temp + rename)."""
    path = Path(path)
    weights = net.get_weights()
    header = {
        "kind": net.spec.kind,
        "spec": net.spec.to_jsonable(),
        "shapes": [list(w.shape) for w in weights],
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(w, dtype="<f8").tobytes() for w in weights)
    payload = MAGIC + struct.pack("<HI", VERSION, len(header_bytes)) + header_bytes + body
    blob = payload + _checksum(payload)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(blob)
        tmp.replace(path)
    except OSError as exc:
        raise CheckpointIoError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | Path) -> tuple[Network, dict]:
    """Read a checkpoint, verify magic/version/checksum, and rebuild the
    network with the stored parameters. Returns (network, extra)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointIoError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + 6 + 8 or blob[:4] != MAGIC:
        raise ChecksumMismatch(f"{path} is not a valid checkpoint (bad magic or truncated)")
    payload, stored = blob[:-8], blob[-8:]
    if _checksum(payload) != stored:
        raise ChecksumMismatch(f"{path} failed checksum verification")
    version, header_len = struct.unpack("<HI", payload[4:10])
    if version != VERSION:
        raise VersionMismatch(f"{path} has format version {version}, expected {VERSION}")
    header = json.loads(payload[10 : 10 + header_len].decode("utf-8"))
    spec = NetworkSpec.from_jsonable(header["spec"])
    net = build_network(spec, seed=0)
    weights = []
    offset = 10 + header_len
    for shape in header["shapes"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        weights.append(arr.astype(np.float64))
        offset += count * 8
    if offset != len(payload):
        raise ChecksumMismatch(f"{path} has trailing or missing parameter bytes")
    net.set_weights(weights)
    return net, header.get("extra", {})
