"""
Binary checkpoint codec.

Layout (all integers little-endian):
    b"WSDT" | u32 version | u64 metadata length | UTF-8 JSON metadata |
    repeated: u32 name length | name | u32 rank | u64 extent × rank | f32 data
"""

import json
import logging
import os
from pathlib import Path
import struct
import tempfile

import numpy as np

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAGIC = b"WSDT"
VERSION = 1


def encode_checkpoint(metadata, arrays):
    """
    Serialize metadata and named arrays to bytes.

    Args:
        metadata (dict): JSON-serializable run metadata
        arrays (dict): name → array; stored as float32 in insertion order
    """
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(meta)), meta]
    for name, array in arrays.items():
        encoded = name.encode("utf-8")
        values = np.ascontiguousarray(array, dtype="<f4")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", values.ndim))
        parts.append(struct.pack(f"<{values.ndim}Q", *values.shape))
        parts.append(values.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, payload, source):
        self.payload = payload
        self.offset = 0
        self.source = source

    def take(self, size):
        if self.offset + size > len(self.payload):
            raise ConfigurationError(f"checkpoint {self.source} is truncated")
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def done(self):
        return self.offset == len(self.payload)


def decode_checkpoint(payload, source="<bytes>"):
    """
    Parse bytes produced by ``encode_checkpoint``.

    Returns:
        tuple: (metadata dict, dict of name → float32 array)

    Raises:
        ConfigurationError: On a bad magic, unknown version or truncated data
    """
    reader = _Reader(payload, source)
    if reader.take(4) != MAGIC:
        raise ConfigurationError(f"{source} is not a WSDT checkpoint")
    version, meta_length = reader.unpack("<IQ")
    if version != VERSION:
        raise ConfigurationError(f"checkpoint {source} has unsupported version {version}")
    try:
        metadata = json.loads(reader.take(meta_length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"checkpoint {source} has corrupt metadata") from exc
    arrays = {}
    while not reader.done:
        (name_length,) = reader.unpack("<I")
        name = reader.take(name_length).decode("utf-8")
        (rank,) = reader.unpack("<I")
        shape = reader.unpack(f"<{rank}Q") if rank else ()
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.take(4 * count), dtype="<f4").astype(np.float32)
        arrays[name] = data.reshape(shape)
    return metadata, arrays


def save_checkpoint(path, metadata, arrays):
    """Write a checkpoint atomically (temporary file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = encode_checkpoint(metadata, arrays)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "wb") as stream:
            stream.write(payload)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    logger.info(f"Saved checkpoint {path} ({len(arrays)} arrays, {len(payload)} bytes)")
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        payload = path.read_bytes()
    except FileNotFoundError as exc:
        raise ConfigurationError(f"checkpoint not found: {path}") from exc
    return decode_checkpoint(payload, source=str(path))
