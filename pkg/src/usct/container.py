"""Binary tensor container used for every on-disk array artifact.

Layout (all integers little-endian):

    magic   4 bytes  b"APST"
    version 1 byte   (currently 1)
    count   u32      number of sections
    then per section:
        name_len u16, name UTF-8
        dtype    u8   (1 = float32, 2 = float64)
        rank     u8
        extents  rank x u32
        values   raw little-endian row-major

Round trips are bit-identical. Unknown versions, bad magic, and truncated
files are rejected with a diagnostic naming the byte offset and, where
known, the section being read.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

MAGIC = b"APST"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_CODE_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def write_tensors(path, sections: dict[str, np.ndarray]) -> None:
    """Write named arrays; names are stored sorted for determinism."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<B", VERSION)
    blob += struct.pack("<I", len(sections))
    for name in sorted(sections):
        arr = np.asarray(sections[name])
        dt = arr.dtype.newbyteorder("<")
        if dt not in _DTYPE_CODES:
            raise ConfigurationError(
                f"section {name!r}: unsupported dtype {arr.dtype} "
                f"(only float32/float64)")
        name_b = name.encode("utf-8")
        if len(name_b) > 0xFFFF:
            raise ConfigurationError(f"section name too long: {name!r}")
        if arr.ndim > 255:
            raise ConfigurationError(f"section {name!r}: rank > 255")
        blob += struct.pack("<H", len(name_b)) + name_b
        blob += struct.pack("<BB", _DTYPE_CODES[dt], arr.ndim)
        for ext in arr.shape:
            if ext >= 2 ** 32:
                raise ConfigurationError(f"section {name!r}: extent too large")
            blob += struct.pack("<I", ext)
        blob += np.ascontiguousarray(arr, dtype=dt).tobytes()
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ConfigurationError(
                f"{self.path}: truncated while reading {what} at byte "
                f"{self.pos} (need {n}, have {len(self.data) - self.pos})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def read_tensors(path) -> dict[str, np.ndarray]:
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4, "magic") != MAGIC:
        raise ConfigurationError(f"{path}: bad magic (not an APST container)")
    version = struct.unpack("<B", r.take(1, "version"))[0]
    if version != VERSION:
        raise ConfigurationError(
            f"{path}: unsupported container version {version}")
    count = struct.unpack("<I", r.take(4, "section count"))[0]
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        ctx = f"section {i} header"
        name_len = struct.unpack("<H", r.take(2, ctx))[0]
        name = r.take(name_len, ctx).decode("utf-8")
        code, rank = struct.unpack("<BB", r.take(2, f"section {name!r} header"))
        if code not in _CODE_DTYPES:
            raise ConfigurationError(
                f"{path}: section {name!r}: unknown dtype code {code}")
        shape = tuple(
            struct.unpack("<I", r.take(4, f"section {name!r} extents"))[0]
            for _ in range(rank))
        dt = _CODE_DTYPES[code]
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        raw = r.take(n_bytes, f"section {name!r} values")
        if name in out:
            raise ConfigurationError(f"{path}: duplicate section {name!r}")
        out[name] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    if r.pos != len(r.data):
        raise ConfigurationError(
            f"{path}: {len(r.data) - r.pos} trailing bytes after the last "
            f"section")
    return out
