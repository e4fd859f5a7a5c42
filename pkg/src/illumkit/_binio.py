"""Low-level helpers shared by the binary container readers and writers."""

from __future__ import annotations

import os
import struct
import tempfile

from .core import FormatError


def read_string(blob: bytes, offset: int) -> tuple[str, int]:
    """Decode a u16-length-prefixed UTF-8 string, returning it and the next offset."""
    if offset + 2 > len(blob):
        raise FormatError("truncated length prefix", offset=offset)
    (length,) = struct.unpack_from("<H", blob, offset)
    offset += 2
    if offset + length > len(blob):
        raise FormatError("truncated string", offset=offset)
    try:
        text = blob[offset:offset + length].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"invalid UTF-8: {exc}", offset=offset) from exc
    return text, offset + length


def pack_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FormatError(f"string too long to encode ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the target directory and rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
