"""Manifest CSV input and FeatureFile output.

The wire format matches the illuminant toolkit's feature container:
``ILKFEAT1`` magic, little-endian u32 version/count/dim, a u16
length-prefixed UTF-8 source tag, then per record a length-prefixed id
followed by dim float32 values.  Implemented here from the format
description so this package has no import-time dependency on the toolkit.
"""

import csv
import os
import struct
import tempfile

import numpy as np

MAGIC = b"ILKFEAT1"
VERSION = 1
MANIFEST_HEADER = ["image_id", "filename", "r", "g", "b"]


class ExportError(Exception):
    """Anything that should stop an export run."""


def read_manifest(path) -> list[tuple[str, str]]:
    """Return (image_id, absolute image path) pairs from a manifest CSV."""
    path = os.fspath(path)
    root = os.path.dirname(os.path.abspath(path))
    out = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ExportError(f"{path}: expected header {','.join(MANIFEST_HEADER)}, "
                              f"got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ExportError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            image_id = row[0]
            if image_id in seen:
                raise ExportError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            out.append((image_id, os.path.join(root, row[1])))
    if not out:
        raise ExportError(f"{path}: empty manifest")
    return out


def _pack_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def write_feature_file(records, source_tag: str, path) -> None:
    """Atomically write (image_id, 1-D float array) records; never leaves a partial file."""
    records = list(records)
    if not records:
        raise ExportError("refusing to write an empty feature file")
    dim = records[0][1].size
    parts = [MAGIC, struct.pack("<III", VERSION, len(records), dim)]
    parts.append(_pack_string(source_tag))
    for image_id, vec in records:
        if vec.size != dim:
            raise ExportError(f"{image_id}: dimension {vec.size} != {dim}")
        parts.append(_pack_string(image_id))
        parts.append(np.asarray(vec).astype("<f4").tobytes())

    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(parts))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
