"""Feature extraction and the FeatureFile container.

Two feature sources feed the regressors: a built-in binarized chromaticity
histogram (the classic regression baseline feature) and externally computed
CNN fc-layer activations. The latter arrive through the FeatureFile binary
format so the toolkit never has to run a network itself.

FeatureFile layout (all integers little-endian):

    magic   8 bytes  b"ILKFEAT1"
    version u32      1
    N       u32      record count
    d       u32      vector dimension
    tag     u16 length + UTF-8 source tag
    records N times: u16 length + UTF-8 image id, then d float32 values
"""

from __future__ import annotations

import struct

import cv2
import numpy as np

from ._binio import atomic_write_bytes, pack_string, read_string
from .core import FeatureVector, FormatError, InputError, LinearImage

FEATURE_MAGIC = b"ILKFEAT1"
FEATURE_VERSION = 1
DEFAULT_BINS_PER_AXIS = 25
CNN_INPUT_SIZE = 224


def extract_histogram_features(image: LinearImage, bins_per_axis: int = DEFAULT_BINS_PER_AXIS) -> FeatureVector:
    """Binarized occupancy of the (r, g) chromaticity histogram.

    Chromaticity (r, g) = (R, G) / (R+G+B) is binned on a bins_per_axis^2
    grid over the unit square; each cell contributes 1 if any pixel lands in
    it. Pixels with zero intensity sum are skipped. Scale-invariant by
    construction: chromaticity cancels any global exposure factor.
    """
    if bins_per_axis < 2:
        raise InputError(f"bins_per_axis must be >= 2, got {bins_per_axis}")
    flat = image.data.reshape(-1, 3)
    sums = flat.sum(axis=1)
    lit = flat[sums > 0]
    if lit.shape[0] == 0:
        raise InputError("image has no pixel with positive intensity")
    chroma = lit[:, :2] / lit.sum(axis=1, keepdims=True)
    idx = np.minimum((chroma * bins_per_axis).astype(np.int64), bins_per_axis - 1)
    occupancy = np.zeros(bins_per_axis * bins_per_axis, dtype=np.float64)
    occupancy[idx[:, 0] * bins_per_axis + idx[:, 1]] = 1.0
    return FeatureVector(occupancy, source_tag=f"hist{bins_per_axis}")


def bilinear_resize(image: LinearImage, height: int, width: int) -> LinearImage:
    """Bilinear resample to an arbitrary size, values kept in linear light."""
    if image.height == height and image.width == width:
        return image
    resized = cv2.resize(image.data, (width, height), interpolation=cv2.INTER_LINEAR)
    # Interpolating non-negative samples cannot produce negatives, but guard
    # against tiny float excursions before revalidation.
    return LinearImage(np.maximum(resized, 0.0))


def resize_for_cnn(image: LinearImage) -> LinearImage:
    """Stretch to the fixed 224 x 224 network input (aspect not preserved)."""
    return bilinear_resize(image, CNN_INPUT_SIZE, CNN_INPUT_SIZE)


def save_feature_file(records, source_tag: str, path) -> None:
    """Write (image_id, vector) records in the FeatureFile format atomically.

    Vectors are stored as little-endian float32. Ids must be unique and all
    vectors must share one dimension.
    """
    records = list(records)
    if not records:
        raise InputError("cannot save an empty feature file")
    dims = set()
    seen = set()
    for image_id, vec in records:
        arr = vec.values if isinstance(vec, FeatureVector) else np.asarray(vec, dtype=np.float64)
        dims.add(arr.size)
        if image_id in seen:
            raise InputError(f"duplicate image_id {image_id!r}")
        seen.add(image_id)
    if len(dims) != 1:
        raise InputError(f"inconsistent feature dimensions: {sorted(dims)}")
    d = dims.pop()

    parts = [FEATURE_MAGIC, struct.pack("<III", FEATURE_VERSION, len(records), d)]
    parts.append(pack_string(source_tag))
    for image_id, vec in records:
        arr = vec.values if isinstance(vec, FeatureVector) else np.asarray(vec, dtype=np.float64)
        parts.append(pack_string(image_id))
        parts.append(arr.astype("<f4").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def load_feature_file(path) -> list[tuple[str, FeatureVector]]:
    """Read a FeatureFile; malformed content raises FormatError with a byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20:
        raise FormatError("file too short for a FeatureFile header", offset=0)
    if blob[:8] != FEATURE_MAGIC:
        raise FormatError(f"bad magic {blob[:8]!r}", offset=0)
    version, count, d = struct.unpack_from("<III", blob, 8)
    if version != FEATURE_VERSION:
        raise FormatError(f"unsupported version {version}", offset=8)
    offset = 20
    tag, offset = read_string(blob, offset)
    if d < 1 and count > 0:
        raise FormatError(f"dimension {d} must be >= 1", offset=16)

    records: list[tuple[str, FeatureVector]] = []
    seen: set[str] = set()
    vec_bytes = 4 * d
    for _ in range(count):
        image_id, offset = read_string(blob, offset)
        if image_id in seen:
            raise FormatError(f"duplicate image_id {image_id!r}", offset=offset)
        seen.add(image_id)
        if offset + vec_bytes > len(blob):
            raise FormatError(f"record for {image_id!r} truncated", offset=offset)
        values = np.frombuffer(blob, dtype="<f4", count=d, offset=offset).astype(np.float64)
        offset += vec_bytes
        records.append((image_id, FeatureVector(values, source_tag=tag)))
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes after last record", offset=offset)
    return records
