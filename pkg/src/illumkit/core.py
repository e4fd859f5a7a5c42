"""Shared domain types and the angular-error metric.

Images are stored as double-precision linear-light intensities regardless of
the source bit depth: high-order Minkowski pooling amplifies quantization
error, so we never carry integer data past the loaders. Illuminants are
unit-norm RGB vectors; all estimator outputs pass through
:func:`normalize_illuminant`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class IllumkitError(Exception):
    """Base class for all toolkit errors."""


class InputError(IllumkitError):
    """Invalid input data (non-finite values, empty images, bad dimensions)."""


class InvalidIlluminantError(IllumkitError):
    """A vector that cannot represent a physical light (zero or negative)."""


class FormatError(IllumkitError):
    """Malformed binary or text container.

    ``offset`` is the byte offset where parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(IllumkitError):
    """Invalid run or estimator configuration."""


class UsageError(ConfigError):
    """Command-line misuse; mapped to exit code 2."""


_UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class LinearImage:
    """H x W x 3 array of non-negative linear-light intensities.

    The wrapped array is float64 and marked read-only; instances are safe to
    share across threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InputError(f"image must be H x W x 3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError("image must have height >= 1 and width >= 1")
        if not np.all(np.isfinite(arr)):
            raise InputError("image contains non-finite values")
        if np.any(arr < 0):
            raise InputError("image contains negative values")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Illuminant:
    """Unit-norm RGB direction of the global scene light."""

    rgb: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rgb, dtype=np.float64)
        if arr.shape != (3,):
            raise InvalidIlluminantError(f"illuminant must be a 3-vector, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidIlluminantError("illuminant contains non-finite values")
        if np.any(arr < 0):
            raise InvalidIlluminantError("illuminant has negative components")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > _UNIT_NORM_TOL:
            raise InvalidIlluminantError(f"illuminant norm {norm!r} is not 1 within {_UNIT_NORM_TOL}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "rgb", arr)

    def as_array(self) -> np.ndarray:
        return self.rgb


@dataclass(frozen=True)
class FeatureVector:
    """d-dimensional real feature vector with a tag naming its extractor."""

    values: np.ndarray
    source_tag: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InputError(f"feature vector must be 1-d and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("feature vector contains non-finite values")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LabeledSample:
    """A (features, ground-truth illuminant) training pair."""

    features: FeatureVector
    target: Illuminant
    image_id: str = field(default="")


def normalize_illuminant(raw) -> Illuminant:
    """Scale a raw non-negative 3-vector to unit Euclidean norm.

    Raises InvalidIlluminantError for the zero vector or any vector without a
    strictly positive component.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.shape != (3,):
        raise InvalidIlluminantError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidIlluminantError("vector contains non-finite values")
    if np.any(arr < 0):
        raise InvalidIlluminantError("vector has negative components")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0 or not arr.max() > 0:
        raise InvalidIlluminantError("cannot normalize a vector with no positive component")
    return Illuminant(arr / norm)


def angular_error(estimate, ground_truth) -> float:
    """Angle in degrees between two illuminant directions.

    Accepts Illuminant instances or raw RGB triples.  Evaluated as
    atan2(|a x b|, a.b), which is the recovery angle of the normalized inner
    product but stays accurate for near-parallel directions, where a bare
    arccos loses about 1e-7 degrees to rounding of the dot product.
    """
    a = estimate.as_array() if hasattr(estimate, "as_array") \
        else np.asarray(estimate, dtype=np.float64)
    b = ground_truth.as_array() if hasattr(ground_truth, "as_array") \
        else np.asarray(ground_truth, dtype=np.float64)
    if float(np.linalg.norm(a)) == 0.0 or float(np.linalg.norm(b)) == 0.0:
        raise InvalidIlluminantError("angular error undefined for zero-norm input")
    cross = float(np.linalg.norm(np.cross(a, b)))
    return float(np.degrees(np.arctan2(cross, float(np.dot(a, b)))))
