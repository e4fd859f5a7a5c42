"""von Kries chromatic adaptation.

Each channel is scaled independently by a diagonal gain. Correction maps the
estimated illuminant to the equal-energy white (1/sqrt(3) per channel);
``apply_illuminant`` is its exact inverse and is what the synthetic pipeline
uses to relight canonical scenes. Outputs are not clipped to [0, 1]: values
above unity keep their linear-light meaning and the image writers rescale
for display.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Illuminant, InvalidIlluminantError, LinearImage

_NEUTRAL_GAIN = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class DiagonalTransform:
    """Per-channel multiplicative gains, all strictly positive."""

    gains: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.gains, dtype=np.float64)
        if arr.shape != (3,):
            raise InvalidIlluminantError(f"gains must be a 3-vector, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise InvalidIlluminantError("gains must be finite and strictly positive")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "gains", arr)

    def apply(self, image: LinearImage) -> LinearImage:
        return LinearImage(image.data * self.gains)


def correction_transform(illuminant: Illuminant) -> DiagonalTransform:
    """Diagonal map taking ``illuminant`` to the equal-energy neutral white."""
    rgb = illuminant.as_array()
    if np.any(rgb == 0):
        raise InvalidIlluminantError("cannot correct for an illuminant with a zero channel")
    return DiagonalTransform(_NEUTRAL_GAIN / rgb)


def correct_image(image: LinearImage, illuminant: Illuminant) -> LinearImage:
    """Discount the estimated illuminant: channel c is scaled by (1/sqrt(3)) / L_c."""
    return correction_transform(illuminant).apply(image)


def apply_illuminant(image: LinearImage, illuminant: Illuminant) -> LinearImage:
    """Relight a canonical image: channel c is scaled by sqrt(3) * L_c."""
    rgb = illuminant.as_array()
    if np.any(rgb == 0):
        raise InvalidIlluminantError("cannot relight with an illuminant with a zero channel")
    return DiagonalTransform(np.sqrt(3.0) * rgb).apply(image)
