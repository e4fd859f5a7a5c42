"""Statistics-based illuminant estimators.

One parametric family covers the classic estimators: smooth each channel with
a Gaussian, take the n-th order spatial derivative magnitude, pool the
absolute responses with a Minkowski p-mean, and normalize the per-channel
results to a unit vector. (n, p, sigma) instantiations:

=====================  ===========
gray_world             (0, 1, 0)
white_patch            (0, inf, 0)
shades_of_gray         (0, p, 0)
general_gray_world     (0, p, sigma)
gray_edge_1            (1, p, sigma)
gray_edge_2            (2, p, sigma)
=====================  ===========

Derivative magnitudes are divided by their global maximum before pooling.
The unit normalization cancels the factor, large-p powers cannot overflow,
and rescaling the whole image by a power of two reproduces the estimate
bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Illuminant, InvalidIlluminantError, LinearImage, normalize_illuminant

INF_NORM = math.inf


@dataclass(frozen=True)
class MinkowskiParams:
    """Knobs of the unified statistic: derivative order, p-norm, Gaussian scale."""

    derivative_order: int = 0
    minkowski_p: float = 1.0
    gaussian_sigma: float = 0.0

    def __post_init__(self):
        if self.derivative_order not in (0, 1, 2):
            raise ConfigError(f"derivative order must be 0, 1 or 2, got {self.derivative_order}")
        p = self.minkowski_p
        if not (p == INF_NORM or (math.isfinite(p) and p >= 1.0)):
            raise ConfigError(f"Minkowski p must be >= 1 or inf, got {p}")
        if not (math.isfinite(self.gaussian_sigma) and self.gaussian_sigma >= 0.0):
            raise ConfigError(f"Gaussian sigma must be finite and >= 0, got {self.gaussian_sigma}")


def _gaussian_kernel(sigma: float) -> np.ndarray:
    # Truncated at half-width ceil(3*sigma), renormalized to unit sum.
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _smooth_axis(plane: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = kernel.size // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(plane, pad, mode="symmetric")
    out = np.zeros_like(plane)
    for j, w in enumerate(kernel):
        if axis == 0:
            out += w * padded[j:j + plane.shape[0], :]
        else:
            out += w * padded[:, j:j + plane.shape[1]]
    return out


def gaussian_smooth(plane: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian filter with reflective boundaries; identity at sigma=0."""
    if sigma == 0.0:
        return plane
    kernel = _gaussian_kernel(sigma)
    return _smooth_axis(_smooth_axis(plane, kernel, 0), kernel, 1)


def _derivative_magnitude(plane: np.ndarray, order: int) -> np.ndarray:
    if order == 0:
        return np.abs(plane)
    dy, dx = np.gradient(plane)
    if order == 1:
        return np.sqrt(dx * dx + dy * dy)
    dyy, dyx = np.gradient(dy)
    _, dxx = np.gradient(dx)
    # Frobenius norm of the symmetric Hessian: the mixed term counts twice.
    return np.sqrt(dxx * dxx + 2.0 * (dyx * dyx) + dyy * dyy)


def estimate_statistic(image: LinearImage, params: MinkowskiParams) -> Illuminant:
    """Evaluate the unified statistic and return the unit-norm illuminant estimate.

    Raises InvalidIlluminantError when every derivative response is zero
    (e.g. a constant image under an edge-based estimator).
    """
    data = image.data
    responses = np.empty_like(data)
    for c in range(3):
        plane = gaussian_smooth(data[:, :, c], params.gaussian_sigma)
        responses[:, :, c] = _derivative_magnitude(plane, params.derivative_order)

    scale = float(responses.max())
    if scale == 0.0:
        raise InvalidIlluminantError("all derivative responses are zero; statistic is degenerate")
    responses = responses / scale

    p = params.minkowski_p
    if p == INF_NORM:
        pooled = responses.max(axis=(0, 1))
    elif p == 1.0:
        pooled = responses.mean(axis=(0, 1))
    else:
        pooled = np.power(np.power(responses, p).mean(axis=(0, 1)), 1.0 / p)
    return normalize_illuminant(pooled)


def gray_world(image: LinearImage) -> Illuminant:
    """Mean pixel color as the illuminant (n=0, p=1)."""
    return estimate_statistic(image, MinkowskiParams(0, 1.0, 0.0))


def white_patch(image: LinearImage) -> Illuminant:
    """Per-channel maxima as the illuminant (n=0, p=inf)."""
    return estimate_statistic(image, MinkowskiParams(0, INF_NORM, 0.0))


def shades_of_gray(image: LinearImage, p: float = 6.0) -> Illuminant:
    """Minkowski p-mean of pixel colors (n=0, sigma=0)."""
    return estimate_statistic(image, MinkowskiParams(0, p, 0.0))


def general_gray_world(image: LinearImage, p: float = 6.0, sigma: float = 2.0) -> Illuminant:
    """Shades-of-gray on a Gaussian-smoothed image (n=0)."""
    return estimate_statistic(image, MinkowskiParams(0, p, sigma))


def gray_edge_1(image: LinearImage, p: float = 6.0, sigma: float = 1.0) -> Illuminant:
    """Minkowski mean of first-derivative magnitudes (n=1)."""
    return estimate_statistic(image, MinkowskiParams(1, p, sigma))


def gray_edge_2(image: LinearImage, p: float = 6.0, sigma: float = 1.0) -> Illuminant:
    """Minkowski mean of second-derivative magnitudes (n=2)."""
    return estimate_statistic(image, MinkowskiParams(2, p, sigma))
