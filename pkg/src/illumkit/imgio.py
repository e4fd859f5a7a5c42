"""Reading and writing linear images on disk.

PNG and TIFF at 8 or 16 bits are supported. Integer data is scaled to [0, 1]
by the dtype maximum; sources flagged as non-linear get an inverse 2.2 gamma
after scaling. Writers emit 16-bit PNG with the image maximum mapped to the
full code range and report the scale factor so linear values can be
recovered exactly.
"""

from __future__ import annotations

import json
import os

import cv2
import numpy as np

from ._binio import atomic_write_bytes
from .core import InputError, LinearImage

GAMMA = 2.2


def load_image(path, linear: bool = True) -> LinearImage:
    """Read an 8/16-bit PNG or TIFF into a linear float image."""
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InputError(f"cannot read image {path}")
    if raw.ndim != 3 or raw.shape[2] < 3:
        raise InputError(f"expected a 3-channel image, got shape {raw.shape} from {path}")
    rgb = raw[:, :, 2::-1].astype(np.float64)  # BGR(A) to RGB, alpha dropped
    if raw.dtype == np.uint8:
        rgb /= 255.0
    elif raw.dtype == np.uint16:
        rgb /= 65535.0
    elif not np.issubdtype(raw.dtype, np.floating):
        raise InputError(f"unsupported image dtype {raw.dtype} in {path}")
    if not linear:
        rgb = np.power(rgb, GAMMA)
    return LinearImage(rgb)


def save_image_png16(path, image: LinearImage) -> float:
    """Write a 16-bit PNG with max channel value mapped to 65535; returns the scale."""
    peak = float(image.data.max())
    scale = 65535.0 / peak if peak > 0 else 1.0
    quantized = np.round(image.data * scale).astype(np.uint16)
    ok, encoded = cv2.imencode(".png", quantized[:, :, ::-1])
    if not ok:
        raise InputError(f"PNG encoding failed for {path}")
    atomic_write_bytes(path, encoded.tobytes())
    return scale


def save_corrected(path, image: LinearImage, metadata: dict | None = None) -> float:
    """Write a corrected image plus a sidecar JSON recording the rescale factor."""
    scale = save_image_png16(path, image)
    sidecar = {"scale": scale, "format": "png16"}
    if metadata:
        sidecar.update(metadata)
    payload = json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
    atomic_write_bytes(os.fspath(path) + ".json", payload.encode("utf-8"))
    return scale
