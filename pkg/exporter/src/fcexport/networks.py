"""Pretrained classifiers cut at a fully-connected layer.

fc6/fc7 are taken after their ReLU (so activations are non-negative),
fc8 is the raw logit layer.  Both architectures share the
features -> avgpool -> flatten -> classifier[:cut] forward path; the cut
index below is the number of leading classifier children to keep.

Preprocessing is the canonical torchvision recipe: stretch resize to
224x224 (no crop), scale to [0, 1], normalize with the ImageNet
per-channel mean and std.  16-bit images are scaled by 1/65535.
"""

import os

import cv2
import numpy as np
import torch
from torch import nn
from torchvision import models

from .files import ExportError

INPUT_SIZE = 224
IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

# (classifier cut index, output width) per network and layer
LAYERS = {
    "vgg19": {"fc6": (2, 4096), "fc7": (5, 4096), "fc8": (7, 1000)},
    "alexnet": {"fc6": (3, 4096), "fc7": (6, 4096), "fc8": (7, 1000)},
}


def build_network(name: str, weights="DEFAULT"):
    """Instantiate vgg19 or alexnet; pass weights=None for a random shell."""
    if name not in LAYERS:
        raise ExportError(f"unknown network {name!r}; choose from {sorted(LAYERS)}")
    factory = models.vgg19 if name == "vgg19" else models.alexnet
    model = factory(weights=weights)
    model.eval()
    return model


def truncated_head(model, name: str, layer: str) -> nn.Sequential:
    if layer not in LAYERS[name]:
        raise ExportError(f"unknown layer {layer!r}; choose from {sorted(LAYERS[name])}")
    cut, _ = LAYERS[name][layer]
    return nn.Sequential(*list(model.classifier.children())[:cut])


def expected_width(name: str, layer: str) -> int:
    return LAYERS[name][layer][1]


def load_input(path) -> np.ndarray:
    """Read an image file into a normalized (3, 224, 224) float32 tensor block."""
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ExportError("unreadable image")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float32) / scale
    rgb = cv2.resize(rgb, (INPUT_SIZE, INPUT_SIZE), interpolation=cv2.INTER_LINEAR)
    rgb = (rgb - IMAGENET_MEAN) / IMAGENET_STD
    return np.transpose(rgb, (2, 0, 1))


@torch.no_grad()
def activations(model, head: nn.Sequential, batch: np.ndarray) -> np.ndarray:
    """Forward a (B, 3, 224, 224) block through features and the truncated head."""
    x = torch.from_numpy(np.ascontiguousarray(batch))
    y = model.avgpool(model.features(x))
    return head(torch.flatten(y, 1)).numpy()
