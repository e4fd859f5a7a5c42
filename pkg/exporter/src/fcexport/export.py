"""Batch export of fc-layer activations for every image in a manifest."""

import sys
from dataclasses import dataclass

import numpy as np

from .files import ExportError, read_manifest, write_feature_file
from .networks import (
    LAYERS,
    activations,
    build_network,
    expected_width,
    load_input,
    truncated_head,
)


@dataclass(frozen=True)
class ExportJob:
    manifest: str
    network: str = "vgg19"
    layer: str = "fc6"
    out: str = "features.ilk"
    batch_size: int = 8

    def __post_init__(self):
        if self.network not in LAYERS:
            raise ExportError(f"unknown network {self.network!r}")
        if self.layer not in LAYERS[self.network]:
            raise ExportError(f"unknown layer {self.layer!r}")
        if self.batch_size < 1:
            raise ExportError(f"batch_size must be >= 1, got {self.batch_size}")


def export_features(job: ExportJob, model=None) -> int:
    """Run the network over the manifest and write one FeatureFile.

    Any unreadable image is reported to stderr by id; if anything failed,
    no output is written at all.  Returns the number of records written.
    A prebuilt ``model`` skips the pretrained-weight load (used in tests).
    """
    entries = read_manifest(job.manifest)
    if model is None:
        model = build_network(job.network)
    model.eval()
    head = truncated_head(model, job.network, job.layer)

    inputs, failures = [], []
    for image_id, path in entries:
        try:
            inputs.append((image_id, load_input(path)))
        except (ExportError, OSError) as exc:
            failures.append((image_id, str(exc)))
    if failures:
        for image_id, message in failures:
            print(f"error: {image_id}: {message}", file=sys.stderr)
        raise ExportError(f"{len(failures)} of {len(entries)} images failed")

    records = []
    for start in range(0, len(inputs), job.batch_size):
        chunk = inputs[start:start + job.batch_size]
        block = np.stack([arr for _, arr in chunk])
        out = activations(model, head, block)
        records.extend((image_id, out[i]) for i, (image_id, _) in enumerate(chunk))

    width = expected_width(job.network, job.layer)
    if records[0][1].size != width:
        raise ExportError(f"{job.network}/{job.layer} produced {records[0][1].size} "
                          f"dims, expected {width}")
    write_feature_file(records, job.layer, job.out)
    return len(records)
