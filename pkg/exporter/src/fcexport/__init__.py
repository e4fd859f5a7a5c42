"""Export fc-layer activations of pretrained CNNs in the FeatureFile format."""

from .export import ExportJob, export_features
from .files import ExportError, read_manifest, write_feature_file
from .networks import LAYERS, build_network, expected_width, load_input

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportJob",
    "LAYERS",
    "build_network",
    "expected_width",
    "export_features",
    "load_input",
    "read_manifest",
    "write_feature_file",
]
