"""Illuminant estimation and white-balance toolkit."""

from .core import (
    ConfigError,
    FeatureVector,
    FormatError,
    IllumkitError,
    Illuminant,
    InputError,
    InvalidIlluminantError,
    LabeledSample,
    LinearImage,
    UsageError,
    angular_error,
    normalize_illuminant,
)
from .correction import DiagonalTransform, apply_illuminant, correct_image, correction_transform
from .evaluation import (
    AugmentationError,
    DatasetManifest,
    EstimatorSpec,
    EvalDataset,
    EvaluationReport,
    ManifestError,
    ProtocolError,
    RepeatResult,
    SplitPlan,
    augment_random_patches,
    augment_sliding_window,
    default_grids,
    evaluate_hyperparams,
    format_table,
    grid_search,
    load_manifest,
    parse_estimator_spec,
    report_json,
    report_schema,
    run_protocol,
    save_dataset,
    split_counts,
    split_ids,
    train_estimator,
)
from .features import (
    extract_histogram_features,
    load_feature_file,
    resize_for_cnn,
    save_feature_file,
)
from .imgio import load_image, save_corrected, save_image_png16
from .regression import (
    KernelSpec,
    RegressionModel,
    SolverConfig,
    load_model,
    msvr_objective,
    predict,
    predict_raw,
    save_model,
    train_mrr,
    train_msvr,
    train_rr,
    train_svr,
)
from .statistics import (
    MinkowskiParams,
    estimate_statistic,
    general_gray_world,
    gray_edge_1,
    gray_edge_2,
    gray_world,
    shades_of_gray,
    white_patch,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationError",
    "ConfigError",
    "DatasetManifest",
    "DiagonalTransform",
    "EstimatorSpec",
    "EvalDataset",
    "EvaluationReport",
    "FeatureVector",
    "FormatError",
    "IllumkitError",
    "Illuminant",
    "InputError",
    "InvalidIlluminantError",
    "KernelSpec",
    "LabeledSample",
    "LinearImage",
    "ManifestError",
    "MinkowskiParams",
    "ProtocolError",
    "RegressionModel",
    "RepeatResult",
    "SolverConfig",
    "SplitPlan",
    "UsageError",
    "angular_error",
    "apply_illuminant",
    "augment_random_patches",
    "augment_sliding_window",
    "correct_image",
    "correction_transform",
    "default_grids",
    "estimate_statistic",
    "evaluate_hyperparams",
    "extract_histogram_features",
    "format_table",
    "general_gray_world",
    "gray_edge_1",
    "gray_edge_2",
    "gray_world",
    "grid_search",
    "load_feature_file",
    "load_image",
    "load_manifest",
    "load_model",
    "msvr_objective",
    "normalize_illuminant",
    "parse_estimator_spec",
    "predict",
    "predict_raw",
    "report_json",
    "report_schema",
    "resize_for_cnn",
    "run_protocol",
    "save_corrected",
    "save_dataset",
    "save_feature_file",
    "save_image_png16",
    "save_model",
    "shades_of_gray",
    "split_counts",
    "split_ids",
    "train_estimator",
    "train_mrr",
    "train_msvr",
    "train_rr",
    "train_svr",
    "white_patch",
]
