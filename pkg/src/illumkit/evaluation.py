"""Evaluation harness: datasets, split protocol, grid search, augmentation.

The protocol shuffles the dataset with a repeat-specific child seed, splits
it into train/validation/test parts, tunes learning estimators on the
validation split by exhaustive grid search, and scores angular errors on the
test split. Per-repeat min/median/mean/max are averaged across repeats;
statistics estimators skip the training machinery entirely and are scored
from cached per-image estimates.

Manifests are UTF-8 CSV files with header ``image_id,filename,r,g,b``;
ground-truth vectors are normalized on load and filenames resolve against
the manifest directory.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    FeatureVector,
    IllumkitError,
    Illuminant,
    InvalidIlluminantError,
    LabeledSample,
    LinearImage,
    angular_error,
    normalize_illuminant,
)
from . import statistics as stats
from .features import DEFAULT_BINS_PER_AXIS, extract_histogram_features, load_feature_file
from .imgio import load_image, save_image_png16
from .regression import KernelSpec, SolverConfig, predict_raw, train_mrr, train_msvr, train_rr, train_svr


class ManifestError(IllumkitError):
    """Manifest rows that cannot be used: bad header, duplicate or missing ids."""


class ProtocolError(IllumkitError):
    """Evaluation protocol cannot run on the given inputs."""


class AugmentationError(IllumkitError):
    """Patch extraction impossible at the requested geometry."""


STATISTIC_ESTIMATORS = ("dn", "gray_world", "white_patch", "shades_of_gray",
                        "general_gray_world", "gray_edge_1", "gray_edge_2")
LEARNING_ESTIMATORS = ("rr", "svr", "mrr", "msvr")

NEUTRAL = normalize_illuminant([1.0, 1.0, 1.0])


# ---------------------------------------------------------------------------
# manifests and datasets

@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    filename: str
    ground_truth: Illuminant


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    entries: tuple[ManifestEntry, ...]
    name: str = ""
    bit_depth: int = 16
    linear: bool = True

    def path_for(self, entry: ManifestEntry) -> str:
        return os.path.join(self.root, entry.filename)


MANIFEST_HEADER = ["image_id", "filename", "r", "g", "b"]


def load_manifest(path, name: str | None = None, linear: bool = True,
                  bit_depth: int = 16) -> DatasetManifest:
    """Parse a manifest CSV, checking id uniqueness and file resolvability."""
    path = os.fspath(path)
    root = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise ManifestError(f"{path}: bad header {header!r}, expected {MANIFEST_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ManifestError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            image_id, filename = row[0].strip(), row[1].strip()
            if image_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            try:
                gt = normalize_illuminant([float(v) for v in row[2:5]])
            except (ValueError, InvalidIlluminantError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad ground truth: {exc}") from exc
            if not os.path.exists(os.path.join(root, filename)):
                raise ManifestError(f"{path}:{lineno}: missing image file {filename!r}")
            entries.append(ManifestEntry(image_id, filename, gt))
    manifest_name = name if name is not None else os.path.splitext(os.path.basename(path))[0]
    return DatasetManifest(root=root, entries=tuple(entries), name=manifest_name,
                           bit_depth=bit_depth, linear=linear)


def save_dataset(scenes, out_dir, name: str = "synthetic") -> str:
    """Write rendered scenes as 16-bit PNGs plus a manifest CSV; returns the CSV path.

    ``scenes`` is a sequence of (LinearImage, Illuminant, image_id) triples as
    produced by the synthetic renderer.  The manifest is written as
    ``<name>.csv`` so the dataset name survives a reload.
    """
    out_dir = os.fspath(out_dir)
    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    rows = []
    for image, gt, image_id in scenes:
        filename = os.path.join("images", f"{image_id}.png")
        save_image_png16(os.path.join(out_dir, filename), image)
        r, g, b = gt.as_array()
        rows.append([image_id, filename, repr(float(r)), repr(float(g)), repr(float(b))])
    manifest_path = os.path.join(out_dir, f"{name}.csv")
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)
    return manifest_path


class EvalDataset:
    """Ground truths plus images keyed by id, with lazy loading and caching."""

    def __init__(self, items, image_loader=None, name: str = ""):
        self.name = name
        self._gts: dict[str, Illuminant] = {}
        self.ids: tuple[str, ...] = tuple(image_id for image_id, _ in items)
        for image_id, gt in items:
            if image_id in self._gts:
                raise ManifestError(f"duplicate image_id {image_id!r}")
            self._gts[image_id] = gt
        self._loader = image_loader
        self._images: dict[str, LinearImage] = {}

    def __len__(self) -> int:
        return len(self.ids)

    def ground_truth(self, image_id: str) -> Illuminant:
        return self._gts[image_id]

    def image(self, image_id: str) -> LinearImage:
        if image_id not in self._images:
            if self._loader is None:
                raise ManifestError(f"no image source for {image_id!r}")
            self._images[image_id] = self._loader(image_id)
        return self._images[image_id]

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> "EvalDataset":
        by_id = {e.image_id: e for e in manifest.entries}

        def loader(image_id):
            return load_image(manifest.path_for(by_id[image_id]), linear=manifest.linear)

        return cls([(e.image_id, e.ground_truth) for e in manifest.entries],
                   image_loader=loader, name=manifest.name)

    @classmethod
    def from_scenes(cls, scenes, name: str = "synthetic") -> "EvalDataset":
        dataset = cls([(image_id, gt) for _, gt, image_id in scenes], name=name)
        dataset._images = {image_id: image for image, _, image_id in scenes}
        return dataset

    @classmethod
    def from_images(cls, images: dict[str, LinearImage], name: str = "") -> "EvalDataset":
        """Images without ground truth; placeholder neutral targets."""
        dataset = cls([(image_id, NEUTRAL) for image_id in images], name=name)
        dataset._images = dict(images)
        return dataset


# ---------------------------------------------------------------------------
# estimator configuration

@dataclass(frozen=True)
class EstimatorSpec:
    """A named estimator plus its fixed parameters and feature source."""

    name: str
    params: tuple[tuple[str, float], ...] = ()
    kernel: str = "rbf"
    feature_source: str | None = None

    def __post_init__(self):
        if self.name not in STATISTIC_ESTIMATORS + LEARNING_ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.name!r}")
        if self.kernel not in ("linear", "rbf"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.is_learning and self.feature_source is None:
            raise ConfigError(f"learning estimator {self.name!r} requires a feature source")

    @property
    def is_learning(self) -> bool:
        return self.name in LEARNING_ESTIMATORS

    @property
    def param_dict(self) -> dict:
        return dict(self.params)


def parse_estimator_spec(text: str, feature_source: str | None = None) -> EstimatorSpec:
    """Parse ``name`` or ``name:key=value,key=value`` estimator syntax."""
    name, _, param_text = text.partition(":")
    name = name.strip()
    params = []
    kernel = "rbf"
    if param_text:
        for chunk in param_text.split(","):
            key, sep, value = chunk.partition("=")
            if not sep:
                raise ConfigError(f"bad estimator parameter {chunk!r}, expected key=value")
            key = key.strip()
            if key == "kernel":
                kernel = value.strip()
            else:
                try:
                    params.append((key, float(value)))
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return EstimatorSpec(name=name, params=tuple(params), kernel=kernel,
                         feature_source=feature_source)


def _statistic_estimate(spec: EstimatorSpec, image: LinearImage) -> Illuminant:
    p = spec.param_dict
    if spec.name == "dn":
        return NEUTRAL
    if spec.name == "gray_world":
        return stats.gray_world(image)
    if spec.name == "white_patch":
        return stats.white_patch(image)
    if spec.name == "shades_of_gray":
        return stats.shades_of_gray(image, p.get("p", 6.0))
    if spec.name == "general_gray_world":
        return stats.general_gray_world(image, p.get("p", 6.0), p.get("sigma", 2.0))
    if spec.name == "gray_edge_1":
        return stats.gray_edge_1(image, p.get("p", 6.0), p.get("sigma", 1.0))
    if spec.name == "gray_edge_2":
        return stats.gray_edge_2(image, p.get("p", 6.0), p.get("sigma", 1.0))
    raise ConfigError(f"not a statistics estimator: {spec.name!r}")


def resolve_features(dataset: EvalDataset, feature_source: str) -> dict[str, FeatureVector]:
    """Collect one feature vector per dataset id from the configured source."""
    if feature_source.startswith("builtin:hist"):
        suffix = feature_source[len("builtin:hist"):]
        bins = DEFAULT_BINS_PER_AXIS
        if suffix:
            if not suffix.startswith(":"):
                raise ConfigError(f"bad feature source {feature_source!r}")
            bins = int(suffix[1:])
        return {image_id: extract_histogram_features(dataset.image(image_id), bins)
                for image_id in dataset.ids}
    if feature_source.startswith("file:"):
        records = dict(load_feature_file(feature_source[len("file:"):]))
        missing = [i for i in dataset.ids if i not in records]
        if missing:
            raise ManifestError(
                f"feature file lacks {len(missing)} manifest ids, e.g. {missing[:5]}")
        return {image_id: records[image_id] for image_id in dataset.ids}
    raise ConfigError(f"unknown feature source {feature_source!r}; "
                      f"use builtin:hist[:<bins>] or file:<path>")


# ---------------------------------------------------------------------------
# splits

@dataclass(frozen=True)
class SplitPlan:
    """Random split configuration: seed, repeat count and part fractions."""

    seed: int = 0
    n_repeats: int = 30
    fractions: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if self.n_repeats < 1:
            raise ProtocolError(f"n_repeats must be >= 1, got {self.n_repeats}")
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ProtocolError(f"fractions must be 3 positive values, got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ProtocolError(f"fractions must sum to 1, got {sum(self.fractions)}")


def split_counts(n: int, fractions) -> tuple[int, int, int]:
    """Largest-remainder apportionment; each part is within 1 of n * fraction."""
    exact = [n * f for f in fractions]
    base = [math.floor(e) for e in exact]
    leftover = n - sum(base)
    order = sorted(range(len(base)), key=lambda i: exact[i] - base[i], reverse=True)
    for i in order[:leftover]:
        base[i] += 1
    return tuple(base)


def split_ids(ids, rng: np.random.Generator, fractions):
    """Shuffle and partition ids into train/validation/test tuples."""
    ids = list(ids)
    perm = rng.permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    n_train, n_val, _ = split_counts(len(ids), fractions)
    return (tuple(shuffled[:n_train]),
            tuple(shuffled[n_train:n_train + n_val]),
            tuple(shuffled[n_train + n_val:]))


# ---------------------------------------------------------------------------
# grid search

def default_grids(model_kind: str, kernel_kind: str) -> dict[str, tuple[float, ...]]:
    """Hyperparameter grids: decade sweeps per model family.

    Ridge models search C over 5 decades; the SVR family searches C over 9
    decades, epsilon over 4 points two decades apart and, with the RBF
    kernel, gamma over 9 decades.
    """
    if model_kind in ("mrr", "rr"):
        grids = {"C": tuple(10.0 ** k for k in range(-2, 3))}
    elif model_kind in ("msvr", "svr"):
        grids = {"C": tuple(10.0 ** k for k in range(-3, 6)),
                 "epsilon": tuple(10.0 ** k for k in range(-4, 4, 2))}
    else:
        raise ConfigError(f"no grids for estimator {model_kind!r}")
    if kernel_kind == "rbf" and model_kind in ("msvr", "svr"):
        grids["gamma"] = tuple(10.0 ** k for k in range(-4, 5))
    return grids


def _make_kernel(kernel_kind: str, params: dict, dim: int) -> KernelSpec:
    if kernel_kind == "linear":
        return KernelSpec("linear")
    # Fallback gamma when neither grid nor user fixed it: inverse dimension.
    gamma = params.get("gamma", 1.0 / dim)
    return KernelSpec("rbf", gamma=gamma)


def train_estimator(model_kind: str, samples, params: dict, kernel_kind: str = "rbf",
                    solver: SolverConfig = SolverConfig()):
    """Train one of the four regression estimators from a hyperparameter dict."""
    samples = list(samples)
    dim = samples[0].features.dim
    kernel = _make_kernel(kernel_kind, params, dim)
    c = params.get("C", 1.0)
    epsilon = params.get("epsilon", 0.1)
    if model_kind == "mrr":
        return train_mrr(samples, c, kernel)
    if model_kind == "rr":
        return train_rr(samples, c, kernel)
    if model_kind == "msvr":
        return train_msvr(samples, c, epsilon, kernel, solver)
    if model_kind == "svr":
        return train_svr(samples, c, epsilon, kernel, solver)
    raise ConfigError(f"unknown model kind {model_kind!r}")


def _model_errors(model, samples) -> list[float]:
    inputs = np.stack([s.features.values for s in samples])
    raw = predict_raw(model, inputs)
    errors = []
    for i, sample in enumerate(samples):
        clamped = np.maximum(raw[i], 0.0)
        if clamped.max() > 0:
            estimate = normalize_illuminant(clamped)
            errors.append(angular_error(estimate, sample.target))
        else:
            # Degenerate prediction: score the worst possible angle so the
            # offending grid point can never win.
            errors.append(180.0)
    return errors


def evaluate_hyperparams(train, val, model_kind: str, params: dict,
                         kernel_kind: str = "rbf",
                         solver: SolverConfig = SolverConfig()) -> float:
    """Median validation angular error of one grid point."""
    model = train_estimator(model_kind, train, params, kernel_kind, solver)
    return float(np.median(_model_errors(model, val)))


def grid_search(train, val, model_kind: str, grids: dict | None = None,
                kernel_kind: str = "rbf",
                solver: SolverConfig = SolverConfig()) -> dict:
    """Pick the grid point with the lowest median validation angular error.

    Ties prefer smaller C, then smaller gamma, then larger epsilon.
    """
    best, _ = _grid_search_detailed(train, val, model_kind, grids, kernel_kind, solver)
    return best


def _grid_search_detailed(train, val, model_kind, grids, kernel_kind, solver):
    train = list(train)
    val = list(val)
    if not train or not val:
        raise ProtocolError("grid search needs non-empty train and validation sets")
    if grids is None:
        grids = default_grids(model_kind, kernel_kind)
    axes = sorted(grids)
    if not axes or any(len(grids[a]) == 0 for a in axes):
        raise ConfigError(f"empty hyperparameter grid: {grids!r}")

    best_key = None
    best_params = None
    best_model = None
    for values in itertools.product(*(grids[a] for a in axes)):
        params = dict(zip(axes, values))
        model = train_estimator(model_kind, train, params, kernel_kind, solver)
        median = float(np.median(_model_errors(model, val)))
        key = (median, params.get("C", 0.0), params.get("gamma", 0.0),
               -params.get("epsilon", 0.0))
        if best_key is None or key < best_key:
            best_key, best_params, best_model = key, params, model
    return best_params, best_model


# ---------------------------------------------------------------------------
# protocol

@dataclass(frozen=True)
class RepeatResult:
    index: int
    test_ids: tuple[str, ...]
    errors: tuple[float, ...]
    minimum: float
    median: float
    mean: float
    maximum: float
    hyperparams: dict | None = field(default=None)


@dataclass(frozen=True)
class EvaluationReport:
    estimator: EstimatorSpec
    dataset_name: str
    n_images: int
    plan: SplitPlan
    repeats: tuple[RepeatResult, ...]
    aggregate: dict
    pooled: dict | None = None

    def to_json_dict(self) -> dict:
        d = {
            "schema_version": 1,
            "dataset": {"name": self.dataset_name, "n_images": self.n_images},
            "estimator": {
                "name": self.estimator.name,
                "params": self.estimator.param_dict,
                "kernel": self.estimator.kernel if self.estimator.is_learning else None,
                "feature_source": self.estimator.feature_source,
            },
            "split": {
                "seed": self.plan.seed,
                "n_repeats": self.plan.n_repeats,
                "fractions": list(self.plan.fractions),
            },
            "repeats": [
                {
                    "repeat": r.index,
                    "test_ids": list(r.test_ids),
                    "errors_deg": list(r.errors),
                    "min": r.minimum,
                    "median": r.median,
                    "mean": r.mean,
                    "max": r.maximum,
                    "hyperparams": r.hyperparams,
                }
                for r in self.repeats
            ],
            "aggregate": dict(self.aggregate),
        }
        if self.pooled is not None:
            d["pooled"] = dict(self.pooled)
        return d


def _error_stats(errors) -> dict:
    arr = np.asarray(errors, dtype=np.float64)
    return {"min": float(arr.min()), "median": float(np.median(arr)),
            "mean": float(arr.mean()), "max": float(arr.max())}


def run_protocol(dataset: EvalDataset, estimator: EstimatorSpec, plan: SplitPlan,
                 grids: dict | None = None, solver: SolverConfig = SolverConfig(),
                 include_pooled: bool = False) -> EvaluationReport:
    """Run the repeated-random-splits protocol and aggregate angular errors."""
    if len(dataset) < 3:
        raise ProtocolError(f"protocol needs at least 3 samples, got {len(dataset)}")

    features: dict[str, FeatureVector] | None = None
    estimates: dict[str, Illuminant] | None = None
    if estimator.is_learning:
        features = resolve_features(dataset, estimator.feature_source)
    else:
        estimates = {image_id: _statistic_estimate(estimator, dataset.image(image_id))
                     for image_id in dataset.ids}

    fixed_params = estimator.param_dict if estimator.is_learning else None
    needs_search = estimator.is_learning and "C" not in (fixed_params or {})

    children = np.random.SeedSequence(plan.seed).spawn(plan.n_repeats)
    repeats = []
    for index in range(plan.n_repeats):
        rng = np.random.default_rng(children[index])
        train_ids, val_ids, test_ids = split_ids(dataset.ids, rng, plan.fractions)
        chosen: dict | None = None
        if estimator.is_learning:
            def sample(image_id):
                return LabeledSample(features[image_id], dataset.ground_truth(image_id), image_id)

            train_set = [sample(i) for i in train_ids]
            test_set = [sample(i) for i in test_ids]
            if needs_search:
                chosen, model = _grid_search_detailed(
                    train_set, [sample(i) for i in val_ids], estimator.name,
                    grids, estimator.kernel, solver)
            else:
                chosen = dict(fixed_params)
                model = train_estimator(estimator.name, train_set, chosen,
                                        estimator.kernel, solver)
            errors = _model_errors(model, test_set)
        else:
            errors = [angular_error(estimates[i], dataset.ground_truth(i)) for i in test_ids]
        stats_d = _error_stats(errors)
        repeats.append(RepeatResult(index=index, test_ids=test_ids, errors=tuple(errors),
                                    minimum=stats_d["min"], median=stats_d["median"],
                                    mean=stats_d["mean"], maximum=stats_d["max"],
                                    hyperparams=chosen))

    aggregate = {
        "min": float(np.mean([r.minimum for r in repeats])),
        "median": float(np.mean([r.median for r in repeats])),
        "mean": float(np.mean([r.mean for r in repeats])),
        "max": float(np.mean([r.maximum for r in repeats])),
        "max_rule": "mean_of_repeat_max",
    }
    pooled = None
    if include_pooled:
        pooled = _error_stats([e for r in repeats for e in r.errors])
    return EvaluationReport(estimator=estimator, dataset_name=dataset.name,
                            n_images=len(dataset), plan=plan,
                            repeats=tuple(repeats), aggregate=aggregate, pooled=pooled)


def report_json(report: EvaluationReport) -> str:
    """Canonical JSON serialization; identical inputs give identical bytes."""
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"


def report_schema() -> dict:
    """The published JSON schema for evaluation report files."""
    from importlib.resources import files

    text = (files("illumkit") / "schemas" / "report.schema.json").read_text("utf-8")
    return json.loads(text)


def format_table(reports) -> str:
    """Plain-text comparison table with Median/Mean/Max columns."""
    lines = [f"{'Method':<32}{'Median':>10}{'Mean':>10}{'Max':>10}"]
    for report in reports:
        agg = report.aggregate
        label = report.estimator.name
        if report.estimator.params:
            label += ":" + ",".join(f"{k}={v:g}" for k, v in report.estimator.params)
        lines.append(f"{label:<32}{agg['median']:>10.2f}{agg['mean']:>10.2f}{agg['max']:>10.2f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# augmentation

def augment_sliding_window(image: LinearImage, size: int = 224,
                           stride: int | None = None) -> list[LinearImage]:
    """Square crops on a regular grid covering the whole image.

    When the stride does not land exactly on the far edge an extra window is
    placed flush with it, so every pixel is covered.
    """
    if stride is None:
        stride = size
    if stride < 1:
        raise AugmentationError(f"stride must be >= 1, got {stride}")
    h, w = image.height, image.width
    if size > min(h, w):
        raise AugmentationError(f"window {size} exceeds image size {w}x{h}")

    def positions(extent):
        pos = list(range(0, extent - size + 1, stride))
        if pos[-1] != extent - size:
            pos.append(extent - size)
        return pos

    patches = []
    for y in positions(h):
        for x in positions(w):
            patches.append(LinearImage(image.data[y:y + size, x:x + size]))
    return patches


def augment_random_patches(image: LinearImage, n: int, size: int = 224,
                           seed: int = 0, resize_max: int = 1000) -> list[LinearImage]:
    """Random square crops from the image rescaled so max(w, h) = resize_max."""
    from .features import bilinear_resize

    if n < 1:
        raise AugmentationError(f"need n >= 1 patches, got {n}")
    h, w = image.height, image.width
    scale = resize_max / max(h, w)
    new_h = resize_max if h >= w else max(1, round(h * scale))
    new_w = resize_max if w > h else max(1, round(w * scale))
    resized = bilinear_resize(image, new_h, new_w)
    if size > min(new_h, new_w):
        raise AugmentationError(
            f"window {size} exceeds resized image {new_w}x{new_h}")
    rng = np.random.default_rng(seed)
    patches = []
    for _ in range(n):
        y = int(rng.integers(0, new_h - size + 1))
        x = int(rng.integers(0, new_w - size + 1))
        patches.append(LinearImage(resized.data[y:y + size, x:x + size]))
    return patches


def expand_with_patches(scenes, patcher) -> list[tuple[LinearImage, Illuminant, str]]:
    """Apply a patcher to every scene; patches inherit the parent ground truth."""
    out = []
    for image, gt, image_id in scenes:
        for k, patch in enumerate(patcher(image)):
            out.append((patch, gt, f"{image_id}#p{k:03d}"))
    return out
