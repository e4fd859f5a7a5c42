"""Command-line front end: extract / train / estimate / correct / evaluate / synth.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every option can also be supplied through ``--config FILE`` holding
``key = value`` lines (names match the long flags, hyphens optional);
command-line flags override the file. All randomness derives from ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, IllumkitError, InputError, UsageError, normalize_illuminant
from .correction import correct_image
from .evaluation import (
    LEARNING_ESTIMATORS,
    EvalDataset,
    ProtocolError,
    SplitPlan,
    _grid_search_detailed,
    _statistic_estimate,
    format_table,
    load_manifest,
    parse_estimator_spec,
    resolve_features,
    run_protocol,
    save_dataset,
    train_estimator,
)
from .features import extract_histogram_features
from .imgio import load_image, save_corrected
from .regression import LabeledSample, SolverConfig, load_model, predict, save_model
from . import synth


@dataclass(frozen=True)
class Flag:
    name: str
    type: type = str
    default: object = None
    help: str = ""
    choices: tuple | None = None
    multi: bool = False
    is_flag: bool = False


_COMMON = [Flag("config", str, None, "key=value option file; flags override it"),
           Flag("seed", int, 0, "root seed for every random choice")]

_FLAGS = {
    "extract": _COMMON + [
        Flag("features", str, "builtin:hist", "extractor, builtin:hist[:<bins>]"),
    ],
    "train": _COMMON + [
        Flag("features", str, None, "builtin:hist[:<bins>] or file:<path>"),
        Flag("model", str, None, "estimator kind", choices=("rr", "svr", "mrr", "msvr")),
        Flag("kernel", str, "rbf", "kernel kind", choices=("linear", "rbf")),
        Flag("c", float, None, "fix C instead of grid searching"),
        Flag("gamma", float, None, "fix the RBF width"),
        Flag("epsilon", float, None, "fix the tube radius"),
        Flag("grid_c", str, None, "comma list of C values to search"),
        Flag("grid_gamma", str, None, "comma list of gamma values to search"),
        Flag("grid_epsilon", str, None, "comma list of epsilon values to search"),
        Flag("val_fraction", float, 1 / 3, "held-out share for the internal search split"),
    ],
    "estimate": _COMMON + [
        Flag("image", str, None, "single image input"),
        Flag("manifest", str, None, "manifest CSV input"),
        Flag("estimator", str, None, "statistics estimator, e.g. shades_of_gray:p=4"),
        Flag("model", str, None, "trained model file"),
        Flag("features", str, None, "feature source for --model"),
        Flag("json", is_flag=True, default=False, help="emit JSON instead of plain lines"),
    ],
    "correct": _COMMON + [
        Flag("estimator", str, None, "statistics estimator used to find the light"),
        Flag("illuminant", str, None, "explicit illuminant as r,g,b"),
        Flag("model", str, None, "trained model file"),
        Flag("features", str, "builtin:hist", "feature source for --model"),
    ],
    "evaluate": _COMMON + [
        Flag("estimator", str, None, "estimator spec; repeatable", multi=True),
        Flag("features", str, None, "feature source for learning estimators"),
        Flag("repeats", int, 30, "number of random splits"),
        Flag("fractions", str, None, "train,val,test fractions, e.g. 0.4,0.3,0.3"),
        Flag("out", str, None, "write the JSON report here"),
        Flag("pooled", is_flag=True, default=False, help="add pooled per-image statistics"),
        Flag("grid_c", str, None, "comma list of C values to search"),
        Flag("grid_gamma", str, None, "comma list of gamma values to search"),
        Flag("grid_epsilon", str, None, "comma list of epsilon values to search"),
    ],
    "synth": _COMMON + [
        Flag("scenes", int, 60, "number of rendered scenes"),
        Flag("name", str, "synthetic", "dataset name recorded in the manifest"),
        Flag("grid", str, "4,4", "patch grid as rows,cols"),
        Flag("patch_size", int, 16, "patch side length in pixels"),
        Flag("bank_size", int, 40, "number of reflectances in the bank"),
        Flag("temp_range", str, "2500,9500", "blackbody range in kelvin as lo,hi"),
        Flag("sensors", str, "gaussian", "sensor model", choices=("gaussian", "narrowband")),
        Flag("bank", str, "random", "reflectance bank", choices=("random", "complementary")),
        Flag("layout", str, "random", "patch layout", choices=("random", "balanced")),
    ],
}

_POSITIONALS = {
    "extract": [("manifest", "manifest CSV"), ("out", "output FeatureFile")],
    "train": [("manifest", "manifest CSV"), ("out", "output model file")],
    "estimate": [],
    "correct": [("image", "input image"), ("out", "output PNG")],
    "evaluate": [("manifest", "manifest CSV")],
    "synth": [("out", "output directory")],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="illumkit",
                                     description="illuminant estimation and correction")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "extract": "compute feature vectors for every manifest image",
        "train": "fit a regression estimator, optionally grid searched",
        "estimate": "print the illuminant of an image or manifest",
        "correct": "white balance an image and write a 16-bit PNG",
        "evaluate": "run the repeated-splits protocol and print a table",
        "synth": "render a synthetic dataset with known ground truth",
    }
    for command, flags in _FLAGS.items():
        p = sub.add_parser(command, help=helps[command])
        for name, help_text in _POSITIONALS[command]:
            p.add_argument(f"cmd_{name}", metavar=name.upper(), help=help_text)
        for flag in flags:
            option = "--" + flag.name.replace("_", "-")
            if flag.is_flag:
                p.add_argument(option, action="store_true", default=argparse.SUPPRESS,
                               help=flag.help)
            elif flag.multi:
                p.add_argument(option, action="append", default=argparse.SUPPRESS,
                               help=flag.help)
            else:
                p.add_argument(option, type=flag.type, default=argparse.SUPPRESS,
                               choices=flag.choices, help=flag.help)
        p.set_defaults(command=command)
    return parser


def _load_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        values[key.strip().replace("-", "_")] = value.strip().strip('"')
    return values


def _coerce(flag: Flag, text: str):
    if flag.is_flag:
        return text.lower() in ("1", "true", "yes", "on")
    if flag.multi:
        return [part.strip() for part in text.split(";") if part.strip()]
    try:
        return flag.type(text)
    except ValueError as exc:
        raise UsageError(f"bad value for {flag.name!r}: {text!r}") from exc


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge command line over config file over defaults into one dict."""
    flags = _FLAGS[args.command]
    ns = vars(args)
    config = {}
    if ns.get("config"):
        config = _load_config_file(ns["config"])
        unknown = set(config) - {f.name for f in flags}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for flag in flags:
        if flag.name in ns:
            out[flag.name] = ns[flag.name]
        elif flag.name in config:
            value = _coerce(flag, config[flag.name])
            if flag.choices and value not in flag.choices:
                raise UsageError(f"config {flag.name!r} must be one of {flag.choices}")
            out[flag.name] = value
        else:
            out[flag.name] = flag.default
    for name, _ in _POSITIONALS[args.command]:
        out[name] = ns[f"cmd_{name}"]
    return out


def _parse_float_list(text: str, label: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad {label} {text!r}: expected comma-separated numbers") from exc


def _grid_overrides(opts) -> dict | None:
    grids = {}
    for key, axis in (("grid_c", "C"), ("grid_gamma", "gamma"), ("grid_epsilon", "epsilon")):
        if opts.get(key):
            grids[axis] = _parse_float_list(opts[key], key)
    return grids or None


def _require(opts, key, why):
    if not opts.get(key):
        raise UsageError(f"--{key.replace('_', '-')} is required {why}")
    return opts[key]


# ---------------------------------------------------------------------------
# commands

def cmd_extract(opts) -> int:
    from .features import save_feature_file

    manifest = load_manifest(opts["manifest"])
    if not manifest.entries:
        raise InputError(f"{opts['manifest']}: empty manifest, nothing to extract")
    source = opts["features"]
    if not source.startswith("builtin:hist"):
        raise UsageError(f"extract supports builtin:hist[:<bins>], got {source!r}")
    dataset = EvalDataset.from_manifest(manifest)
    failures = []
    records = []
    tag = None
    for image_id in dataset.ids:
        try:
            fv = resolve_single_feature(dataset, image_id, source)
        except (IllumkitError, OSError) as exc:
            failures.append((image_id, str(exc)))
            continue
        tag = fv.source_tag
        records.append((image_id, fv))
    if failures:
        for image_id, message in failures:
            print(f"error: {image_id}: {message}", file=sys.stderr)
        raise InputError(f"{len(failures)} of {len(dataset.ids)} images failed")
    save_feature_file(records, tag, opts["out"])
    print(f"wrote {len(records)} feature vectors to {opts['out']}")
    return 0


def resolve_single_feature(dataset, image_id, source):
    bins = None
    suffix = source[len("builtin:hist"):]
    if suffix:
        bins = int(suffix[1:])
    image = dataset.image(image_id)
    return extract_histogram_features(image) if bins is None \
        else extract_histogram_features(image, bins)


def cmd_train(opts) -> int:
    manifest = load_manifest(opts["manifest"])
    dataset = EvalDataset.from_manifest(manifest)
    kind = _require(opts, "model", "to pick the estimator kind")
    source = _require(opts, "features", "to build training inputs")
    features = resolve_features(dataset, source)
    samples = [LabeledSample(features[i], dataset.ground_truth(i), i) for i in dataset.ids]

    fixed = {}
    for key, name in (("c", "C"), ("gamma", "gamma"), ("epsilon", "epsilon")):
        if opts.get(key) is not None:
            fixed[name] = opts[key]
    if "C" in fixed:
        params = fixed
    else:
        # No fixed C: grid search on an internal split, then refit on everything.
        val_fraction = opts["val_fraction"]
        if not 0 < val_fraction < 1:
            raise UsageError(f"--val-fraction must be in (0, 1), got {val_fraction}")
        rng = np.random.default_rng(np.random.SeedSequence(opts["seed"]))
        perm = rng.permutation(len(samples))
        n_val = min(len(samples) - 2, max(1, round(len(samples) * val_fraction)))
        if n_val < 1:
            raise InputError(f"{len(samples)} samples are too few for an internal split")
        val_set = [samples[i] for i in perm[:n_val]]
        fit_set = [samples[i] for i in perm[n_val:]]
        params, _ = _grid_search_detailed(fit_set, val_set, kind,
                                          _grid_overrides(opts), opts["kernel"],
                                          SolverConfig())
        params.update({k: v for k, v in fixed.items() if k not in params})
        print(f"grid search chose {params}")
    model = train_estimator(kind, samples, params, opts["kernel"], SolverConfig())
    save_model(model, opts["out"])
    print(f"wrote {kind} model ({model.n_support} samples, d={model.dim}) to {opts['out']}")
    return 0


def _format_illuminant(ill) -> str:
    r, g, b = ill.as_array()
    return f"{r:.4f} {g:.4f} {b:.4f}"


def _estimate_many(opts, dataset):
    """Yield (image_id, Illuminant) for either estimator kind."""
    if opts.get("model"):
        model = load_model(opts["model"])
        source = _require(opts, "features", "when estimating with --model")
        features = resolve_features(dataset, source)
        for image_id in dataset.ids:
            yield image_id, predict(model, features[image_id])
    else:
        raw = _require(opts, "estimator", "or use --model")
        if raw.split(":", 1)[0] in LEARNING_ESTIMATORS:
            raise UsageError(f"{raw.split(':', 1)[0]!r} needs --model; train it first")
        spec = parse_estimator_spec(raw)
        for image_id in dataset.ids:
            yield image_id, _statistic_estimate(spec, dataset.image(image_id))


def cmd_estimate(opts) -> int:
    if bool(opts.get("image")) == bool(opts.get("manifest")):
        raise UsageError("exactly one of --image or --manifest is required")
    if opts.get("image"):
        dataset = EvalDataset.from_images({"image": load_image(opts["image"])},
                                          name="single")
        single = True
    else:
        dataset = EvalDataset.from_manifest(load_manifest(opts["manifest"]))
        single = False
    results = list(_estimate_many(opts, dataset))
    if opts["json"]:
        payload = [{"image_id": i, "illuminant": [float(v) for v in ill.as_array()]}
                   for i, ill in results]
        print(json.dumps(payload if not single else payload[0], indent=2, sort_keys=True))
    else:
        for image_id, ill in results:
            line = _format_illuminant(ill)
            print(line if single else f"{image_id} {line}")
    return 0


def cmd_correct(opts) -> int:
    image = load_image(opts["image"])
    if opts.get("illuminant"):
        values = _parse_float_list(opts["illuminant"], "illuminant")
        if len(values) != 3:
            raise UsageError(f"--illuminant needs 3 components, got {len(values)}")
        ill = normalize_illuminant(values)
        origin = "explicit"
    elif opts.get("model"):
        model = load_model(opts["model"])
        source = opts["features"]
        if not source.startswith("builtin:"):
            raise UsageError("correct with --model supports builtin feature sources only")
        dataset = EvalDataset.from_images({"image": image}, name="single")
        ill = predict(model, resolve_features(dataset, source)["image"])
        origin = f"model:{os.path.basename(opts['model'])}"
    else:
        raw = _require(opts, "estimator", "or pass --illuminant / --model")
        if raw.split(":", 1)[0] in LEARNING_ESTIMATORS:
            raise UsageError(f"{raw.split(':', 1)[0]!r} needs --model; train it first")
        spec = parse_estimator_spec(raw)
        ill = _statistic_estimate(spec, image)
        origin = spec.name
    corrected = correct_image(image, ill)
    out = opts["out"]
    parent = os.path.dirname(os.path.abspath(out))
    os.makedirs(parent, exist_ok=True)
    save_corrected(out, corrected, {
        "illuminant": [float(v) for v in ill.as_array()],
        "estimator": origin,
    })
    print(f"wrote {out} (+ sidecar), illuminant {_format_illuminant(ill)}")
    return 0


def cmd_evaluate(opts) -> int:
    manifest = load_manifest(opts["manifest"])
    dataset = EvalDataset.from_manifest(manifest)
    names = opts.get("estimator") or []
    if not names:
        raise UsageError("at least one --estimator is required")
    fractions = (1 / 3, 1 / 3, 1 / 3)
    if opts.get("fractions"):
        fractions = _parse_float_list(opts["fractions"], "fractions")
    try:
        plan = SplitPlan(seed=opts["seed"], n_repeats=opts["repeats"], fractions=fractions)
    except ProtocolError as exc:
        # Flag-derived misconfiguration, not a runtime failure.
        raise UsageError(str(exc)) from exc
    grids = _grid_overrides(opts)
    reports = []
    for name in names:
        spec = parse_estimator_spec(name, feature_source=opts.get("features"))
        reports.append(run_protocol(dataset, spec, plan, grids=grids,
                                    include_pooled=opts["pooled"]))
    print(format_table(reports), end="")
    if opts.get("out"):
        payload = {"schema_version": 1,
                   "reports": [r.to_json_dict() for r in reports]}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        parent = os.path.dirname(os.path.abspath(opts["out"]))
        os.makedirs(parent, exist_ok=True)
        from ._binio import atomic_write_bytes
        atomic_write_bytes(opts["out"], text.encode("utf-8"))
        print(f"wrote {opts['out']}")
    return 0


def cmd_synth(opts) -> int:
    grid = _parse_float_list(opts["grid"], "grid")
    temp = _parse_float_list(opts["temp_range"], "temp-range")
    if len(grid) != 2 or len(temp) != 2:
        raise UsageError("--grid and --temp-range each need exactly 2 values")
    wavelengths = synth.default_wavelengths()
    sensors = synth.narrowband_sensors(wavelengths) if opts["sensors"] == "narrowband" \
        else synth.gaussian_sensors(wavelengths)
    bank = None
    if opts["bank"] == "complementary":
        bank_rng = np.random.default_rng(np.random.SeedSequence(opts["seed"]))
        bank = synth.complementary_reflectance_bank(max(1, opts["bank_size"] // 2),
                                                    wavelengths, bank_rng)
    family = synth.SceneFamily(wavelengths_nm=wavelengths, sensor_responses=sensors,
                               reflectance_bank=bank,
                               temp_range_k=(temp[0], temp[1]),
                               grid_shape=(int(grid[0]), int(grid[1])),
                               patch_size=opts["patch_size"], bank_size=opts["bank_size"],
                               layout=opts["layout"])
    scenes = synth.render_dataset(family, opts["scenes"], rng_seed=opts["seed"])
    manifest_path = save_dataset(scenes, opts["out"], name=opts["name"])
    print(f"wrote {len(scenes)} scenes, manifest {manifest_path}")
    return 0


_COMMANDS = {"extract": cmd_extract, "train": cmd_train, "estimate": cmd_estimate,
             "correct": cmd_correct, "evaluate": cmd_evaluate, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        return _COMMANDS[args.command](opts)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IllumkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
