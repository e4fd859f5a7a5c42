import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from illumkit import (
    AugmentationError,
    ConfigError,
    EstimatorSpec,
    EvalDataset,
    LinearImage,
    ManifestError,
    ProtocolError,
    SplitPlan,
    angular_error,
    augment_random_patches,
    augment_sliding_window,
    default_grids,
    evaluate_hyperparams,
    grid_search,
    gray_world,
    load_manifest,
    parse_estimator_spec,
    report_json,
    report_schema,
    run_protocol,
    save_dataset,
    split_counts,
    split_ids,
)
from illumkit.core import FeatureVector, LabeledSample, normalize_illuminant
from illumkit.evaluation import expand_with_patches, resolve_features


# ---------------------------------------------------------------------------
# splits

@settings(max_examples=100)
@given(st.integers(3, 400), st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3))
def test_split_counts_partition(n, raw):
    total = sum(raw)
    fractions = [f / total for f in raw]
    counts = split_counts(n, fractions)
    assert sum(counts) == n
    for count, frac in zip(counts, fractions):
        assert abs(count - n * frac) < 1.0 + 1e-9


def test_split_counts_exact_thirds():
    assert split_counts(300, (1 / 3, 1 / 3, 1 / 3)) == (100, 100, 100)
    assert split_counts(10, (1 / 3, 1 / 3, 1 / 3)) == (4, 3, 3)


def test_split_ids_is_disjoint_partition():
    ids = [f"x{i}" for i in range(17)]
    train, val, test = split_ids(ids, np.random.default_rng(0), (1 / 3, 1 / 3, 1 / 3))
    parts = [*train, *val, *test]
    assert sorted(parts) == sorted(ids)
    assert len(set(parts)) == len(ids)


def test_split_ids_deterministic():
    ids = [f"x{i}" for i in range(10)]
    a = split_ids(ids, np.random.default_rng(5), (0.5, 0.25, 0.25))
    b = split_ids(ids, np.random.default_rng(5), (0.5, 0.25, 0.25))
    assert a == b


def test_split_plan_validation():
    with pytest.raises(ProtocolError):
        SplitPlan(n_repeats=0)
    with pytest.raises(ProtocolError):
        SplitPlan(fractions=(0.5, 0.5, 0.5))
    with pytest.raises(ProtocolError):
        SplitPlan(fractions=(0.5, -0.1, 0.6))


# ---------------------------------------------------------------------------
# manifests

def write_manifest(tmp_path, rows, header="image_id,filename,r,g,b"):
    for _, filename, *_ in rows:
        (tmp_path / filename).write_bytes(b"x")
    path = tmp_path / "m.csv"
    lines = [header] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_manifest_round_trip(tmp_path):
    path = write_manifest(tmp_path, [("a", "a.png", 1, 2, 2), ("b", "b.png", 1, 1, 1)])
    manifest = load_manifest(path)
    assert manifest.name == "m"
    assert [e.image_id for e in manifest.entries] == ["a", "b"]
    assert np.allclose(manifest.entries[0].ground_truth.as_array(), [1 / 3, 2 / 3, 2 / 3])


def test_manifest_bad_header(tmp_path):
    path = write_manifest(tmp_path, [("a", "a.png", 1, 1, 1)], header="id,file,r,g,b")
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_manifest_duplicate_id(tmp_path):
    path = write_manifest(tmp_path, [("a", "a.png", 1, 1, 1), ("a", "b.png", 1, 1, 1)])
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_manifest_missing_file(tmp_path):
    path = write_manifest(tmp_path, [("a", "a.png", 1, 1, 1)])
    (tmp_path / "a.png").unlink()
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_manifest_bad_ground_truth(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(write_manifest(tmp_path, [("a", "a.png", "x", 1, 1)]))
    with pytest.raises(ManifestError):
        load_manifest(write_manifest(tmp_path, [("b", "a.png", 0, 0, 0)]))


def test_manifest_wrong_field_count(tmp_path):
    path = tmp_path / "m.csv"
    (tmp_path / "a.png").write_bytes(b"x")
    path.write_text("image_id,filename,r,g,b\na,a.png,1,1\n")
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_empty_manifest_file(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("")
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_save_dataset_round_trip(tmp_path, default_scenes):
    manifest_path = save_dataset(default_scenes[:5], tmp_path / "ds", name="rt")
    manifest = load_manifest(manifest_path)
    assert manifest.name == "rt"
    dataset = EvalDataset.from_manifest(manifest)
    assert len(dataset) == 5
    for img, gt, image_id in default_scenes[:5]:
        # ground truth is stored at full precision
        assert angular_error(dataset.ground_truth(image_id), gt) < 1e-12
        # pixels survive 16-bit quantization up to one step
        loaded = dataset.image(image_id)
        step = img.data.max() / 65535.0
        assert np.abs(loaded.data * img.data.max() - img.data).max() <= step / 2 + 1e-9


# ---------------------------------------------------------------------------
# estimator specs and feature sources

def test_parse_estimator_spec_forms():
    spec = parse_estimator_spec("shades_of_gray:p=4")
    assert spec.name == "shades_of_gray"
    assert spec.param_dict == {"p": 4.0}
    spec = parse_estimator_spec("msvr:kernel=linear,C=10", feature_source="builtin:hist")
    assert spec.kernel == "linear"
    assert spec.param_dict == {"C": 10.0}


def test_parse_estimator_spec_errors():
    with pytest.raises(ConfigError):
        parse_estimator_spec("nonsense")
    with pytest.raises(ConfigError):
        parse_estimator_spec("gray_world:pequals6")
    with pytest.raises(ConfigError):
        parse_estimator_spec("gray_world:p=six")
    with pytest.raises(ConfigError):
        EstimatorSpec("msvr")          # learning needs features
    with pytest.raises(ConfigError):
        EstimatorSpec("mrr", kernel="poly", feature_source="builtin:hist")


def test_resolve_features_builtin(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes[:4])
    features = resolve_features(ds, "builtin:hist:8")
    assert set(features) == set(ds.ids)
    assert all(f.dim == 64 for f in features.values())


def test_resolve_features_file_missing_ids(tmp_path, default_scenes):
    from illumkit import save_feature_file

    ds = EvalDataset.from_scenes(default_scenes[:4])
    features = resolve_features(ds, "builtin:hist:8")
    path = tmp_path / "partial.ilk"
    partial = [(i, features[i]) for i in ds.ids[:2]]
    save_feature_file(partial, "hist8", path)
    with pytest.raises(ManifestError):
        resolve_features(ds, f"file:{path}")


def test_resolve_features_unknown_scheme(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes[:4])
    with pytest.raises(ConfigError):
        resolve_features(ds, "magic:wand")


# ---------------------------------------------------------------------------
# grid search

def small_learning_problem(seed=0, n=18):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    w = rng.normal(size=(3, 3)) * 0.4
    Y = np.abs(X @ w) + 0.3
    samples = [LabeledSample(FeatureVector(x, "t"), normalize_illuminant(y), f"s{i}")
               for i, (x, y) in enumerate(zip(X, Y))]
    return samples[: 2 * n // 3], samples[2 * n // 3:]


def test_default_grid_sizes():
    msvr = default_grids("msvr", "rbf")
    assert len(msvr["C"]) == 9 and len(msvr["gamma"]) == 9 and len(msvr["epsilon"]) == 4
    assert len(msvr["C"]) * len(msvr["gamma"]) * len(msvr["epsilon"]) == 324
    mrr = default_grids("mrr", "rbf")
    assert list(mrr) == ["C"] and len(mrr["C"]) == 5
    svr_lin = default_grids("svr", "linear")
    assert "gamma" not in svr_lin


def test_grid_search_agrees_with_exhaustive_recheck():
    train, val = small_learning_problem()
    grids = {"C": (0.1, 1.0, 10.0), "gamma": (0.1, 1.0)}
    best = grid_search(train, val, "mrr", grids)
    table = {}
    for c in grids["C"]:
        for g in grids["gamma"]:
            table[(c, g)] = evaluate_hyperparams(train, val, "mrr",
                                                 {"C": c, "gamma": g})
    winner = min(table, key=lambda k: (table[k], k[0], k[1]))
    assert (best["C"], best["gamma"]) == winner


def test_grid_search_tie_break_prefers_small_c_small_gamma_large_eps():
    # identical targets: every grid point scores a perfect 0 median
    rng = np.random.default_rng(1)
    target = normalize_illuminant([1, 1, 1])
    samples = [LabeledSample(FeatureVector(rng.normal(size=3), "t"), target, f"s{i}")
               for i in range(12)]
    grids = {"C": (0.01, 1.0), "gamma": (0.1, 10.0), "epsilon": (0.01, 1.0)}
    best = grid_search(samples[:8], samples[8:], "msvr", grids)
    assert best == {"C": 0.01, "gamma": 0.1, "epsilon": 1.0}


def test_grid_search_empty_grid_rejected():
    train, val = small_learning_problem()
    with pytest.raises(ConfigError):
        grid_search(train, val, "mrr", {"C": ()})
    with pytest.raises(ProtocolError):
        grid_search([], val, "mrr", {"C": (1.0,)})


# ---------------------------------------------------------------------------
# protocol and reports

def test_statistics_report_matches_direct_evaluation(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes)
    plan = SplitPlan(seed=3, n_repeats=4)
    report = run_protocol(ds, EstimatorSpec("gray_world"), plan)
    for repeat in report.repeats:
        direct = [angular_error(gray_world(ds.image(i)), ds.ground_truth(i))
                  for i in repeat.test_ids]
        assert np.allclose(repeat.errors, direct, atol=1e-12)
        assert repeat.hyperparams is None


def test_report_json_deterministic(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes)
    plan = SplitPlan(seed=3, n_repeats=3)
    a = report_json(run_protocol(ds, EstimatorSpec("gray_world"), plan))
    b = report_json(run_protocol(ds, EstimatorSpec("gray_world"), plan))
    assert a == b


def test_report_aggregates_recompute(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes)
    plan = SplitPlan(seed=3, n_repeats=4)
    report = run_protocol(ds, EstimatorSpec("dn"), plan, include_pooled=True)
    for key, fn in (("min", np.min), ("median", np.median),
                    ("mean", np.mean), ("max", np.max)):
        per_repeat = [float(fn(r.errors)) for r in report.repeats]
        assert report.aggregate[key] == pytest.approx(np.mean(per_repeat), abs=1e-9)
    pooled_errors = [e for r in report.repeats for e in r.errors]
    assert report.pooled["median"] == pytest.approx(np.median(pooled_errors), abs=1e-9)


def test_report_validates_against_schema(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes)
    plan = SplitPlan(seed=3, n_repeats=2)
    report = run_protocol(ds, EstimatorSpec("dn"), plan)
    doc = {"schema_version": 1, "reports": [report.to_json_dict()]}
    jsonschema.validate(doc, report_schema())


def test_learning_report_validates_against_schema(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes)
    plan = SplitPlan(seed=3, n_repeats=2)
    spec = parse_estimator_spec("mrr:C=1,gamma=0.1", feature_source="builtin:hist:8")
    report = run_protocol(ds, spec, plan)
    doc = {"schema_version": 1, "reports": [report.to_json_dict()]}
    jsonschema.validate(doc, report_schema())
    assert all(r.hyperparams == {"C": 1.0, "gamma": 0.1} for r in report.repeats)


def test_fixed_hyperparams_skip_grid_search(default_scenes):
    # fixed hyperparameters disable the search: every repeat reuses them as-is
    ds = EvalDataset.from_scenes(default_scenes)
    plan = SplitPlan(seed=0, n_repeats=2)
    spec = parse_estimator_spec("rr:C=0.5,gamma=0.2", feature_source="builtin:hist:8")
    report = run_protocol(ds, spec, plan)
    assert report.repeats[0].hyperparams == {"C": 0.5, "gamma": 0.2}


def test_protocol_needs_three_samples(default_scenes):
    ds = EvalDataset.from_scenes(default_scenes[:2])
    with pytest.raises(ProtocolError):
        run_protocol(ds, EstimatorSpec("dn"), SplitPlan(n_repeats=1))


def test_dataset_rejects_duplicate_ids():
    gt = normalize_illuminant([1, 1, 1])
    with pytest.raises(ManifestError):
        EvalDataset([("a", gt), ("a", gt)])


# ---------------------------------------------------------------------------
# augmentation

def constant_image(h, w, value=0.5):
    return LinearImage(np.full((h, w, 3), value))


def test_sliding_window_exact_tiling():
    patches = augment_sliding_window(constant_image(448, 448), size=224, stride=224)
    assert len(patches) == 4
    assert all(p.data.shape == (224, 224, 3) for p in patches)


def test_sliding_window_adds_flush_window():
    patches = augment_sliding_window(constant_image(450, 448), size=224, stride=224)
    # 3 row positions (0, 224, 226) x 2 column positions
    assert len(patches) == 6


def test_sliding_window_window_too_large():
    with pytest.raises(AugmentationError):
        augment_sliding_window(constant_image(100, 100), size=224)


def test_random_patches_deterministic():
    img = constant_image(300, 400)
    a = augment_random_patches(img, 5, seed=3)
    b = augment_random_patches(img, 5, seed=3)
    assert len(a) == 5
    assert all(x.data.shape == (224, 224, 3) for x in a)
    for pa, pb in zip(a, b):
        assert pa.data.tobytes() == pb.data.tobytes()


def test_random_patches_rejects_thin_images():
    # 10x2000 rescales to 5x1000: no room for a 224 window
    with pytest.raises(AugmentationError):
        augment_random_patches(constant_image(10, 2000), 3)


def test_random_patches_needs_positive_count():
    with pytest.raises(AugmentationError):
        augment_random_patches(constant_image(300, 300), 0)


def test_expand_with_patches_ids_and_targets(default_scenes):
    scenes = default_scenes[:2]
    out = expand_with_patches(
        scenes, lambda img: augment_sliding_window(img, size=16, stride=16))
    per_scene = len(out) // len(scenes)
    assert out[0][2] == f"{scenes[0][2]}#p000"
    assert all(gt is scenes[0][1] for _, gt, _ in out[:per_scene])
