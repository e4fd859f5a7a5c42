#!/usr/bin/env python3
"""Score CNN features + structured regression on the SFU benchmark sets.

Needs real data: point --data-dir (or ILLUMKIT_SFU_DIR) at a directory with

    color_checker/manifest.csv   color_checker/fc6.ilk
    indoor/manifest.csv          indoor/fc6.ilk

Feature files come from the sibling exporter package; manifests follow the
image_id,filename,r,g,b convention with linear 16-bit images.
"""

import argparse
import os
import sys
from pathlib import Path

from illumkit import (
    EstimatorSpec,
    EvalDataset,
    SplitPlan,
    format_table,
    load_manifest,
    run_protocol,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", default=os.environ.get("ILLUMKIT_SFU_DIR"))
    ap.add_argument("--sets", nargs="*", default=["color_checker", "indoor"])
    ap.add_argument("--models", nargs="*", default=["msvr", "mrr"])
    ap.add_argument("--repeats", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if not args.data_dir:
        print("no dataset: pass --data-dir or set ILLUMKIT_SFU_DIR", file=sys.stderr)
        return 1

    plan = SplitPlan(seed=args.seed, n_repeats=args.repeats)
    for subset in args.sets:
        base = Path(args.data_dir) / subset
        manifest, features = base / "manifest.csv", base / "fc6.ilk"
        if not manifest.exists() or not features.exists():
            print(f"skipping {subset}: needs {manifest} and {features}",
                  file=sys.stderr)
            continue
        dataset = EvalDataset.from_manifest(load_manifest(manifest, name=subset))
        reports = []
        for model in args.models:
            print(f"{subset}: evaluating {model} ...", file=sys.stderr)
            spec = EstimatorSpec(model, feature_source=f"file:{features}")
            reports.append(run_protocol(dataset, spec, plan))
        print(f"== {subset} ({len(dataset)} images) ==")
        print(format_table(reports), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
