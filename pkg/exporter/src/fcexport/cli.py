"""Command line wrapper: fcexport MANIFEST OUT [--network ...] [--layer ...]."""

import argparse
import sys

from .export import ExportJob, export_features
from .files import ExportError
from .networks import LAYERS


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="fcexport",
        description="export CNN fully-connected layer activations as a FeatureFile")
    ap.add_argument("manifest", help="manifest CSV (image_id,filename,r,g,b)")
    ap.add_argument("out", help="output FeatureFile path")
    ap.add_argument("--network", default="vgg19", choices=sorted(LAYERS))
    ap.add_argument("--layer", default="fc6", choices=("fc6", "fc7", "fc8"))
    ap.add_argument("--batch-size", type=int, default=8)
    args = ap.parse_args(argv)

    try:
        job = ExportJob(manifest=args.manifest, network=args.network,
                        layer=args.layer, out=args.out, batch_size=args.batch_size)
        count = export_features(job)
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} x {args.layer} vectors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
