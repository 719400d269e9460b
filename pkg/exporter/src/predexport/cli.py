"""Command-line mirror of the export call.

Reads an .npz archive holding 'semantic_probs' (C, H, W) and/or
'instance_masks' (N, H, W) with 'instance_categories' (N,) and
'instance_scores' (N,) (optionally 'instance_class_dists' (N, K)), plus a
catalog JSON file, and writes a prediction container.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .export import CatalogSpec, ExportError, ExportRequest, InstanceRecord, export_predictions


def build_request(arrays_path: str, catalog_path: str, out_path: str) -> ExportRequest:
    catalog = CatalogSpec.from_dict(json.loads(Path(catalog_path).read_text("utf-8")))
    with np.load(arrays_path) as arrays:
        probs = arrays["semantic_probs"] if "semantic_probs" in arrays else None
        instances = None
        if "instance_masks" in arrays:
            masks = arrays["instance_masks"]
            cats = arrays["instance_categories"]
            scores = arrays["instance_scores"]
            dists = arrays.get("instance_class_dists")
            instances = [
                InstanceRecord(
                    int(cats[i]),
                    float(scores[i]),
                    masks[i],
                    dists[i] if dists is not None else None,
                )
                for i in range(masks.shape[0])
            ]
    return ExportRequest(catalog, out_path, probs, instances)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="predexport", description=__doc__)
    parser.add_argument("--arrays", required=True, help=".npz with prediction arrays")
    parser.add_argument("--catalog", required=True, help="catalog JSON file")
    parser.add_argument("--out", required=True, help="output container directory")
    args = parser.parse_args(argv)
    try:
        out = export_predictions(build_request(args.arrays, args.catalog, args.out))
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
