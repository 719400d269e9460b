"""Command-line surface tying the modules into container pipelines.

Subcommands: select, itr, stylize, isr, fuse, eval, synth, experiment.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error. All outputs
are byte-deterministic for fixed seeds and configs, independent of --jobs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .catalog import ClassCatalog, default_catalog
from .config import PipelineConfig, load_config
from .containers import read_container, write_container
from .errors import ContainerIOError, CrossviewError, ValidationError
from .evaluation import (
    accumulate_matches,
    evaluate_dataset,
    format_report_table,
    match_segments,
)
from .fusion import fuse_panoptic
from .interstyle import match_histograms, pick_reference, unify_instances, unify_semantic
from .intertask import regularize_instances, regularize_semantic
from .selection import (
    compute_class_balanced_weights,
    compute_instance_weights,
    select_instances,
    select_semantic,
)
from .synth import (
    SceneSpec,
    derive_scene_specs,
    generate_scene,
    run_ablation_experiment,
    simulate_instance_predictor,
    simulate_semantic_predictor,
    stylized_reference,
)


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 with usage instead of argparse's exit 2
        raise _UsageError(self, message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="crossview", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON file with per-module config sections")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=out_required)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("select", help="class-balanced pseudo-label selection")
    p.add_argument("--in", dest="input", required=True)
    common(p)

    p = sub.add_parser("itr", help="inter-task pseudo-label regularization")
    p.add_argument("--in", dest="input", required=True)
    common(p)

    p = sub.add_parser("stylize", help="histogram-matching stylization")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--ref", help="explicit reference container")
    p.add_argument("--ref-pool", help="directory of containers to pick from by seed")
    common(p)

    p = sub.add_parser("isr", help="inter-style pseudo-label unification")
    p.add_argument("--view1", required=True)
    p.add_argument("--view2", required=True)
    common(p)

    p = sub.add_parser("fuse", help="heuristic panoptic fusion")
    p.add_argument("--in", dest="input", required=True)
    common(p)

    p = sub.add_parser("eval", help="PQ/SQ/RQ report for pred/gt containers")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    common(p)

    p = sub.add_parser("synth", help="generate synthetic scenes with predictions")
    p.add_argument("--scenes", type=int, default=1)
    common(p)

    p = sub.add_parser("experiment", help="run the regularization ablation")
    p.add_argument("--scenes", type=int, default=100)
    common(p)

    return parser


def _run_info(args, cfg: PipelineConfig, extra: dict | None = None) -> dict:
    info = {
        "command": args.command,
        "seed": args.seed,
        "config": cfg.to_dict(),
    }
    if extra:
        info.update(extra)
    return info


def _read(path: str):
    return read_container(path)


def _require(payloads: dict, role: str, path: str):
    if role not in payloads:
        raise ValidationError(f"container {path} has no {role!r} payload")
    return payloads[role]


def _fit_weights(payloads: dict, cfg: PipelineConfig, catalog: ClassCatalog):
    """Fit class-balanced weights from whatever the container provides."""
    w_sem = w_inst = None
    if "semantic_probs" in payloads:
        w_sem = compute_class_balanced_weights(
            [payloads["semantic_probs"]], cfg.selection, catalog
        )
    if "instance_set" in payloads:
        w_inst = compute_instance_weights(
            [payloads["instance_set"]], cfg.instance_selection, catalog
        )
    return w_sem, w_inst


def _cmd_select(args, cfg: PipelineConfig) -> int:
    payloads, catalog, _ = _read(args.input)
    w_sem, w_inst = _fit_weights(payloads, cfg, catalog)
    if w_sem is None and w_inst is None:
        raise ValidationError(
            f"container {args.input} has neither semantic_probs nor instance_set"
        )
    out = {}
    weights_info = {}
    if w_sem is not None:
        out["semantic_labels"] = select_semantic(
            payloads["semantic_probs"], w_sem, catalog.void_id
        )
        weights_info["semantic_weights"] = w_sem.to_dict()
    if w_inst is not None:
        out["instance_set"] = select_instances(
            payloads["instance_set"], w_inst, catalog
        )
        weights_info["instance_weights"] = w_inst.to_dict()
    write_container(out, args.out, catalog, _run_info(args, cfg, weights_info))
    return 0


def _cmd_itr(args, cfg: PipelineConfig) -> int:
    payloads, catalog, _ = _read(args.input)
    probs = _require(payloads, "semantic_probs", args.input)
    instances = _require(payloads, "instance_set", args.input)
    w_sem, w_inst = _fit_weights(payloads, cfg, catalog)
    sem_pl = select_semantic(probs, w_sem, catalog.void_id)
    inst_pl = select_instances(instances, w_inst, catalog)
    out = {
        "instance_set": regularize_instances(instances, probs, sem_pl, inst_pl, cfg.itr),
        "semantic_labels": regularize_semantic(probs, sem_pl, inst_pl, cfg.itr),
    }
    info = {
        "semantic_weights": w_sem.to_dict(),
        "instance_weights": w_inst.to_dict(),
    }
    write_container(out, args.out, catalog, _run_info(args, cfg, info))
    return 0


def _cmd_stylize(args, cfg: PipelineConfig) -> int:
    payloads, catalog, _ = _read(args.input)
    image = _require(payloads, "image", args.input)
    if (args.ref is None) == (args.ref_pool is None):
        raise ValidationError("stylize needs exactly one of --ref or --ref-pool")
    if args.ref is not None:
        ref_payloads, _, _ = _read(args.ref)
        ref_image = _require(ref_payloads, "image", args.ref)
    else:
        pool = sorted(p for p in Path(args.ref_pool).iterdir() if (p / "manifest.json").is_file())
        if not pool:
            raise ValidationError(f"--ref-pool {args.ref_pool} holds no containers")
        idx = pick_reference(pool, args.seed)
        ref_payloads, _, _ = _read(pool[idx])
        ref_image = _require(ref_payloads, "image", str(pool[idx]))
    out = {"image": match_histograms(image, ref_image)}
    # content-addressed provenance keeps re-runs byte-identical regardless of
    # where the reference container lives
    ref_digest = hashlib.sha256(ref_image.samples.tobytes()).hexdigest()
    write_container(
        out, args.out, catalog, _run_info(args, cfg, {"reference_sha256": ref_digest})
    )
    return 0


def _cmd_isr(args, cfg: PipelineConfig) -> int:
    payloads1, catalog, _ = _read(args.view1)
    payloads2, catalog2, _ = _read(args.view2)
    if catalog.to_dict() != catalog2.to_dict():
        raise ValidationError("view containers disagree on the catalog")
    probs1 = _require(payloads1, "semantic_probs", args.view1)
    probs2 = _require(payloads2, "semantic_probs", args.view2)
    inst1 = _require(payloads1, "instance_set", args.view1)
    inst2 = _require(payloads2, "instance_set", args.view2)
    w_sem, w_inst = _fit_weights(payloads1, cfg, catalog)
    out = {
        "semantic_labels": unify_semantic(probs1, probs2, w_sem, catalog.void_id),
        "instance_set": unify_instances(inst1, inst2, w_inst, cfg.isr, catalog),
    }
    info = {
        "semantic_weights": w_sem.to_dict(),
        "instance_weights": w_inst.to_dict(),
    }
    write_container(out, args.out, catalog, _run_info(args, cfg, info))
    return 0


def _cmd_fuse(args, cfg: PipelineConfig) -> int:
    payloads, catalog, _ = _read(args.input)
    instances = _require(payloads, "instance_set", args.input)
    labels = _require(payloads, "semantic_labels", args.input)
    out = {"panoptic": fuse_panoptic(instances, labels, cfg.fusion, catalog)}
    write_container(out, args.out, catalog, _run_info(args, cfg))
    return 0


def _container_pairs(pred_root: str, gt_root: str) -> list[tuple[Path, Path]]:
    pred_root, gt_root = Path(pred_root), Path(gt_root)
    if (pred_root / "manifest.json").is_file():
        return [(pred_root, gt_root)]
    pred_dirs = sorted(
        p for p in pred_root.iterdir() if (p / "manifest.json").is_file()
    )
    if not pred_dirs:
        raise ContainerIOError(f"{pred_root} holds no containers")
    pairs = []
    for p in pred_dirs:
        g = gt_root / p.name
        if not (g / "manifest.json").is_file():
            raise ContainerIOError(f"no ground-truth container for {p.name} in {gt_root}")
        pairs.append((p, g))
    return pairs


def _cmd_eval(args, cfg: PipelineConfig) -> int:
    pairs = _container_pairs(args.pred, args.gt)

    def one(pair):
        pred_payloads, catalog, _ = _read(pair[0])
        gt_payloads, gt_catalog, _ = _read(pair[1])
        if catalog.to_dict() != gt_catalog.to_dict():
            raise ValidationError(f"catalog mismatch between {pair[0]} and {pair[1]}")
        pred = _require(pred_payloads, "panoptic", str(pair[0]))
        gt = _require(gt_payloads, "panoptic", str(pair[1]))
        return catalog, accumulate_matches(match_segments(pred, gt, catalog))

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    catalog = results[0][0]
    for other, _ in results[1:]:
        if other.to_dict() != catalog.to_dict():
            raise ValidationError("containers disagree on the catalog across pairs")
    report = evaluate_dataset([], catalog, stats_list=[r[1] for r in results])

    doc = report.to_dict(catalog)
    doc["run"] = _run_info(args, cfg, {"pairs": len(pairs)})
    _write_json(args.out, doc)
    if not args.quiet:
        print(format_report_table(report, catalog))
    return 0


def _scene_payloads(specs, index, catalog):
    spec = specs[index]
    gt, image = generate_scene(spec, catalog)
    styled = match_histograms(image, stylized_reference(specs, index, catalog))
    return {
        "gt": {"panoptic": gt, "image": image},
        "view1": {
            "image": image,
            "semantic_probs": simulate_semantic_predictor(gt, spec, catalog, view=0),
            "instance_set": simulate_instance_predictor(gt, spec, catalog, view=0),
        },
        "view2": {
            "image": styled,
            "semantic_probs": simulate_semantic_predictor(gt, spec, catalog, view=1),
            "instance_set": simulate_instance_predictor(gt, spec, catalog, view=1),
        },
    }


def _cmd_synth(args, cfg: PipelineConfig) -> int:
    catalog = default_catalog()
    specs = derive_scene_specs(cfg.synth, args.seed, args.scenes)
    out_root = Path(args.out)

    def one(index: int):
        groups = _scene_payloads(specs, index, catalog)
        scene_dir = out_root / f"scene_{index:04d}"
        for name, payloads in groups.items():
            info = _run_info(args, cfg, {"scene": index, "group": name})
            write_container(payloads, scene_dir / name, catalog, info)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(one, range(args.scenes)))
    else:
        for i in range(args.scenes):
            one(i)
    if not args.quiet:
        print(f"wrote {args.scenes} scene(s) under {out_root}")
    return 0


def _cmd_experiment(args, cfg: PipelineConfig) -> int:
    catalog = default_catalog()
    specs = derive_scene_specs(cfg.synth, args.seed, args.scenes)
    result = run_ablation_experiment(specs, cfg.experiment, catalog, jobs=args.jobs)
    doc = result.to_dict()
    doc["run"] = _run_info(args, cfg, {"scenes": args.scenes})
    _write_json(args.out, doc)
    if not args.quiet:
        print(result.format_table())
    return 0


def _write_json(path: str, doc: dict):
    data = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    out = Path(path)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text(data, "utf-8")
    tmp.replace(out)


_COMMANDS = {
    "select": _cmd_select,
    "itr": _cmd_itr,
    "stylize": _cmd_stylize,
    "isr": _cmd_isr,
    "fuse": _cmd_fuse,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "experiment": _cmd_experiment,
}


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        if args.jobs < 1:
            raise ValidationError("--jobs must be at least 1")
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ContainerIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CrossviewError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    try:
        return cli_dispatch(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # argparse --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
