"""Seeded synthetic panoptic scenes and complementary noisy predictors.

Scenes are horizontal stuff bands with non-overlapping rectangular or
elliptic things painted on top, rendered with distinct per-segment colors.
The two simulated predictors realize the complementarity this package
exploits: the semantic branch is accurate on stuff and weak on things, the
instance branch detects things with jittered masks, misses some, and adds
spurious boxes. Everything is a pure function of (spec, seed): per-scene and
per-view RNG streams are spawned from the scene seed with fixed spawn keys,
so parallel and serial runs produce identical bytes.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .catalog import ClassCatalog
from .errors import GenerationError, ValidationError
from .entropy import semantic_entropy_map
from .evaluation import (
    CategoryStats,
    PQReport,
    accumulate_matches,
    match_segments,
    mean_pq_over,
    merge_stats,
    report_from_stats,
)
from .fusion import FusionConfig, fuse_panoptic
from .instances import Instance, InstanceSet
from .interstyle import (
    IsrConfig,
    match_histograms,
    unify_instance_sets,
    unify_instances,
    unify_label_maps,
    unify_semantic,
)
from .intertask import ItrConfig, regularize_instances, regularize_semantic
from .maps import PanopticMap, RgbImage, SemanticLabelMap, SemanticProbMap
from .rle import rle_encode
from .selection import (
    SelectionPolicy,
    category_confidences,
    compute_instance_weights,
    select_instances,
    select_semantic,
    weights_from_confidences,
)

# fixed spawn keys for the per-scene RNG streams
STREAM_SCENE = 0
STREAM_SEMANTIC = 1
STREAM_INSTANCE = 2
STREAM_REFERENCE = 3

PLACEMENT_RETRIES = 200
PLACEMENT_MARGIN = 4  # keeps dilated masks inside the frame

THING_SHAPES = ("rectangle", "ellipse")

VARIANT_NAMES = ("select", "select+itr", "select+isr", "select+itr+isr")


@dataclass(frozen=True)
class NoiseModel:
    semantic_stuff_acc: float = 0.9
    semantic_thing_acc: float = 0.5
    instance_thing_recall: float = 0.7
    instance_score_noise: float = 0.07
    instance_boundary_jitter: float = 0.2

    def __post_init__(self):
        for name, value in dataclasses.asdict(self).items():
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"noise parameter {name}={value} outside [0, 1]")


@dataclass(frozen=True)
class SceneSpec:
    height: int = 128
    width: int = 128
    n_stuff_regions: int = 3
    n_things: int = 24
    thing_shape: str = "rectangle"
    rng_seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.height < 16 or self.width < 16:
            raise ValidationError("scene dimensions must be at least 16")
        if self.n_stuff_regions < 1 or self.n_things < 1:
            raise ValidationError("region and thing counts must be at least 1")
        if self.thing_shape not in THING_SHAPES:
            raise ValidationError(f"thing_shape must be one of {THING_SHAPES}")
        if not isinstance(self.noise, NoiseModel):
            object.__setattr__(self, "noise", NoiseModel(*self.noise))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def derive_scene_specs(base: SceneSpec, master_seed: int, count: int) -> list[SceneSpec]:
    """Per-scene specs with seeds split deterministically from a master seed."""
    specs = []
    for i in range(count):
        seed = int(
            np.random.SeedSequence(int(master_seed), spawn_key=(i,)).generate_state(
                1, dtype=np.uint64
            )[0]
        )
        specs.append(dataclasses.replace(base, rng_seed=seed))
    return specs


def _thing_side_range(spec: SceneSpec) -> tuple[int, int]:
    # sides >= 7 survive erosion by up to 3 px; cap so placement fits the margin
    smax = min(16, min(spec.height, spec.width) - 2 * PLACEMENT_MARGIN)
    smin = min(8, smax)
    return smin, smax


def _band_rows(spec: SceneSpec, rng: np.random.Generator) -> list[tuple[int, int]]:
    n = spec.n_stuff_regions
    bounds = [round(i * spec.height / n) for i in range(n + 1)]
    jitter_max = max(0, spec.height // (4 * n) - 1)
    for i in range(1, n):
        bounds[i] += int(rng.integers(-jitter_max, jitter_max + 1))
    return [(bounds[i], bounds[i + 1]) for i in range(n)]


def _thing_mask(shape: str, h: int, w: int) -> np.ndarray:
    if shape == "rectangle":
        return np.ones((h, w), dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    return ((yy - cy) / (h / 2.0)) ** 2 + ((xx - cx) / (w / 2.0)) ** 2 <= 1.0


def generate_scene(spec: SceneSpec, catalog: ClassCatalog) -> tuple[PanopticMap, RgbImage]:
    """Deterministic scene: stuff bands with distinct categories, then things
    placed without overlap (bounded retries), rendered with one base color
    per segment plus seeded per-pixel noise."""
    catalog.require_things_and_stuff()
    stuff_ids = catalog.stuff_ids
    thing_ids = catalog.thing_ids
    if spec.n_stuff_regions > len(stuff_ids):
        raise ValidationError(
            f"{spec.n_stuff_regions} stuff regions requested but catalog has "
            f"only {len(stuff_ids)} stuff categories"
        )
    rng = _rng(spec.rng_seed, STREAM_SCENE)
    h, w = spec.height, spec.width

    band_cats = [stuff_ids[i] for i in rng.permutation(len(stuff_ids))[: spec.n_stuff_regions]]
    categories = np.zeros((h, w), dtype=np.uint16)
    instance_ids = np.zeros((h, w), dtype=np.uint16)
    segment_index = np.zeros((h, w), dtype=np.int32)
    for b, (r0, r1) in enumerate(_band_rows(spec, rng)):
        categories[r0:r1, :] = band_cats[b]
        segment_index[r0:r1, :] = b

    smin, smax = _thing_side_range(spec)
    occupied = np.zeros((h, w), dtype=bool)
    for j in range(spec.n_things):
        cat = thing_ids[int(rng.integers(len(thing_ids)))]
        for attempt in range(PLACEMENT_RETRIES + 1):
            if attempt == PLACEMENT_RETRIES:
                raise GenerationError(
                    f"could not place thing {j} after {PLACEMENT_RETRIES} retries"
                )
            th = int(rng.integers(smin, smax + 1))
            tw = int(rng.integers(smin, smax + 1))
            y0 = int(rng.integers(PLACEMENT_MARGIN, h - PLACEMENT_MARGIN - th + 1))
            x0 = int(rng.integers(PLACEMENT_MARGIN, w - PLACEMENT_MARGIN - tw + 1))
            if not occupied[y0 : y0 + th, x0 : x0 + tw].any():
                break
        occupied[y0 : y0 + th, x0 : x0 + tw] = True
        mask = _thing_mask(spec.thing_shape, th, tw)
        region = np.zeros((h, w), dtype=bool)
        region[y0 : y0 + th, x0 : x0 + tw] = mask
        categories[region] = cat
        instance_ids[region] = j + 1
        segment_index[region] = spec.n_stuff_regions + j

    n_segments = spec.n_stuff_regions + spec.n_things
    colors = rng.integers(24, 232, size=(n_segments, 3))
    for _ in range(100):
        _, first = np.unique(colors, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(n_segments), first)
        if dup.size == 0:
            break
        colors[dup] = rng.integers(24, 232, size=(dup.size, 3))
    pixel_noise = rng.integers(-10, 11, size=(h, w, 3))
    image = np.clip(colors[segment_index] + pixel_noise, 0, 255).astype(np.uint8)

    return PanopticMap(categories, instance_ids, catalog.void_id), RgbImage(image)


def simulate_semantic_predictor(
    gt: PanopticMap, spec: SceneSpec, catalog: ClassCatalog, view: int = 0
) -> SemanticProbMap:
    """Noisy per-pixel categorical predictions peaked on the true category
    with stuff/thing-dependent accuracy.

    Correct pixels draw their peak mass from [0.6, 1.0] and wrong pixels
    (peaked on a random other category) from [0.5, 0.8], so confidence
    carries signal about correctness, which is what quantile-based selection
    relies on. A branch with accuracy exactly 1.0 is treated as perfectly
    calibrated and emits one-hot distributions. ``view`` selects an
    independent noise stream for stylized views of the same scene.
    """
    rng = _rng(spec.rng_seed, STREAM_SEMANTIC, view)
    c = catalog.num_categories
    h, w = gt.height, gt.width
    is_thing_pixel = gt.instance_ids > 0
    acc = np.where(
        is_thing_pixel, spec.noise.semantic_thing_acc, spec.noise.semantic_stuff_acc
    )
    correct = rng.random((h, w)) < acc
    offsets = rng.integers(1, c, size=(h, w))
    peak_correct = np.where(acc == 1.0, 1.0, rng.uniform(0.6, 1.0, size=(h, w)))
    peak_wrong = rng.uniform(0.5, 0.8, size=(h, w))

    true_cat = np.minimum(gt.categories, c - 1).astype(np.int64)
    peak_cat = np.where(correct, true_cat, (true_cat + offsets) % c)
    peak = np.where(correct, peak_correct, peak_wrong)
    rest = (1.0 - peak) / (c - 1)
    probs = np.empty((c, h, w), dtype=np.float64)
    for ch in range(c):
        probs[ch] = np.where(peak_cat == ch, peak, rest)
    return SemanticProbMap(probs.astype(np.float32))


def _jitter_radius(jitter: float) -> int:
    return int(np.floor(3.0 * jitter + 0.5))


def _morph(mask: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return mask
    structure = np.ones((3, 3), dtype=bool)
    if k > 0:
        return ndimage.binary_dilation(mask, structure=structure, iterations=k)
    return ndimage.binary_erosion(mask, structure=structure, iterations=-k)


def simulate_instance_predictor(
    gt: PanopticMap, spec: SceneSpec, catalog: ClassCatalog, view: int = 0
) -> InstanceSet:
    """Noisy instance predictions: each true thing is emitted with the recall
    probability, its mask dilated or eroded by a seeded jitter radius, with a
    high score; false positives appear at rate (1 - recall) / 2 per thing as
    random boxes with lower scores."""
    noise = spec.noise
    rng = _rng(spec.rng_seed, STREAM_INSTANCE, view)
    r = _jitter_radius(noise.instance_boundary_jitter)
    h, w = gt.height, gt.width
    smin, smax = _thing_side_range(spec)
    thing_ids = catalog.thing_ids

    keys = gt.segment_keys()
    thing_keys = sorted(
        (int(k) for k in np.unique(keys[gt.instance_ids > 0])),
        key=lambda k: k & 0xFFFF,  # instance-id order
    )

    detections: list[Instance] = []
    false_positives: list[Instance] = []
    for key in thing_keys:
        cat = key >> 16
        if rng.random() < noise.instance_thing_recall:
            k = int(rng.integers(-r, r + 1)) if r > 0 else 0
            mask = keys == key
            morphed = _morph(mask, k)
            if not morphed.any():
                morphed = mask  # jitter must never empty a mask
            score = 1.0 - float(rng.uniform(0.0, noise.instance_score_noise))
            detections.append(Instance(cat, score, rle_encode(morphed)))
        if rng.random() < (1.0 - noise.instance_thing_recall) / 2.0:
            th = int(rng.integers(smin, smax + 1))
            tw = int(rng.integers(smin, smax + 1))
            y0 = int(rng.integers(PLACEMENT_MARGIN, h - PLACEMENT_MARGIN - th + 1))
            x0 = int(rng.integers(PLACEMENT_MARGIN, w - PLACEMENT_MARGIN - tw + 1))
            fp_cat = thing_ids[int(rng.integers(len(thing_ids)))]
            box = np.zeros((h, w), dtype=bool)
            box[y0 : y0 + th, x0 : x0 + tw] = True
            # spurious boxes score visibly below true detections
            score = 1.0 - 2.0 * noise.instance_score_noise - float(
                rng.uniform(0.0, 2.0 * noise.instance_score_noise)
            )
            false_positives.append(
                Instance(fp_cat, max(score, 0.0), rle_encode(box))
            )
    return InstanceSet(h, w, tuple(detections + false_positives))


@dataclass(frozen=True)
class ExperimentConfig:
    """Per-module configurations used by the ablation experiment.

    Selection fractions, the consistency threshold and the fusion stuff-area
    floor are tuned for the desk-scale noise regime so every regularizer has
    measurable headroom over plain selection.
    """

    semantic_policy: SelectionPolicy = field(
        default_factory=lambda: SelectionPolicy(0.7, 0.05)
    )
    instance_policy: SelectionPolicy = field(
        default_factory=lambda: SelectionPolicy(0.995, 0.05)
    )
    itr: ItrConfig = field(default_factory=lambda: ItrConfig(0.5, "mean"))
    isr: IsrConfig = field(default_factory=lambda: IsrConfig(0.35))
    fusion: FusionConfig = field(default_factory=lambda: FusionConfig(0.5, 0.5, 512))


@dataclass(frozen=True)
class AblationResult:
    reports: dict[str, PQReport]
    per_scene_mpq: dict[str, tuple[float, ...]]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "variant": name,
                    "msq": self.reports[name].msq,
                    "mrq": self.reports[name].mrq,
                    "mpq": self.reports[name].mpq,
                }
                for name in VARIANT_NAMES
            ],
            "per_scene_mpq": {
                name: list(self.per_scene_mpq[name]) for name in VARIANT_NAMES
            },
        }

    def format_table(self) -> str:
        headers = ["variant", "mSQ", "mRQ", "mPQ"]
        rows = [
            [
                name,
                f"{self.reports[name].msq:.4f}",
                f"{self.reports[name].mrq:.4f}",
                f"{self.reports[name].mpq:.4f}",
            ]
            for name in VARIANT_NAMES
        ]
        widths = [
            max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))
        ]
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
        lines.append("  ".join("-" * x for x in widths))
        lines.extend("  ".join(v.ljust(widths[i]) for i, v in enumerate(r)) for r in rows)
        return "\n".join(lines)


def _scene_views(spec: SceneSpec, catalog: ClassCatalog, with_second_view: bool):
    gt, image = generate_scene(spec, catalog)
    sem1 = simulate_semantic_predictor(gt, spec, catalog, view=0)
    inst1 = simulate_instance_predictor(gt, spec, catalog, view=0)
    if not with_second_view:
        return gt, image, sem1, inst1, None, None
    sem2 = simulate_semantic_predictor(gt, spec, catalog, view=1)
    inst2 = simulate_instance_predictor(gt, spec, catalog, view=1)
    return gt, image, sem1, inst1, sem2, inst2


def fit_experiment_weights(
    specs: Sequence[SceneSpec], config: ExperimentConfig, catalog: ClassCatalog
):
    """Calibration pass: fit semantic and instance thresholds over the first
    views of every scene."""
    per_class: list[list[np.ndarray]] = [[] for _ in range(catalog.num_categories)]
    instance_sets = []
    for spec in specs:
        gt, _ = generate_scene(spec, catalog)
        sem = simulate_semantic_predictor(gt, spec, catalog, view=0)
        for c, vals in enumerate(category_confidences(sem, catalog.num_categories)):
            per_class[c].append(vals)
        instance_sets.append(simulate_instance_predictor(gt, spec, catalog, view=0))
    w_sem = weights_from_confidences(
        {c: np.concatenate(v) if v else np.empty(0) for c, v in enumerate(per_class)},
        config.semantic_policy,
        catalog,
    )
    w_inst = compute_instance_weights(instance_sets, config.instance_policy, catalog)
    return w_sem, w_inst


def stylized_reference(
    specs: Sequence[SceneSpec], index: int, catalog: ClassCatalog
) -> RgbImage:
    """Seeded pick of another scene's image to stylize scene ``index`` against."""
    rng = _rng(specs[index].rng_seed, STREAM_REFERENCE)
    candidates = [j for j in range(len(specs)) if j != index] or [index]
    j = candidates[int(rng.integers(len(candidates)))]
    _, ref_image = generate_scene(specs[j], catalog)
    return ref_image


def evaluate_scene_variants(
    specs: Sequence[SceneSpec],
    index: int,
    config: ExperimentConfig,
    catalog: ClassCatalog,
    w_sem,
    w_inst,
) -> dict[str, dict[int, CategoryStats]]:
    """Per-variant category statistics for one scene."""
    spec = specs[index]
    void = catalog.void_id
    gt, image, sem1, inst1, sem2, inst2 = _scene_views(spec, catalog, True)
    # stylization changes only colors; predictors draw view-specific noise
    match_histograms(image, stylized_reference(specs, index, catalog))

    sem_pl1 = select_semantic(sem1, w_sem, void)
    inst_pl1 = select_instances(inst1, w_inst, catalog)
    preds = {
        "select": fuse_panoptic(inst_pl1, sem_pl1, config.fusion, catalog),
    }

    inst_r1 = regularize_instances(inst1, sem1, sem_pl1, inst_pl1, config.itr)
    sem_r1 = regularize_semantic(sem1, sem_pl1, inst_pl1, config.itr)
    preds["select+itr"] = fuse_panoptic(inst_r1, sem_r1, config.fusion, catalog)

    sem_u = unify_semantic(sem1, sem2, w_sem, void)
    inst_u = unify_instances(inst1, inst2, w_inst, config.isr, catalog)
    preds["select+isr"] = fuse_panoptic(inst_u, sem_u, config.fusion, catalog)

    sem_pl2 = select_semantic(sem2, w_sem, void)
    inst_pl2 = select_instances(inst2, w_inst, catalog)
    inst_r2 = regularize_instances(inst2, sem2, sem_pl2, inst_pl2, config.itr)
    sem_r2 = regularize_semantic(sem2, sem_pl2, inst_pl2, config.itr)
    sem_b = unify_label_maps(
        sem_r1,
        semantic_entropy_map(sem1).values,
        sem_r2,
        semantic_entropy_map(sem2).values,
    )
    inst_b = unify_instance_sets(inst_r1, inst_r2, config.isr.instance_merge_iou)
    preds["select+itr+isr"] = fuse_panoptic(inst_b, sem_b, config.fusion, catalog)

    return {
        name: accumulate_matches(match_segments(pred, gt, catalog))
        for name, pred in preds.items()
    }


def run_ablation_experiment(
    specs: Sequence[SceneSpec],
    config: ExperimentConfig,
    catalog: ClassCatalog,
    jobs: int = 1,
) -> AblationResult:
    """Evaluate the four pipeline variants over identical scenes.

    Thresholds are fitted once over all first-view predictions, then every
    scene is evaluated independently (optionally in parallel) and merged in
    scene order, so results do not depend on the parallelism width. Twenty or
    more scenes are recommended for stable orderings.
    """
    specs = list(specs)
    if not specs:
        raise ValidationError("experiment needs at least one scene spec")
    w_sem, w_inst = fit_experiment_weights(specs, config, catalog)

    def one(index: int):
        return evaluate_scene_variants(specs, index, config, catalog, w_sem, w_inst)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_scene = list(pool.map(one, range(len(specs))))
    else:
        per_scene = [one(i) for i in range(len(specs))]

    totals: dict[str, dict[int, CategoryStats]] = {n: {} for n in VARIANT_NAMES}
    per_scene_mpq: dict[str, list[float]] = {n: [] for n in VARIANT_NAMES}
    for stats in per_scene:
        for name in VARIANT_NAMES:
            merge_stats(totals[name], stats[name])
            per_scene_mpq[name].append(report_from_stats(stats[name]).mpq)
    reports = {name: report_from_stats(totals[name]) for name in VARIANT_NAMES}
    return AblationResult(
        reports, {n: tuple(v) for n, v in per_scene_mpq.items()}
    )


def single_task_scene_reports(
    specs: Sequence[SceneSpec],
    index: int,
    config: ExperimentConfig,
    catalog: ClassCatalog,
    w_sem,
    w_inst,
) -> tuple[PQReport, PQReport]:
    """Evaluate semantic-only and instance-only pseudo labels for one scene:
    the semantic branch fused with no instances, and the instance branch
    fused over an all-void semantic map."""
    spec = specs[index]
    void = catalog.void_id
    gt, _, sem1, inst1, _, _ = _scene_views(spec, catalog, False)
    sem_pl = select_semantic(sem1, w_sem, void)
    inst_pl = select_instances(inst1, w_inst, catalog)
    empty_instances = InstanceSet(gt.height, gt.width, ())
    all_void = SemanticLabelMap(
        np.full((gt.height, gt.width), void, dtype=np.uint16), void
    )
    sem_only = fuse_panoptic(empty_instances, sem_pl, config.fusion, catalog)
    inst_only = fuse_panoptic(inst_pl, all_void, config.fusion, catalog)
    sem_report = report_from_stats(
        accumulate_matches(match_segments(sem_only, gt, catalog))
    )
    inst_report = report_from_stats(
        accumulate_matches(match_segments(inst_only, gt, catalog))
    )
    return sem_report, inst_report


def complementarity_outcomes(
    specs: Sequence[SceneSpec], config: ExperimentConfig, catalog: ClassCatalog
) -> list[tuple[bool, bool]]:
    """Per scene: (semantic beats instance-derived on stuff PQ, semantic loses
    on thing PQ)."""
    w_sem, w_inst = fit_experiment_weights(specs, config, catalog)
    outcomes = []
    for i in range(len(specs)):
        sem_report, inst_report = single_task_scene_reports(
            specs, i, config, catalog, w_sem, w_inst
        )
        sem_stuff = mean_pq_over(sem_report, catalog.stuff_ids)
        inst_stuff = mean_pq_over(inst_report, catalog.stuff_ids)
        sem_thing = mean_pq_over(sem_report, catalog.thing_ids)
        inst_thing = mean_pq_over(inst_report, catalog.thing_ids)
        outcomes.append((sem_stuff > inst_stuff, sem_thing < inst_thing))
    return outcomes


def expected_jitter_iou(spec: SceneSpec, samples: int, seed: int) -> float:
    """Monte-Carlo expectation of the per-instance IoU implied by the jitter
    model, using the closed-form IoU of a rectangle grown or shrunk by a
    square structuring element (independent of the mask pipeline)."""
    if spec.thing_shape != "rectangle":
        raise ValidationError("the closed-form jitter IoU only covers rectangles")
    rng = np.random.default_rng(seed)
    smin, smax = _thing_side_range(spec)
    r = _jitter_radius(spec.noise.instance_boundary_jitter)
    total = 0.0
    for _ in range(samples):
        wd = int(rng.integers(smin, smax + 1))
        ht = int(rng.integers(smin, smax + 1))
        k = int(rng.integers(-r, r + 1)) if r > 0 else 0
        if k >= 0:
            total += (wd * ht) / ((wd + 2 * k) * (ht + 2 * k))
        else:
            total += ((wd + 2 * k) * (ht + 2 * k)) / (wd * ht)
    return total / samples
