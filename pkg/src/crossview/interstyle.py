"""Inter-style regularization: deterministic stylization and cross-view
pseudo-label unification.

Stylization is exact 256-bin histogram matching per channel, which remaps
pixel values monotonically and therefore leaves the pixel grid (and any
aligned label map) untouched. Unification keeps, per pixel or per instance,
the selected label of whichever view is strictly more certain.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import ClassCatalog
from .entropy import instance_entropy, semantic_entropy_map
from .errors import ValidationError
from .instances import Instance, InstanceSet
from .maps import RgbImage, SemanticLabelMap, SemanticProbMap
from .rle import mask_iou
from .selection import ClassBalancedWeights, select_instances, select_semantic


@dataclass(frozen=True)
class IsrConfig:
    """Cross-view instance matching threshold; reference selection for
    stylization is either an explicit image or a seeded pick from a pool."""

    instance_merge_iou: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.instance_merge_iou <= 1.0:
            raise ValidationError("instance_merge_iou must lie in (0, 1]")


def pick_reference(pool: Sequence, seed: int, exclude: int | None = None) -> int:
    """Seeded reproducible index pick from a reference pool."""
    if not pool:
        raise ValidationError("reference pool is empty")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    candidates = [i for i in range(len(pool)) if i != exclude]
    if not candidates:
        raise ValidationError("reference pool only contains the excluded image")
    return candidates[int(rng.integers(len(candidates)))]


def _channel_cdf(channel: np.ndarray) -> np.ndarray:
    counts = np.bincount(channel.ravel(), minlength=256)
    return np.cumsum(counts, dtype=np.float64) / channel.size


def match_histograms(src: RgbImage, ref: RgbImage) -> RgbImage:
    """Map each source value to the smallest reference value whose reference
    CDF reaches the source CDF, independently per channel."""
    out = np.empty_like(src.samples)
    for ch in range(3):
        src_cdf = _channel_cdf(src.samples[:, :, ch])
        ref_cdf = _channel_cdf(ref.samples[:, :, ch])
        lut = np.searchsorted(ref_cdf, src_cdf, side="left").astype(np.uint8)
        out[:, :, ch] = lut[src.samples[:, :, ch]]
    return RgbImage(out)


def unify_label_maps(
    labels_a: SemanticLabelMap,
    entropy_a: np.ndarray,
    labels_b: SemanticLabelMap,
    entropy_b: np.ndarray,
) -> SemanticLabelMap:
    """Per pixel take the label of the strictly lower-entropy side; exact
    entropy ties become void."""
    if labels_a.labels.shape != labels_b.labels.shape:
        raise ValidationError("view label maps must share dimensions")
    void_id = labels_a.void_id
    out = np.full(labels_a.labels.shape, void_id, dtype=np.uint16)
    a_wins = entropy_a < entropy_b
    b_wins = entropy_b < entropy_a
    out[a_wins] = labels_a.labels[a_wins]
    out[b_wins] = labels_b.labels[b_wins]
    return SemanticLabelMap(out, void_id)


def unify_semantic(
    probs: SemanticProbMap,
    probs_styled: SemanticProbMap,
    weights: ClassBalancedWeights,
    void_id: int,
) -> SemanticLabelMap:
    """Per pixel the selected label of whichever view has strictly lower
    entropy; void on ties or when the winning view selects nothing."""
    if (probs.height, probs.width) != (probs_styled.height, probs_styled.width):
        raise ValidationError("view probability maps must share dimensions")
    return unify_label_maps(
        select_semantic(probs, weights, void_id),
        semantic_entropy_map(probs).values,
        select_semantic(probs_styled, weights, void_id),
        semantic_entropy_map(probs_styled).values,
    )


def unify_instance_sets(
    set_a: InstanceSet, set_b: InstanceSet, merge_iou: float
) -> InstanceSet:
    """Greedily pair same-category instances across two views by descending
    IoU (>= merge_iou); each pair keeps its strictly lower-entropy member
    (ties drop both) and unmatched instances pass through. Output is ordered
    by descending score (stable)."""
    if (set_a.height, set_a.width) != (set_b.height, set_b.width):
        raise ValidationError("view instance sets must share dimensions")
    pairs = []
    for ia, a in enumerate(set_a):
        for ib, b in enumerate(set_b):
            if a.category != b.category:
                continue
            iou = mask_iou(a.mask, b.mask)
            if iou >= merge_iou:
                pairs.append((iou, ia, ib))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))

    matched_a: set[int] = set()
    matched_b: set[int] = set()
    out: list[Instance] = []
    for _, ia, ib in pairs:
        if ia in matched_a or ib in matched_b:
            continue
        matched_a.add(ia)
        matched_b.add(ib)
        ha = instance_entropy(set_a.instances[ia])
        hb = instance_entropy(set_b.instances[ib])
        if ha < hb:
            out.append(set_a.instances[ia])
        elif hb < ha:
            out.append(set_b.instances[ib])
        # equal entropies: drop both
    out.extend(a for ia, a in enumerate(set_a) if ia not in matched_a)
    out.extend(b for ib, b in enumerate(set_b) if ib not in matched_b)
    out.sort(key=lambda i: -i.score)
    return set_a.replace(out)


def unify_instances(
    instances: InstanceSet,
    instances_styled: InstanceSet,
    weights: ClassBalancedWeights,
    cfg: IsrConfig,
    catalog: ClassCatalog | None = None,
) -> InstanceSet:
    """Confidence-select both views, then merge them cross-view."""
    return unify_instance_sets(
        select_instances(instances, weights, catalog),
        select_instances(instances_styled, weights, catalog),
        cfg.instance_merge_iou,
    )
