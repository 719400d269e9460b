"""Heuristic combination of instance and semantic predictions into a
panoptic map: greedy score-ordered instance layout, then stuff fill.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import ClassCatalog
from .errors import ValidationError
from .instances import InstanceSet
from .maps import PanopticMap, SemanticLabelMap
from .rle import rle_decode


@dataclass(frozen=True)
class FusionConfig:
    instance_score_min: float = 0.5
    overlap_keep_fraction: float = 0.5
    stuff_min_area: int = 2048

    def __post_init__(self):
        if not 0.0 <= self.instance_score_min <= 1.0:
            raise ValidationError("instance_score_min must lie in [0, 1]")
        if not 0.0 < self.overlap_keep_fraction <= 1.0:
            raise ValidationError("overlap_keep_fraction must lie in (0, 1]")
        if self.stuff_min_area < 0:
            raise ValidationError("stuff_min_area must be non-negative")


def fuse_panoptic(
    instances: InstanceSet,
    semantic: SemanticLabelMap,
    cfg: FusionConfig,
    catalog: ClassCatalog,
) -> PanopticMap:
    """Fuse score-thresholded instances greedily (descending score, ties by
    larger mask then input order), discarding instances mostly occluded by
    earlier ones; unclaimed pixels take their semantic label when it is a
    stuff category with enough remaining area, otherwise void.
    """
    if (instances.height, instances.width) != (semantic.height, semantic.width):
        raise ValidationError(
            f"instance set {(instances.height, instances.width)} does not match "
            f"semantic map {(semantic.height, semantic.width)}"
        )
    catalog.require_things_and_stuff()
    void_id = catalog.void_id
    h, w = semantic.height, semantic.width

    categories = np.full((h, w), void_id, dtype=np.uint16)
    instance_ids = np.zeros((h, w), dtype=np.uint16)
    claimed = np.zeros((h, w), dtype=bool)

    order = sorted(
        range(len(instances.instances)),
        key=lambda i: (
            -instances.instances[i].score,
            -instances.instances[i].mask.area,
            i,
        ),
    )
    next_id = 1
    for idx in order:
        inst = instances.instances[idx]
        if inst.score < cfg.instance_score_min:
            continue
        mask = rle_decode(inst.mask)
        free = mask & ~claimed
        if int(np.count_nonzero(free)) / inst.mask.area < cfg.overlap_keep_fraction:
            continue
        categories[free] = inst.category
        instance_ids[free] = next_id
        claimed |= free
        next_id += 1

    remaining = ~claimed
    sem = semantic.labels
    for c in catalog.stuff_ids:
        region = remaining & (sem == c)
        if int(np.count_nonzero(region)) >= cfg.stuff_min_area:
            categories[region] = c
    # thing or void semantic labels outside instances stay void

    return PanopticMap(categories, instance_ids, void_id)
