"""Inter-task regularization between instance and semantic pseudo labels.

The two prediction branches gate each other by normalized entropy: selected
instances survive only where they are more certain than the semantic branch
over their own mask, any instance strongly agreeing with the semantic pseudo
labels is kept regardless of its confidence, and semantic pseudo labels
defer to projected instance labels wherever the instance branch is the more
certain one. Exact entropy ties always resolve to void / drop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropy import instance_entropy, instance_entropy_map, semantic_entropy_map
from .errors import ValidationError
from .instances import Instance, InstanceSet
from .maps import EntropyMap, SemanticLabelMap, SemanticProbMap
from .rle import rle_decode

REGION_AGGREGATIONS = ("mean", "median")


@dataclass(frozen=True)
class ItrConfig:
    """Consistency threshold for the rescue judge and the statistic used to
    aggregate per-pixel semantic entropy over an instance mask."""

    consistency_threshold: float = 0.5
    region_aggregation: str = "mean"

    def __post_init__(self):
        if not 0.0 < self.consistency_threshold <= 1.0:
            raise ValidationError("consistency_threshold must lie in (0, 1]")
        if self.region_aggregation not in REGION_AGGREGATIONS:
            raise ValidationError(
                f"region_aggregation must be one of {REGION_AGGREGATIONS}"
            )


def _check_dims(height: int, width: int, *objs):
    for obj in objs:
        if (obj.height, obj.width) != (height, width):
            raise ValidationError(
                f"dimension mismatch: expected {(height, width)}, "
                f"got {(obj.height, obj.width)}"
            )


def judge_consistency(
    inst: Instance, semantic_labels: SemanticLabelMap, cfg: ItrConfig
) -> bool:
    """True iff the fraction of the instance's mask whose semantic pseudo
    label equals the instance category reaches the consistency threshold.
    Void pixels count against consistency."""
    mask = rle_decode(inst.mask)
    if mask.shape != semantic_labels.labels.shape:
        raise ValidationError(
            f"mask shape {mask.shape} does not match labels "
            f"{semantic_labels.labels.shape}"
        )
    total = int(np.count_nonzero(mask))
    matching = int(np.count_nonzero(semantic_labels.labels[mask] == inst.category))
    return matching / total >= cfg.consistency_threshold


def region_semantic_entropy(
    inst: Instance, entropy: EntropyMap, aggregation: str
) -> float:
    mask = rle_decode(inst.mask)
    vals = entropy.values[mask]
    if aggregation == "mean":
        return float(np.mean(vals, dtype=np.float64))
    return float(np.median(vals))


def regularize_instances(
    instances: InstanceSet,
    semantic_probs: SemanticProbMap,
    semantic_labels: SemanticLabelMap,
    selected: InstanceSet,
    cfg: ItrConfig,
) -> InstanceSet:
    """Entropy-gate the selected instances against the semantic branch and
    keep any instance, selected or not, that the consistency judge accepts
    against the semantic pseudo labels.

    ``selected`` must be the confidence-selected subset of ``instances``.
    Output is deduplicated and ordered by descending score (stable).
    """
    _check_dims(instances.height, instances.width, semantic_probs, semantic_labels, selected)
    selected_pool = set(selected.instances)
    if not selected_pool.issubset(set(instances.instances)):
        raise ValidationError("selected instances must be a subset of the raw set")

    sem_entropy = semantic_entropy_map(semantic_probs)
    out: list[Instance] = []
    for inst in selected:
        gate = region_semantic_entropy(inst, sem_entropy, cfg.region_aggregation)
        if instance_entropy(inst) < gate:
            out.append(inst)
    # the judge ranges over every raw prediction, so it can both rescue
    # discarded instances and re-admit selected ones that lost the entropy
    # gate; the overlap with the first term is removed below
    for inst in instances:
        if judge_consistency(inst, semantic_labels, cfg):
            out.append(inst)

    deduped: list[Instance] = []
    seen: set[Instance] = set()
    for inst in out:
        if inst not in seen:
            seen.add(inst)
            deduped.append(inst)
    deduped.sort(key=lambda i: -i.score)
    return instances.replace(deduped)


def to_semantic(instances: InstanceSet, void_id: int) -> SemanticLabelMap:
    """Project instances to a semantic label map, dropping instance identity.

    Each pixel takes the category of its lowest-entropy covering instance
    (earliest instance wins exact ties); uncovered pixels are void.
    """
    labels = np.full((instances.height, instances.width), void_id, dtype=np.uint16)
    best = np.full((instances.height, instances.width), np.inf, dtype=np.float64)
    for inst in instances:
        h = instance_entropy(inst)
        covered = rle_decode(inst.mask)
        take = covered & (h < best)
        labels[take] = inst.category
        best[take] = h
    return SemanticLabelMap(labels, void_id)


def regularize_semantic(
    semantic_probs: SemanticProbMap,
    semantic_labels: SemanticLabelMap,
    selected_instances: InstanceSet,
    cfg: ItrConfig,
) -> SemanticLabelMap:
    """Per pixel, keep the semantic pseudo label where the semantic branch is
    strictly more certain, take the projected instance label where the
    instance branch is, and fall back to void on exact ties.

    ``selected_instances`` is the confidence-selected instance subset; its
    pixel-aligned entropy (1.0 where uncovered) is gated against the raw
    semantic entropies.
    """
    _check_dims(
        semantic_probs.height,
        semantic_probs.width,
        semantic_labels,
        selected_instances,
    )
    void_id = semantic_labels.void_id
    sem_entropy = semantic_entropy_map(semantic_probs).values
    inst_entropy = instance_entropy_map(selected_instances).values
    projected = to_semantic(selected_instances, void_id).labels

    out = np.full(sem_entropy.shape, void_id, dtype=np.uint16)
    sem_wins = sem_entropy < inst_entropy
    inst_wins = inst_entropy < sem_entropy
    out[sem_wins] = semantic_labels.labels[sem_wins]
    out[inst_wins] = projected[inst_wins]
    return SemanticLabelMap(out, void_id)
