"""Class-balanced confidence thresholding for pseudo-label selection.

Per-category thresholds exp(-k_c) are fitted as a confidence quantile over a
calibration set so that roughly ``target_fraction`` of each category's argmax
predictions survive, preventing easy majority classes from swamping the
selected labels. Selection keeps a prediction only when its confidence
strictly exceeds the fitted threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .catalog import ClassCatalog
from .errors import ValidationError
from .instances import InstanceSet
from .maps import SemanticLabelMap, SemanticProbMap

# thresholds are clamped below 1 so that k_c stays strictly positive and an
# empty category never selects anything in practice
MAX_THRESHOLD = 1.0 - 1e-6


@dataclass(frozen=True)
class SelectionPolicy:
    """Fraction of most-confident predictions retained per category, plus a
    floor below which thresholds are not allowed to drop."""

    target_fraction: float = 0.5
    min_threshold: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.target_fraction <= 1.0:
            raise ValidationError("target_fraction must lie in (0, 1]")
        if not 0.0 <= self.min_threshold < 1.0:
            raise ValidationError("min_threshold must lie in [0, 1)")


@dataclass(frozen=True)
class ClassBalancedWeights:
    """Mapping category id -> k_c >= 0; the selection threshold is exp(-k_c)."""

    k: Mapping[int, float]

    def __post_init__(self):
        frozen = {int(c): float(v) for c, v in dict(self.k).items()}
        if any(v < 0.0 for v in frozen.values()):
            raise ValidationError("class-balanced weights must be non-negative")
        object.__setattr__(self, "k", frozen)

    def threshold(self, category: int) -> float:
        return math.exp(-self.k[category])

    def validate_against(self, catalog: ClassCatalog) -> "ClassBalancedWeights":
        missing = [c.id for c in catalog.categories if c.id not in self.k]
        if missing:
            raise ValidationError(f"weights missing categories {missing}")
        return self

    def to_dict(self) -> dict:
        return {str(c): self.k[c] for c in sorted(self.k)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassBalancedWeights":
        return cls({int(c): float(v) for c, v in d.items()})


def _quantile_threshold(confidences: np.ndarray, policy: SelectionPolicy) -> float:
    """Threshold at the target-fraction quantile of descending confidences."""
    if confidences.size == 0:
        return MAX_THRESHOLD
    ordered = np.sort(confidences.astype(np.float64))[::-1]
    idx = max(0, math.ceil(policy.target_fraction * ordered.size) - 1)
    t = float(ordered[idx])
    return min(max(t, policy.min_threshold), MAX_THRESHOLD)


def category_confidences(
    preds: SemanticProbMap, num_categories: int
) -> list[np.ndarray]:
    """Max-probabilities of each category's argmax pixels, one array per id."""
    conf = preds.probs.max(axis=0)
    arg = preds.probs.argmax(axis=0)
    return [conf[arg == c].ravel() for c in range(num_categories)]


def compute_class_balanced_weights(
    preds: Sequence[SemanticProbMap],
    policy: SelectionPolicy,
    catalog: ClassCatalog,
) -> ClassBalancedWeights:
    """Fit k_c from the confidence quantiles of a calibration set of maps."""
    preds = list(preds)
    if not preds:
        raise ValidationError("weight fitting needs at least one prediction map")
    per_class: list[list[np.ndarray]] = [[] for _ in range(catalog.num_categories)]
    for p in preds:
        if p.num_categories != catalog.num_categories:
            raise ValidationError(
                f"prediction has {p.num_categories} categories, "
                f"catalog has {catalog.num_categories}"
            )
        for c, vals in enumerate(category_confidences(p, catalog.num_categories)):
            per_class[c].append(vals)
    return weights_from_confidences(
        {c: np.concatenate(v) if v else np.empty(0) for c, v in enumerate(per_class)},
        policy,
        catalog,
    )


def compute_instance_weights(
    sets: Sequence[InstanceSet],
    policy: SelectionPolicy,
    catalog: ClassCatalog,
) -> ClassBalancedWeights:
    """Fit k_c from instance confidences, per thing category. Stuff categories
    receive the empty-class default so every catalog id has an entry."""
    sets = list(sets)
    if not sets:
        raise ValidationError("weight fitting needs at least one instance set")
    per_class: dict[int, list[float]] = {c: [] for c in catalog.thing_ids}
    for s in sets:
        for inst in s:
            per_class.setdefault(inst.category, []).append(inst.confidence(catalog))
    return weights_from_confidences(
        {c: np.asarray(v, dtype=np.float64) for c, v in per_class.items()},
        policy,
        catalog,
    )


def weights_from_confidences(
    confidences: Mapping[int, np.ndarray],
    policy: SelectionPolicy,
    catalog: ClassCatalog,
) -> ClassBalancedWeights:
    k = {}
    for cat in catalog.categories:
        vals = np.asarray(confidences.get(cat.id, np.empty(0)))
        t = _quantile_threshold(vals, policy)
        k[cat.id] = -math.log(t)
    return ClassBalancedWeights(k)


def select_semantic(
    probs: SemanticProbMap, weights: ClassBalancedWeights, void_id: int
) -> SemanticLabelMap:
    """Keep a pixel's argmax category c only when p_c strictly exceeds
    exp(-k_c); every other pixel becomes void."""
    conf = probs.probs.max(axis=0).astype(np.float64)
    arg = probs.probs.argmax(axis=0)
    thresholds = np.array(
        [
            math.exp(-weights.k[c]) if c in weights.k else MAX_THRESHOLD
            for c in range(probs.num_categories)
        ],
        dtype=np.float64,
    )
    keep = conf > thresholds[arg]
    labels = np.where(keep, arg, void_id).astype(np.uint16)
    return SemanticLabelMap(labels, void_id)


def select_instances(
    instances: InstanceSet,
    weights: ClassBalancedWeights,
    catalog: ClassCatalog | None = None,
) -> InstanceSet:
    """Keep instances whose confidence strictly exceeds their category
    threshold; input order is preserved."""
    kept = [
        inst
        for inst in instances
        if inst.confidence(catalog) > weights.threshold(inst.category)
    ]
    return instances.replace(kept)


