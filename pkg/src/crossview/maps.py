"""Dense per-pixel map types: probabilities, labels, panoptic pairs, entropy.

All arrays are frozen after construction so instances can be shared freely
across threads. Probability maps are stored category-major (C, H, W) in
float32, matching the on-disk container layout byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

PROB_SUM_TOL = 1e-5


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SemanticProbMap:
    """Per-pixel categorical distribution over C categories, shape (C, H, W)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.ascontiguousarray(np.asarray(self.probs, dtype=np.float32))
        if probs.ndim != 3 or probs.shape[0] < 2:
            raise ValidationError("probs must have shape (C, H, W) with C >= 2")
        if probs.shape[1] < 1 or probs.shape[2] < 1:
            raise ValidationError("map dimensions must be positive")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=0, dtype=np.float64)
        err = np.abs(sums - 1.0).max()
        if err > PROB_SUM_TOL:
            raise ValidationError(
                f"per-pixel probabilities must sum to 1 within {PROB_SUM_TOL}, "
                f"worst deviation {err:.3g}"
            )
        object.__setattr__(self, "probs", _freeze(probs))

    @property
    def num_categories(self) -> int:
        return self.probs.shape[0]

    @property
    def height(self) -> int:
        return self.probs.shape[1]

    @property
    def width(self) -> int:
        return self.probs.shape[2]


@dataclass(frozen=True)
class SemanticLabelMap:
    """Per-pixel category ids (uint16); the void id marks unlabeled pixels."""

    labels: np.ndarray
    void_id: int

    def __post_init__(self):
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint16))
        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise ValidationError("labels must be a non-empty 2-d array")
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def validate_against(self, catalog) -> "SemanticLabelMap":
        valid = self.labels == self.void_id
        valid |= self.labels < catalog.num_categories
        if not valid.all():
            bad = int(self.labels[~valid][0])
            raise ValidationError(f"label {bad} is neither void nor a catalog id")
        if self.void_id != catalog.void_id:
            raise ValidationError(
                f"label map void id {self.void_id} != catalog void id {catalog.void_id}"
            )
        return self


@dataclass(frozen=True)
class EntropyMap:
    """Normalized per-pixel entropy in [0, 1], float32."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float32))
        if values.ndim != 2:
            raise ValidationError("entropy values must be a 2-d array")
        if np.any(values < 0) or np.any(values > 1):
            raise ValidationError("entropy values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PanopticMap:
    """Per-pixel (category id, instance id) assignment.

    Instance id 0 marks stuff and void pixels; (void_id, 0) marks unlabeled
    pixels. Any instance id > 0 must appear with exactly one category.
    """

    categories: np.ndarray
    instance_ids: np.ndarray
    void_id: int

    def __post_init__(self):
        cats = np.ascontiguousarray(np.asarray(self.categories, dtype=np.uint16))
        inst = np.ascontiguousarray(np.asarray(self.instance_ids, dtype=np.uint16))
        if cats.ndim != 2 or cats.shape != inst.shape:
            raise ValidationError("categories and instance_ids must share a 2-d shape")
        if cats.shape[0] < 1 or cats.shape[1] < 1:
            raise ValidationError("map dimensions must be positive")
        with_id = inst > 0
        if with_id.any():
            pairs = np.unique(
                cats[with_id].astype(np.int64) * 65536 + inst[with_id].astype(np.int64)
            )
            ids = pairs % 65536
            if np.unique(ids).size != ids.size:
                raise ValidationError(
                    "an instance id appears with more than one category"
                )
        object.__setattr__(self, "categories", _freeze(cats))
        object.__setattr__(self, "instance_ids", _freeze(inst))

    @property
    def height(self) -> int:
        return self.categories.shape[0]

    @property
    def width(self) -> int:
        return self.categories.shape[1]

    def segment_keys(self) -> np.ndarray:
        """Per-pixel int64 key category * 65536 + instance id."""
        return self.categories.astype(np.int64) * 65536 + self.instance_ids.astype(
            np.int64
        )

    def validate_against(self, catalog) -> "PanopticMap":
        if self.void_id != catalog.void_id:
            raise ValidationError(
                f"panoptic void id {self.void_id} != catalog void id {catalog.void_id}"
            )
        cats = self.categories
        inst = self.instance_ids
        known = (cats == self.void_id) | (cats < catalog.num_categories)
        if not known.all():
            raise ValidationError("panoptic map contains an unknown category id")
        thing_lookup = np.zeros(max(catalog.num_categories, self.void_id + 1), bool)
        for t in catalog.thing_ids:
            thing_lookup[t] = True
        if np.any((inst > 0) & ~thing_lookup[cats]):
            raise ValidationError("instance ids > 0 are only valid for thing categories")
        return self


@dataclass(frozen=True)
class RgbImage:
    """8-bit interleaved RGB image, shape (H, W, 3)."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.ascontiguousarray(np.asarray(self.samples, dtype=np.uint8))
        if samples.ndim != 3 or samples.shape[2] != 3:
            raise ValidationError("image must have shape (H, W, 3)")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValidationError("image dimensions must be positive")
        object.__setattr__(self, "samples", _freeze(samples))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]
