"""Scored instance masks and instance sets."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .rle import RleMask

CLASS_DIST_TOL = 1e-5


@dataclass(frozen=True)
class Instance:
    """One scored binary mask with a thing category.

    ``class_dist``, when present, is a distribution over the thing categories
    in catalog order plus one trailing background entry.
    """

    category: int
    score: float
    mask: RleMask
    class_dist: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "score", float(self.score))
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]")
        if self.category < 0:
            raise ValidationError("category must be non-negative")
        if self.mask.area == 0:
            raise ValidationError("instance mask must be nonempty")
        if self.class_dist is not None:
            dist = tuple(float(v) for v in self.class_dist)
            object.__setattr__(self, "class_dist", dist)
            if len(dist) < 2:
                raise ValidationError("class_dist needs at least two entries")
            if any(v < 0 or v > 1 for v in dist):
                raise ValidationError("class_dist values must lie in [0, 1]")
            if abs(sum(dist) - 1.0) > CLASS_DIST_TOL:
                raise ValidationError(
                    f"class_dist must sum to 1 within {CLASS_DIST_TOL}"
                )

    def validate_against(self, catalog) -> "Instance":
        if not catalog.is_thing(self.category):
            raise ValidationError(f"category {self.category} is not a thing category")
        if self.class_dist is not None:
            n_things = len(catalog.thing_ids)
            if len(self.class_dist) != n_things + 1:
                raise ValidationError(
                    f"class_dist has {len(self.class_dist)} entries, "
                    f"expected {n_things + 1}"
                )
            thing_part = self.class_dist[:n_things]
            best = max(range(n_things), key=lambda i: (thing_part[i], -i))
            if best != catalog.thing_slot(self.category):
                raise ValidationError(
                    "class_dist argmax over thing entries disagrees with category"
                )
        return self

    def confidence(self, catalog=None) -> float:
        """Detection confidence: the thing-category probability when a class
        distribution is available, otherwise the detector score."""
        if self.class_dist is not None and catalog is not None:
            return float(self.class_dist[catalog.thing_slot(self.category)])
        return self.score


@dataclass(frozen=True)
class InstanceSet:
    height: int
    width: int
    instances: tuple[Instance, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.height <= 0 or self.width <= 0:
            raise ValidationError("set dimensions must be positive")
        for inst in self.instances:
            if (inst.mask.height, inst.mask.width) != (self.height, self.width):
                raise ValidationError(
                    f"instance mask {(inst.mask.height, inst.mask.width)} does not "
                    f"match set dimensions {(self.height, self.width)}"
                )

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def validate_against(self, catalog) -> "InstanceSet":
        for inst in self.instances:
            inst.validate_against(catalog)
        return self

    def replace(self, instances) -> "InstanceSet":
        return InstanceSet(self.height, self.width, tuple(instances))
