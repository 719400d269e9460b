"""Category catalog: ids, names, thing/stuff split and the void label."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    is_thing: bool


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered category metadata plus the void (ignore) id.

    Category ids must be unique and contiguous from 0; the void id must not
    collide with any category id.
    """

    categories: tuple[Category, ...]
    void_id: int
    _thing_index: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cats = tuple(
            c if isinstance(c, Category) else Category(*c) for c in self.categories
        )
        object.__setattr__(self, "categories", cats)
        if not cats:
            raise ValidationError("catalog needs at least one category")
        ids = [c.id for c in cats]
        if ids != list(range(len(cats))):
            raise ValidationError(f"category ids must be contiguous from 0, got {ids}")
        if self.void_id in set(ids):
            raise ValidationError(f"void_id {self.void_id} collides with a category id")
        if self.void_id < 0:
            raise ValidationError("void_id must be non-negative")
        things = [c.id for c in cats if c.is_thing]
        object.__setattr__(
            self, "_thing_index", {cid: i for i, cid in enumerate(things)}
        )

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    @property
    def thing_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.categories if c.is_thing)

    @property
    def stuff_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.categories if not c.is_thing)

    def is_thing(self, category_id: int) -> bool:
        return category_id in self._thing_index

    def is_stuff(self, category_id: int) -> bool:
        return 0 <= category_id < len(self.categories) and not self.is_thing(category_id)

    def thing_slot(self, category_id: int) -> int:
        """Position of a thing category inside a thing-class distribution.

        Thing distributions are laid out as thing categories in catalog order
        followed by one trailing background entry.
        """
        try:
            return self._thing_index[category_id]
        except KeyError:
            raise ValidationError(f"category {category_id} is not a thing category")

    def name_of(self, category_id: int) -> str:
        if category_id == self.void_id:
            return "void"
        return self.categories[category_id].name

    def require_things_and_stuff(self):
        if not self.thing_ids or not self.stuff_ids:
            raise ValidationError(
                "fusion requires at least one thing and one stuff category"
            )

    def to_dict(self) -> dict:
        return {
            "categories": [
                {"id": c.id, "name": c.name, "is_thing": c.is_thing}
                for c in self.categories
            ],
            "void_id": self.void_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassCatalog":
        try:
            cats = tuple(
                Category(int(c["id"]), str(c["name"]), bool(c["is_thing"]))
                for c in d["categories"]
            )
            return cls(cats, int(d["void_id"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed catalog description: {exc}") from exc


def default_catalog() -> ClassCatalog:
    """Eight-category street-scene style catalog used by the synthetic benchmark."""
    return ClassCatalog(
        categories=(
            Category(0, "sky", False),
            Category(1, "vegetation", False),
            Category(2, "road", False),
            Category(3, "sidewalk", False),
            Category(4, "car", True),
            Category(5, "person", True),
            Category(6, "cycle", True),
            Category(7, "animal", True),
        ),
        void_id=8,
    )
