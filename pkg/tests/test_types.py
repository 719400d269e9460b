import numpy as np
import pytest

from crossview.catalog import Category, ClassCatalog
from crossview.errors import ValidationError
from crossview.instances import Instance, InstanceSet
from crossview.maps import (
    EntropyMap,
    PanopticMap,
    RgbImage,
    SemanticLabelMap,
    SemanticProbMap,
)
from crossview.rle import RleMask, rle_encode

from _generators import small_catalog


def test_catalog_requires_contiguous_ids():
    with pytest.raises(ValidationError):
        ClassCatalog((Category(0, "a", False), Category(2, "b", True)), void_id=5)


def test_catalog_void_must_not_collide():
    with pytest.raises(ValidationError):
        ClassCatalog((Category(0, "a", False), Category(1, "b", True)), void_id=1)


def test_catalog_thing_stuff_split():
    cat = small_catalog()
    assert cat.thing_ids == (2, 3)
    assert cat.stuff_ids == (0, 1)
    assert cat.thing_slot(3) == 1
    with pytest.raises(ValidationError):
        cat.thing_slot(0)


def test_prob_map_sum_tolerance():
    good = np.full((2, 1, 1), 0.5, dtype=np.float32)
    SemanticProbMap(good)
    bad = np.array([[[0.6]], [[0.6]]], dtype=np.float32)
    with pytest.raises(ValidationError):
        SemanticProbMap(bad)


def test_prob_map_rejects_out_of_range():
    with pytest.raises(ValidationError):
        SemanticProbMap(np.array([[[1.2]], [[-0.2]]], dtype=np.float32))


def test_prob_map_immutable():
    m = SemanticProbMap(np.full((2, 2, 2), 0.5, dtype=np.float32))
    with pytest.raises(ValueError):
        m.probs[0, 0, 0] = 1.0


def test_label_map_validate_against_catalog():
    cat = small_catalog()
    ok = SemanticLabelMap(np.array([[0, 4]], dtype=np.uint16), void_id=4)
    ok.validate_against(cat)
    bad = SemanticLabelMap(np.array([[9]], dtype=np.uint16), void_id=4)
    with pytest.raises(ValidationError):
        bad.validate_against(cat)


def test_entropy_map_range_checked():
    with pytest.raises(ValidationError):
        EntropyMap(np.array([[1.5]], dtype=np.float32))


def test_instance_validation():
    mask = rle_encode(np.ones((2, 2)))
    with pytest.raises(ValidationError):
        Instance(2, 1.5, mask)
    with pytest.raises(ValidationError):
        Instance(2, 0.5, RleMask(2, 2, (4,)))  # empty mask
    with pytest.raises(ValidationError):
        Instance(2, 0.5, mask, class_dist=(0.9, 0.2, 0.2))  # does not sum to 1


def test_instance_class_dist_argmax_checked_against_catalog():
    cat = small_catalog()
    mask = rle_encode(np.ones((2, 2)))
    good = Instance(3, 0.5, mask, class_dist=(0.1, 0.7, 0.2))
    good.validate_against(cat)
    wrong_argmax = Instance(2, 0.5, mask, class_dist=(0.1, 0.7, 0.2))
    with pytest.raises(ValidationError):
        wrong_argmax.validate_against(cat)
    wrong_len = Instance(2, 0.5, mask, class_dist=(0.5, 0.5))
    with pytest.raises(ValidationError):
        wrong_len.validate_against(cat)
    not_a_thing = Instance(0, 0.5, mask)
    with pytest.raises(ValidationError):
        not_a_thing.validate_against(cat)


def test_instance_set_dimension_check():
    mask = rle_encode(np.ones((2, 2)))
    with pytest.raises(ValidationError):
        InstanceSet(3, 3, (Instance(2, 0.5, mask),))


def test_panoptic_map_one_category_per_instance_id():
    cats = np.array([[2, 3]], dtype=np.uint16)
    inst = np.array([[1, 1]], dtype=np.uint16)
    with pytest.raises(ValidationError):
        PanopticMap(cats, inst, void_id=4)


def test_panoptic_map_validate_against_catalog():
    cat = small_catalog()
    good = PanopticMap(
        np.array([[2, 0]], dtype=np.uint16),
        np.array([[1, 0]], dtype=np.uint16),
        void_id=4,
    )
    good.validate_against(cat)
    stuff_with_id = PanopticMap(
        np.array([[0, 0]], dtype=np.uint16),
        np.array([[1, 0]], dtype=np.uint16),
        void_id=4,
    )
    with pytest.raises(ValidationError):
        stuff_with_id.validate_against(cat)


def test_rgb_image_shape():
    with pytest.raises(ValidationError):
        RgbImage(np.zeros((2, 2), dtype=np.uint8))
    RgbImage(np.zeros((2, 2, 3), dtype=np.uint8))
