import json

import pytest

from crossview.config import PipelineConfig, config_from_dict, load_config
from crossview.errors import ValidationError


def test_defaults_round_trip():
    cfg = PipelineConfig()
    doc = cfg.to_dict()
    assert doc["selection"] == {"target_fraction": 0.5, "min_threshold": 0.05}
    assert doc["fusion"]["stuff_min_area"] == 2048
    again = config_from_dict(json.loads(json.dumps(doc)))
    assert again.to_dict() == doc


def test_partial_document_fills_defaults():
    cfg = config_from_dict({"selection": {"target_fraction": 0.8}})
    assert cfg.selection.target_fraction == 0.8
    assert cfg.selection.min_threshold == 0.05
    assert cfg.fusion.overlap_keep_fraction == 0.5


def test_unknown_section_rejected():
    with pytest.raises(ValidationError, match="unknown config sections"):
        config_from_dict({"selektion": {}})


def test_unknown_key_rejected():
    with pytest.raises(ValidationError, match="unknown keys"):
        config_from_dict({"fusion": {"stuff_area": 3}})


def test_invalid_value_rejected():
    with pytest.raises(ValidationError):
        config_from_dict({"selection": {"target_fraction": 2.0}})


def test_synth_noise_accepts_mapping_and_list():
    a = config_from_dict({"synth": {"noise": {"semantic_stuff_acc": 0.8}}})
    assert a.synth.noise.semantic_stuff_acc == 0.8
    b = config_from_dict({"synth": {"noise": [0.8, 0.5, 0.7, 0.07, 0.2]}})
    assert b.synth.noise.semantic_stuff_acc == 0.8


def test_load_config_from_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"itr": {"consistency_threshold": 0.7}}))
    cfg = load_config(path)
    assert cfg.itr.consistency_threshold == 0.7
    assert load_config(None).itr.consistency_threshold == 0.5


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{nope")
    with pytest.raises(ValidationError):
        load_config(path)
