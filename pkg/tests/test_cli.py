import json

import numpy as np
import pytest

from crossview.catalog import default_catalog
from crossview.cli import main
from crossview.config import PipelineConfig
from crossview.containers import read_container, write_container
from crossview.fusion import fuse_panoptic
from crossview.intertask import regularize_instances, regularize_semantic
from crossview.interstyle import unify_instances, unify_semantic
from crossview.selection import (
    compute_class_balanced_weights,
    compute_instance_weights,
    select_instances,
    select_semantic,
)

from _generators import random_panoptic, small_catalog


def _tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def synth_scene(tmp_path):
    out = tmp_path / "scenes"
    assert main(["synth", "--seed", "3", "--scenes", "2", "--out", str(out), "--quiet"]) == 0
    return out


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_1(capsys):
    assert main(["eval", "--pred", "x", "--gt", "y", "--out", "z", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_no_subcommand_exits_1(capsys):
    assert main([]) == 1


def test_missing_container_exits_2(tmp_path, capsys):
    code = main(
        ["fuse", "--in", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]
    )
    assert code == 2


def test_validation_error_exits_1(tmp_path, synth_scene, capsys):
    # gt container has no semantic_probs/instance_set payloads
    code = main(
        [
            "select",
            "--in",
            str(synth_scene / "scene_0000" / "gt"),
            "--out",
            str(tmp_path / "o"),
        ]
    )
    assert code == 1


def test_bad_config_exits_1(tmp_path, synth_scene):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"fusion": {"bogus_key": 1}}))
    code = main(
        [
            "fuse",
            "--in",
            str(synth_scene / "scene_0000" / "gt"),
            "--out",
            str(tmp_path / "o"),
            "--config",
            str(cfg),
        ]
    )
    assert code == 1


def test_eval_identical_containers_mpq_one(tmp_path, synth_scene, capsys):
    gt = synth_scene / "scene_0000" / "gt"
    report_path = tmp_path / "report.json"
    code = main(["eval", "--pred", str(gt), "--gt", str(gt), "--out", str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["mpq"] == 1.0 and report["msq"] == 1.0 and report["mrq"] == 1.0
    table = capsys.readouterr().out
    assert "category" in table and "mean" in table


def test_eval_directory_trees_and_jobs_invariance(tmp_path, synth_scene):
    preds = tmp_path / "preds"
    gts = tmp_path / "gts"
    catalog = default_catalog()
    rng = np.random.default_rng(0)
    for i in range(3):
        name = f"img_{i}"
        write_container(
            {"panoptic": random_panoptic(rng, catalog, 12, 12)}, preds / name, catalog
        )
        write_container(
            {"panoptic": random_panoptic(rng, catalog, 12, 12)}, gts / name, catalog
        )
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    assert main(["eval", "--pred", str(preds), "--gt", str(gts), "--out", str(out1), "--quiet"]) == 0
    assert main(
        ["eval", "--pred", str(preds), "--gt", str(gts), "--out", str(out2), "--jobs", "3", "--quiet"]
    ) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_synth_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["synth", "--seed", "5", "--scenes", "2", "--out", str(a), "--quiet"]) == 0
    assert main(["synth", "--seed", "5", "--scenes", "2", "--out", str(b), "--quiet", "--jobs", "2"]) == 0
    assert _tree_bytes(a) == _tree_bytes(b)


def test_full_pipeline_matches_library(tmp_path, synth_scene):
    """select -> itr -> isr -> fuse via the CLI equals direct library calls."""
    view1 = synth_scene / "scene_0000" / "view1"
    view2 = synth_scene / "scene_0000" / "view2"
    cfg = PipelineConfig()

    sel_dir = tmp_path / "sel"
    itr_dir = tmp_path / "itr"
    isr_dir = tmp_path / "isr"
    fuse_dir = tmp_path / "fused"
    assert main(["select", "--in", str(view1), "--out", str(sel_dir), "--quiet"]) == 0
    assert main(["itr", "--in", str(view1), "--out", str(itr_dir), "--quiet"]) == 0
    assert main(
        ["isr", "--view1", str(view1), "--view2", str(view2), "--out", str(isr_dir), "--quiet"]
    ) == 0
    assert main(["fuse", "--in", str(itr_dir), "--out", str(fuse_dir), "--quiet"]) == 0

    payloads1, catalog, _ = read_container(view1)
    payloads2, _, _ = read_container(view2)
    probs, inst = payloads1["semantic_probs"], payloads1["instance_set"]
    w_sem = compute_class_balanced_weights([probs], cfg.selection, catalog)
    w_inst = compute_instance_weights([inst], cfg.instance_selection, catalog)
    sem_pl = select_semantic(probs, w_sem, catalog.void_id)
    inst_pl = select_instances(inst, w_inst, catalog)

    got_sel, _, _ = read_container(sel_dir)
    assert np.array_equal(got_sel["semantic_labels"].labels, sem_pl.labels)
    assert got_sel["instance_set"].instances == inst_pl.instances

    inst_r = regularize_instances(inst, probs, sem_pl, inst_pl, cfg.itr)
    sem_r = regularize_semantic(probs, sem_pl, inst_pl, cfg.itr)
    got_itr, _, _ = read_container(itr_dir)
    assert np.array_equal(got_itr["semantic_labels"].labels, sem_r.labels)
    assert got_itr["instance_set"].instances == inst_r.instances

    sem_u = unify_semantic(probs, payloads2["semantic_probs"], w_sem, catalog.void_id)
    inst_u = unify_instances(inst, payloads2["instance_set"], w_inst, cfg.isr, catalog)
    got_isr, _, _ = read_container(isr_dir)
    assert np.array_equal(got_isr["semantic_labels"].labels, sem_u.labels)
    assert got_isr["instance_set"].instances == inst_u.instances

    fused = fuse_panoptic(inst_r, sem_r, cfg.fusion, catalog)
    got_fused, _, _ = read_container(fuse_dir)
    assert np.array_equal(got_fused["panoptic"].categories, fused.categories)
    assert np.array_equal(got_fused["panoptic"].instance_ids, fused.instance_ids)


def test_stylize_with_explicit_ref(tmp_path, synth_scene):
    out = tmp_path / "styled"
    code = main(
        [
            "stylize",
            "--in",
            str(synth_scene / "scene_0000" / "view1"),
            "--ref",
            str(synth_scene / "scene_0001" / "view1"),
            "--out",
            str(out),
            "--quiet",
        ]
    )
    assert code == 0
    payloads, _, _ = read_container(out)
    assert payloads["image"].samples.shape[2] == 3


def test_stylize_ref_pool_seeded(tmp_path, synth_scene):
    pool = synth_scene / "scene_0001"
    a = tmp_path / "a"
    b = tmp_path / "b"
    args = [
        "stylize",
        "--in",
        str(synth_scene / "scene_0000" / "view1"),
        "--ref-pool",
        str(pool),
        "--seed",
        "9",
        "--quiet",
    ]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert _tree_bytes(a) == _tree_bytes(b)


def test_stylize_requires_exactly_one_ref(tmp_path, synth_scene):
    code = main(
        [
            "stylize",
            "--in",
            str(synth_scene / "scene_0000" / "view1"),
            "--out",
            str(tmp_path / "o"),
        ]
    )
    assert code == 1


def test_experiment_deterministic_and_jobs_invariant(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"synth": {"height": 96, "width": 96, "n_things": 8}}))
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    base = ["experiment", "--seed", "11", "--scenes", "5", "--config", str(cfg), "--quiet"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--jobs", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert [row["variant"] for row in doc["rows"]] == [
        "select",
        "select+itr",
        "select+isr",
        "select+itr+isr",
    ]


def test_help_exits_zero():
    assert main(["--help"]) == 0
