"""Export in-memory predictions into prediction-container directories.

The container contract (mirrored from the consumer, not imported from it):
a directory with ``manifest.json`` declaring format_version 1, little byte
order, the category catalog, image dimensions and one entry per payload
(role, dtype, shape, file, hex SHA-256). Semantic probabilities are f32,
category-major C*H*W; instances are a canonical JSON list of
``{category, score, class_dist?, rle}`` with row-major run lengths that
alternate zero-run / one-run starting with a zero-run.

This module owns no label-processing logic; it only validates, serializes
and hashes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FORMAT_VERSION = 1
RENORM_TOL = 1e-3


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class CatalogSpec:
    """Category catalog description: (id, name, is_thing) triples plus the
    void id; ids must be contiguous from 0 and distinct from void."""

    categories: tuple[tuple[int, str, bool], ...]
    void_id: int

    def __post_init__(self):
        cats = tuple((int(i), str(n), bool(t)) for i, n, t in self.categories)
        object.__setattr__(self, "categories", cats)
        ids = [c[0] for c in cats]
        if ids != list(range(len(ids))) or not ids:
            raise ExportError(f"category ids must be contiguous from 0, got {ids}")
        if self.void_id in ids or self.void_id < 0:
            raise ExportError(f"invalid void id {self.void_id}")

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    @property
    def thing_ids(self) -> tuple[int, ...]:
        return tuple(i for i, _, t in self.categories if t)

    def to_manifest(self) -> dict:
        return {
            "categories": [
                {"id": i, "name": n, "is_thing": t} for i, n, t in self.categories
            ],
            "void_id": self.void_id,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CatalogSpec":
        try:
            return cls(
                tuple(
                    (c["id"], c["name"], c["is_thing"]) for c in doc["categories"]
                ),
                int(doc["void_id"]),
            )
        except (KeyError, TypeError) as exc:
            raise ExportError(f"malformed catalog description: {exc}") from exc


@dataclass(frozen=True)
class InstanceRecord:
    category: int
    score: float
    mask: np.ndarray  # (H, W) boolean
    class_dist: Optional[Sequence[float]] = None


@dataclass(frozen=True)
class ExportRequest:
    catalog: CatalogSpec
    out_path: str | Path
    semantic_probs: Optional[np.ndarray] = None  # (C, H, W) real tensor
    instances: Optional[Sequence[InstanceRecord]] = None


def mask_to_runs(mask: np.ndarray) -> list[int]:
    """Row-major run lengths, alternating zero/one runs, zero-run first."""
    flat = np.asarray(mask, dtype=bool).ravel()
    runs: list[int] = []
    value = False
    run = 0
    for bit in flat:
        if bool(bit) == value:
            run += 1
        else:
            runs.append(run)
            value = not value
            run = 1
    runs.append(run)
    return runs


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _normalize_probs(probs: np.ndarray, num_categories: int) -> np.ndarray:
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 3:
        raise ExportError("semantic probabilities must be a (C, H, W) tensor")
    if arr.shape[0] != num_categories:
        raise ExportError(
            f"tensor has {arr.shape[0]} categories, catalog has {num_categories}"
        )
    if np.any(arr < 0.0) or np.any(arr > 1.0 + RENORM_TOL):
        raise ExportError("probabilities must lie in [0, 1]")
    sums = arr.sum(axis=0)
    worst = float(np.abs(sums - 1.0).max())
    if worst > RENORM_TOL:
        raise ExportError(
            f"per-pixel probability sums deviate by {worst:.3g} (> {RENORM_TOL}); "
            "refusing to renormalize"
        )
    return (arr / sums).astype("<f4")


def _validate_instance(
    rec: InstanceRecord, catalog: CatalogSpec, height: int, width: int
) -> dict:
    mask = np.asarray(rec.mask, dtype=bool)
    if mask.shape != (height, width):
        raise ExportError(
            f"instance mask shape {mask.shape} does not match image {(height, width)}"
        )
    if not mask.any():
        raise ExportError("instance masks must be nonempty")
    if rec.category not in catalog.thing_ids:
        raise ExportError(f"category {rec.category} is not a thing category")
    score = float(rec.score)
    if not 0.0 <= score <= 1.0:
        raise ExportError(f"score {score} outside [0, 1]")
    entry = {
        "category": int(rec.category),
        "score": score,
        "rle": mask_to_runs(mask),
    }
    if rec.class_dist is not None:
        dist = [float(v) for v in rec.class_dist]
        n_things = len(catalog.thing_ids)
        if len(dist) != n_things + 1:
            raise ExportError(
                f"class_dist needs {n_things + 1} entries (things + background), "
                f"got {len(dist)}"
            )
        if abs(sum(dist) - 1.0) > RENORM_TOL:
            raise ExportError("class_dist must sum to 1")
        thing_slot = catalog.thing_ids.index(rec.category)
        if max(range(n_things), key=lambda i: (dist[i], -i)) != thing_slot:
            raise ExportError("class_dist argmax over things disagrees with category")
        entry["class_dist"] = dist
    return entry


def export_predictions(req: ExportRequest) -> Path:
    """Write a prediction container and return its path."""
    if req.semantic_probs is None and not req.instances:
        raise ExportError("nothing to export: provide probabilities and/or instances")

    dims = None
    payload_bytes: dict[str, bytes] = {}
    shapes: dict[str, tuple] = {}
    dtypes: dict[str, str] = {}

    if req.semantic_probs is not None:
        probs = _normalize_probs(
            np.asarray(req.semantic_probs), req.catalog.num_categories
        )
        dims = probs.shape[1:]
        payload_bytes["semantic_probs"] = probs.tobytes("C")
        shapes["semantic_probs"] = probs.shape
        dtypes["semantic_probs"] = "f32"

    if req.instances:
        mask_shape = np.asarray(req.instances[0].mask).shape
        if dims is not None and tuple(mask_shape) != tuple(dims):
            raise ExportError(
                f"instance masks {mask_shape} do not match tensor dims {tuple(dims)}"
            )
        dims = mask_shape
        entries = [
            _validate_instance(rec, req.catalog, dims[0], dims[1])
            for rec in req.instances
        ]
        data = _canonical_json(entries)
        payload_bytes["instance_set"] = data
        shapes["instance_set"] = (len(data),)
        dtypes["instance_set"] = "u8"

    out = Path(req.out_path)
    out.mkdir(parents=True, exist_ok=True)
    manifest_entries = []
    for role in sorted(payload_bytes):
        data = payload_bytes[role]
        filename = "instance_set.json" if role == "instance_set" else f"{role}.bin"
        (out / filename).write_bytes(data)
        manifest_entries.append(
            {
                "role": role,
                "dtype": dtypes[role],
                "shape": list(shapes[role]),
                "file": filename,
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "byte_order": "little",
        "catalog": req.catalog.to_manifest(),
        "height": int(dims[0]),
        "width": int(dims[1]),
        "payloads": manifest_entries,
    }
    (out / "manifest.json").write_bytes(
        json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8") + b"\n"
    )
    return out
