"""Bit-exact prediction container: a directory holding manifest.json plus raw
little-endian payload files, each integrity-checked by SHA-256.

Payload layouts (all little-endian, row-major):
  semantic_probs   f32, C*H*W values, category-major
  semantic_labels  u16, H*W category ids (void id allowed)
  panoptic         u16, H*W values encoding category * 1000 + instance id
  image            u8,  H*W*3 interleaved RGB
  entropy          f32, H*W values
  instance_set     canonical JSON list of {category, score, class_dist?, rle}
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from .catalog import ClassCatalog
from .errors import ContainerIOError, HashMismatchError, ValidationError
from .instances import Instance, InstanceSet
from .maps import EntropyMap, PanopticMap, RgbImage, SemanticLabelMap, SemanticProbMap
from .rle import RleMask

FORMAT_VERSION = 1
PANOPTIC_ENCODING_BASE = 1000

ROLES = (
    "semantic_probs",
    "semantic_labels",
    "instance_set",
    "panoptic",
    "image",
    "entropy",
)

_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("<u1"), "u16": np.dtype("<u2")}


def encode_panoptic(panoptic: PanopticMap) -> np.ndarray:
    cats = panoptic.categories.astype(np.int64)
    inst = panoptic.instance_ids.astype(np.int64)
    if int(inst.max(initial=0)) >= PANOPTIC_ENCODING_BASE:
        raise ValidationError(
            f"instance ids must stay below {PANOPTIC_ENCODING_BASE} for encoding"
        )
    encoded = cats * PANOPTIC_ENCODING_BASE + inst
    if int(encoded.max(initial=0)) > np.iinfo(np.uint16).max:
        raise ValidationError("encoded panoptic values overflow u16")
    return encoded.astype("<u2")


def decode_panoptic(values: np.ndarray, void_id: int) -> PanopticMap:
    cats = (values // PANOPTIC_ENCODING_BASE).astype(np.uint16)
    inst = (values % PANOPTIC_ENCODING_BASE).astype(np.uint16)
    return PanopticMap(cats, inst, void_id)


def _canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _instances_to_obj(instances: InstanceSet) -> list:
    out = []
    for inst in instances:
        entry = {
            "category": inst.category,
            "score": inst.score,
            "rle": list(inst.mask.runs),
        }
        if inst.class_dist is not None:
            entry["class_dist"] = list(inst.class_dist)
        out.append(entry)
    return out


def _instances_from_obj(obj, height: int, width: int) -> InstanceSet:
    if not isinstance(obj, list):
        raise ValidationError("instance_set payload must be a JSON list")
    instances = []
    for entry in obj:
        try:
            mask = RleMask(height, width, tuple(int(r) for r in entry["rle"]))
            instances.append(
                Instance(
                    int(entry["category"]),
                    float(entry["score"]),
                    mask,
                    tuple(float(v) for v in entry["class_dist"])
                    if "class_dist" in entry
                    else None,
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed instance entry: {exc}") from exc
    return InstanceSet(height, width, tuple(instances))


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_container(
    payloads: Mapping[str, object],
    path: str | Path,
    catalog: ClassCatalog,
    run_info: Mapping | None = None,
) -> Path:
    """Write typed payloads (role -> object) plus manifest.json.

    Payload files are written atomically and the manifest last, so a readable
    manifest implies complete payloads. ``run_info`` is echoed verbatim into
    the manifest for provenance.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    dims = None
    entries = []
    for role in sorted(payloads):
        value = payloads[role]
        if role not in ROLES:
            raise ValidationError(f"unknown payload role {role!r}")
        data, dtype, shape, role_dims = _serialize_payload(role, value)
        if dims is None:
            dims = role_dims
        elif role_dims != dims:
            raise ValidationError(
                f"payload {role!r} has dimensions {role_dims}, expected {dims}"
            )
        filename = f"{role}.bin" if role != "instance_set" else "instance_set.json"
        _atomic_write(path / filename, data)
        entries.append(
            {
                "role": role,
                "dtype": dtype,
                "shape": list(shape),
                "file": filename,
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
    if dims is None:
        raise ValidationError("container needs at least one payload")

    manifest = {
        "format_version": FORMAT_VERSION,
        "byte_order": "little",
        "catalog": catalog.to_dict(),
        "height": dims[0],
        "width": dims[1],
        "payloads": entries,
    }
    if run_info is not None:
        manifest["run"] = dict(run_info)
    _atomic_write(
        path / "manifest.json",
        json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8") + b"\n",
    )
    return path


def _serialize_payload(role: str, value):
    if role == "semantic_probs":
        if not isinstance(value, SemanticProbMap):
            raise ValidationError("semantic_probs payload must be a SemanticProbMap")
        arr = value.probs.astype("<f4")
        return arr.tobytes("C"), "f32", arr.shape, (value.height, value.width)
    if role == "semantic_labels":
        if not isinstance(value, SemanticLabelMap):
            raise ValidationError("semantic_labels payload must be a SemanticLabelMap")
        arr = value.labels.astype("<u2")
        return arr.tobytes("C"), "u16", arr.shape, (value.height, value.width)
    if role == "panoptic":
        if not isinstance(value, PanopticMap):
            raise ValidationError("panoptic payload must be a PanopticMap")
        arr = encode_panoptic(value)
        return arr.tobytes("C"), "u16", arr.shape, (value.height, value.width)
    if role == "image":
        if not isinstance(value, RgbImage):
            raise ValidationError("image payload must be an RgbImage")
        arr = value.samples.astype("<u1")
        return arr.tobytes("C"), "u8", arr.shape, (value.height, value.width)
    if role == "entropy":
        if not isinstance(value, EntropyMap):
            raise ValidationError("entropy payload must be an EntropyMap")
        arr = value.values.astype("<f4")
        return arr.tobytes("C"), "f32", arr.shape, (value.height, value.width)
    # instance_set
    if not isinstance(value, InstanceSet):
        raise ValidationError("instance_set payload must be an InstanceSet")
    data = _canonical_json_bytes(_instances_to_obj(value))
    return data, "u8", (len(data),), (value.height, value.width)


def read_container(path: str | Path) -> tuple[dict[str, object], ClassCatalog, dict]:
    """Read and validate a container; returns (payloads by role, catalog,
    manifest). Hashes, dtypes, shapes and value-level invariants are all
    checked; any unknown format version is rejected."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise ContainerIOError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed manifest {manifest_path}: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported container format_version {version!r}; "
            f"this reader understands {FORMAT_VERSION}"
        )
    if manifest.get("byte_order") != "little":
        raise ValidationError("only little-endian containers are supported")
    try:
        catalog = ClassCatalog.from_dict(manifest["catalog"])
        height = int(manifest["height"])
        width = int(manifest["width"])
        entries = manifest["payloads"]
    except KeyError as exc:
        raise ValidationError(f"manifest missing field {exc}") from exc

    payloads: dict[str, object] = {}
    for entry in entries:
        try:
            role = entry["role"]
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
            filename = entry["file"]
            digest = entry["sha256"]
        except KeyError as exc:
            raise ValidationError(f"payload entry missing field {exc}") from exc
        if role not in ROLES:
            raise ValidationError(f"unknown payload role {role!r}")
        if dtype not in _DTYPES:
            raise ValidationError(f"unknown payload dtype {dtype!r}")
        file_path = path / filename
        if not file_path.is_file():
            raise ContainerIOError(f"missing payload file: {file_path}")
        data = file_path.read_bytes()
        actual = hashlib.sha256(data).hexdigest()
        if actual != digest:
            raise HashMismatchError(role, digest, actual)
        payloads[role] = _deserialize_payload(
            role, dtype, shape, data, height, width, catalog
        )
    return payloads, catalog, manifest


def _deserialize_payload(role, dtype, shape, data, height, width, catalog):
    if role == "instance_set":
        try:
            obj = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"instance_set payload is not valid JSON: {exc}")
        return _instances_from_obj(obj, height, width).validate_against(catalog)

    expected_shapes = {
        "semantic_probs": (catalog.num_categories, height, width),
        "semantic_labels": (height, width),
        "panoptic": (height, width),
        "image": (height, width, 3),
        "entropy": (height, width),
    }
    expected_dtypes = {
        "semantic_probs": "f32",
        "semantic_labels": "u16",
        "panoptic": "u16",
        "image": "u8",
        "entropy": "f32",
    }
    if shape != expected_shapes[role]:
        raise ValidationError(
            f"payload {role!r}: manifest shape {shape} does not match "
            f"expected {expected_shapes[role]}"
        )
    if dtype != expected_dtypes[role]:
        raise ValidationError(
            f"payload {role!r}: dtype {dtype!r}, expected {expected_dtypes[role]!r}"
        )
    np_dtype = _DTYPES[dtype]
    expected_bytes = int(np.prod(shape)) * np_dtype.itemsize
    if len(data) != expected_bytes:
        raise ValidationError(
            f"payload {role!r}: {len(data)} bytes on disk, expected {expected_bytes}"
        )
    arr = np.frombuffer(data, dtype=np_dtype).reshape(shape)

    if role == "semantic_probs":
        return SemanticProbMap(arr)
    if role == "semantic_labels":
        return SemanticLabelMap(arr, catalog.void_id).validate_against(catalog)
    if role == "panoptic":
        return decode_panoptic(arr, catalog.void_id).validate_against(catalog)
    if role == "image":
        return RgbImage(arr)
    return EntropyMap(arr)
