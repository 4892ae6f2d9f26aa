"""Bit-exact file formats: binary netpbm rasters, JSON annotations and
criteria, and the results CSV."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .filtering import Mask, TaskCriteria
from .scene import (
    Image,
    Instance,
    SceneGraph,
    SegmentationMap,
    Triplet,
    validate_graph,
)

_WHITESPACE = b" \t\n\r\v\f"


class FormatError(ValueError):
    """Base class for file-content errors."""


class MalformedHeaderError(FormatError):
    pass


class TruncatedDataError(FormatError):
    pass


class UnsupportedMaxvalError(FormatError):
    pass


class InvalidMaskValueError(FormatError):
    """Mask rasters must contain only the samples 0 and 255."""


class SchemaError(ValueError):
    """JSON document violates the expected schema; carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class MissingFieldError(SchemaError):
    pass


class TypeMismatchError(SchemaError):
    pass


class InvariantViolationError(ValueError):
    """Parsed annotation fails scene-graph validation."""

    def __init__(self, issues):
        self.issues = tuple(issues)
        details = "; ".join(f"{i.kind}: {i.detail}" for i in self.issues)
        super().__init__(f"annotation violates scene invariants: {details}")


# ---------------------------------------------------------------------------
# Binary netpbm
# ---------------------------------------------------------------------------


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace/comment-delimited tokens plus the single
    whitespace byte that separates the header from the raster."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise MalformedHeaderError("unexpected end of file inside header")
        c = data[i : i + 1]
        if c in _WHITESPACE:
            i += 1
            continue
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in b"\r\n":
                i += 1
            continue
        j = i
        while j < len(data) and data[j : j + 1] not in _WHITESPACE:
            j += 1
        tokens.append(data[i:j])
        i = j
    if i >= len(data) or data[i : i + 1] not in _WHITESPACE:
        raise MalformedHeaderError("missing whitespace between header and raster")
    return tokens, i + 1


def _parse_netpbm(data: bytes, magic: bytes, samples_per_pixel: int):
    tokens, offset = _header_tokens(data, 4)
    if tokens[0] != magic:
        raise MalformedHeaderError(
            f"expected magic {magic.decode()}, got {tokens[0][:8]!r}"
        )
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-numeric header field: {exc}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"dimensions must be positive, got {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"only maxval 255 is supported, got {maxval}")
    expected = width * height * samples_per_pixel
    raster = data[offset:]
    if len(raster) < expected:
        raise TruncatedDataError(
            f"raster holds {len(raster)} bytes, expected {expected}"
        )
    if len(raster) > expected:
        raise MalformedHeaderError(f"{len(raster) - expected} trailing bytes after raster")
    return width, height, np.frombuffer(raster, dtype=np.uint8).copy()


def read_ppm(path: str | Path) -> Image:
    """Binary color pixmap (P6, maxval 255) to an Image."""
    width, height, samples = _parse_netpbm(Path(path).read_bytes(), b"P6", 3)
    return Image.from_flat(width, height, 3, samples)


def write_ppm(img: Image, path: str | Path) -> None:
    if img.channels != 3:
        raise ValueError(f"P6 stores 3 channels, image has {img.channels}")
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def _read_pgm_samples(path: str | Path) -> tuple[int, int, np.ndarray]:
    width, height, samples = _parse_netpbm(Path(path).read_bytes(), b"P5", 1)
    return width, height, samples.reshape(height, width)


def _write_pgm_samples(samples: np.ndarray, path: str | Path) -> None:
    height, width = samples.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + samples.astype(np.uint8).tobytes())


def read_mask(path: str | Path) -> Mask:
    """Binary graymap to a Mask; bit = 1 iff the sample is 255."""
    _, _, samples = _read_pgm_samples(path)
    bad = np.unique(samples[(samples != 0) & (samples != 255)])
    if bad.size:
        raise InvalidMaskValueError(
            f"mask samples must be 0 or 255, found {bad.tolist()}"
        )
    return Mask(samples == 255)


def write_mask(mask: Mask, path: str | Path) -> None:
    _write_pgm_samples(mask.bits.astype(np.uint8) * 255, path)


def read_segmentation(path: str | Path, class_table: Mapping[int, str]) -> SegmentationMap:
    """Binary graymap of class indices plus a caller-supplied label table."""
    _, _, samples = _read_pgm_samples(path)
    return SegmentationMap(labels=samples, class_table=class_table)


def write_segmentation(seg: SegmentationMap, path: str | Path) -> None:
    if int(seg.labels.max(initial=0)) > 255:
        raise ValueError("segmentation label indices above 255 cannot be stored")
    _write_pgm_samples(seg.labels.astype(np.uint8), path)


# ---------------------------------------------------------------------------
# Annotation and criteria JSON
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    """One image's annotation: file references, dimensions, label table, graph."""

    image_path: str
    seg_path: str
    width: int
    height: int
    class_table: dict[int, str]
    instances: tuple[Instance, ...]
    triplets: tuple[Triplet, ...]

    def to_scene_graph(self) -> SceneGraph:
        return SceneGraph(instances=self.instances, triplets=self.triplets)


def _field_path(path: str, key: str) -> str:
    return key if not path else f"{path}.{key}"


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatchError(path, f"expected integer, got {type(value).__name__}")
    return value


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatchError(path, f"expected number, got {type(value).__name__}")
    return float(value)


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise TypeMismatchError(path, f"expected string, got {type(value).__name__}")
    return value


def _as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise TypeMismatchError(path, f"expected array, got {type(value).__name__}")
    return value


def _as_object(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise TypeMismatchError(path, f"expected object, got {type(value).__name__}")
    return value


def _get(obj: Mapping[str, Any], key: str, path: str) -> Any:
    obj = _as_object(obj, path or "$")
    if key not in obj:
        raise MissingFieldError(_field_path(path, key), "missing field")
    return obj[key]


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise TypeMismatchError("$", f"invalid JSON: {exc}") from None


def parse_annotation(text: str) -> AnnotationRecord:
    """Parse and structurally validate one annotation document.

    Unknown fields are ignored. Scene-graph invariant violations (dangling
    triplet references, bad boxes, duplicate ids) raise
    InvariantViolationError; checks that need the referenced raster files are
    deferred to scene loading.
    """
    root = _as_object(_load_json(text), "$")
    image_path = _as_str(_get(root, "image", ""), "image")
    seg_path = _as_str(_get(root, "segmentation", ""), "segmentation")
    width = _as_int(_get(root, "width", ""), "width")
    height = _as_int(_get(root, "height", ""), "height")

    table_raw = _as_object(_get(root, "class_table", ""), "class_table")
    class_table: dict[int, str] = {}
    for key, value in table_raw.items():
        path = f"class_table.{key}"
        try:
            idx = int(key)
        except ValueError:
            raise TypeMismatchError(path, "key is not an integer index") from None
        class_table[idx] = _as_str(value, path)

    instances = []
    for i, entry in enumerate(_as_list(_get(root, "instances", ""), "instances")):
        path = f"instances[{i}]"
        entry = _as_object(entry, path)
        bbox_raw = _as_list(_get(entry, "bbox", path), f"{path}.bbox")
        if len(bbox_raw) != 4:
            raise TypeMismatchError(f"{path}.bbox", f"expected 4 numbers, got {len(bbox_raw)}")
        bbox = tuple(_as_float(v, f"{path}.bbox[{j}]") for j, v in enumerate(bbox_raw))
        feature = None
        if "feature" in entry:
            hex_text = _as_str(entry["feature"], f"{path}.feature")
            try:
                feature = bytes.fromhex(hex_text)
            except ValueError:
                raise TypeMismatchError(f"{path}.feature", "not a hex string") from None
        instances.append(
            Instance(
                id=_as_int(_get(entry, "id", path), f"{path}.id"),
                class_label=_as_str(_get(entry, "class", path), f"{path}.class"),
                score=_as_float(_get(entry, "score", path), f"{path}.score"),
                bbox=bbox,
                feature=feature,
            )
        )

    triplets = []
    for i, entry in enumerate(_as_list(_get(root, "triplets", ""), "triplets")):
        path = f"triplets[{i}]"
        entry = _as_object(entry, path)
        triplets.append(
            Triplet(
                subject_id=_as_int(_get(entry, "subject", path), f"{path}.subject"),
                relation=_as_str(_get(entry, "relation", path), f"{path}.relation"),
                object_id=_as_int(_get(entry, "object", path), f"{path}.object"),
            )
        )

    record = AnnotationRecord(
        image_path=image_path,
        seg_path=seg_path,
        width=width,
        height=height,
        class_table=class_table,
        instances=tuple(instances),
        triplets=tuple(triplets),
    )
    report = validate_graph(record.to_scene_graph())
    if not report.ok:
        raise InvariantViolationError(report.issues)
    return record


def serialize_annotation(record: AnnotationRecord) -> str:
    instances = []
    for inst in record.instances:
        entry: dict[str, Any] = {
            "id": inst.id,
            "class": inst.class_label,
            "score": inst.score,
            "bbox": list(inst.bbox),
        }
        if inst.feature is not None:
            entry["feature"] = inst.feature.hex()
        instances.append(entry)
    doc = {
        "image": record.image_path,
        "segmentation": record.seg_path,
        "width": record.width,
        "height": record.height,
        "class_table": {str(k): v for k, v in sorted(record.class_table.items())},
        "instances": instances,
        "triplets": [
            {"subject": t.subject_id, "relation": t.relation, "object": t.object_id}
            for t in record.triplets
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_criteria(text: str) -> TaskCriteria:
    """Parse a task-criteria document; duplicate entries collapse into sets."""
    root = _as_object(_load_json(text), "$")
    task = _as_str(_get(root, "task", ""), "task")
    classes = [
        _as_str(v, f"critical_classes[{i}]")
        for i, v in enumerate(_as_list(_get(root, "critical_classes", ""), "critical_classes"))
    ]
    relations = []
    for i, entry in enumerate(
        _as_list(_get(root, "critical_relations", ""), "critical_relations")
    ):
        path = f"critical_relations[{i}]"
        entry = _as_object(entry, path)
        relations.append(
            (
                _as_str(_get(entry, "relation", path), f"{path}.relation"),
                _as_str(_get(entry, "object_class", path), f"{path}.object_class"),
            )
        )
    return TaskCriteria(
        task_name=task,
        critical_classes=frozenset(classes),
        critical_relations=frozenset(relations),
    )


def serialize_criteria(crit: TaskCriteria) -> str:
    doc = {
        "task": crit.task_name,
        "critical_classes": sorted(crit.critical_classes),
        "critical_relations": [
            {"relation": r, "object_class": o} for r, o in sorted(crit.critical_relations)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Results CSV
# ---------------------------------------------------------------------------

# Fixed column order; the trailing error column is empty for successful trials.
RESULT_COLUMNS = (
    "image_id",
    "scheme",
    "eta",
    "snr_db",
    "seed",
    "payload_symbols",
    "side_symbol_equiv",
    "cbr",
    "psnr_db",
    "tc_psnr_db",
    "tc_pixel_count",
    "error",
)


def format_cell(value: Any) -> str:
    """Deterministic cell text; non-finite floats use the inf/nan sentinels."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def write_results_csv(rows: Sequence[Mapping[str, Any]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="ascii") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([format_cell(row.get(col)) for col in RESULT_COLUMNS])
