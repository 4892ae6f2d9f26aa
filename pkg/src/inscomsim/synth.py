"""Deterministic synthetic scene fixtures: flat-color rectangles over a
textured background, with matching segmentation and annotation files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import (
    AnnotationRecord,
    _as_int,
    _as_list,
    _as_object,
    _as_str,
    _get,
    _load_json,
    serialize_annotation,
    write_ppm,
    write_segmentation,
)
from .scene import Image, Instance, SegmentationMap, Triplet, validate_scene

IMAGE_NAME = "image.ppm"
SEG_NAME = "seg.pgm"
ANNOTATION_NAME = "scene.json"

_PLACEMENT_TRIES = 200
# Quarter-pixel inset keeps floor/ceil pixel conversion exact under floating-
# point rounding of the normalized coordinates.
_EDGE_INSET = 0.25


class PlacementError(RuntimeError):
    """Requested instances cannot be placed without overlap."""


@dataclass(frozen=True)
class SyntheticSpec:
    width: int
    height: int
    min_instances: int
    max_instances: int
    classes: tuple[str, ...]
    relations: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.width < 16 or self.height < 16:
            raise ValueError(f"fixture must be at least 16x16, got {self.width}x{self.height}")
        if not (0 <= self.min_instances <= self.max_instances):
            raise ValueError("instance count range must satisfy 0 <= min <= max")
        if self.max_instances > 0 and (not self.classes or not self.relations):
            raise ValueError("class and relation vocabularies must be non-empty")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "relations", tuple(self.relations))


def parse_synthetic_spec(text: str) -> SyntheticSpec:
    root = _as_object(_load_json(text), "$")
    count_range = _as_list(_get(root, "instances", ""), "instances")
    if len(count_range) != 2:
        raise ValueError("instances must be a [min, max] pair")
    return SyntheticSpec(
        width=_as_int(_get(root, "width", ""), "width"),
        height=_as_int(_get(root, "height", ""), "height"),
        min_instances=_as_int(count_range[0], "instances[0]"),
        max_instances=_as_int(count_range[1], "instances[1]"),
        classes=tuple(
            _as_str(v, f"classes[{i}]")
            for i, v in enumerate(_as_list(_get(root, "classes", ""), "classes"))
        ),
        relations=tuple(
            _as_str(v, f"relations[{i}]")
            for i, v in enumerate(_as_list(_get(root, "relations", ""), "relations"))
        ),
        seed=_as_int(_get(root, "seed", ""), "seed"),
    )


@dataclass(frozen=True)
class GeneratedScene:
    image_path: Path
    seg_path: Path
    annotation_path: Path
    record: AnnotationRecord


def _background(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    base = np.linspace(100.0, 150.0, width)[None, :, None]
    noise = rng.integers(-26, 27, size=(height, width, 3))
    return np.clip(base + noise, 0, 255).astype(np.uint8)


def _rect_color(index: int) -> tuple[int, int, int]:
    # Spread over mid-range values; distinct for any realistic instance count.
    return (
        40 + (index * 73) % 176,
        60 + (index * 101) % 156,
        50 + (index * 151) % 166,
    )


def _place_rects(
    rng: np.random.Generator, count: int, width: int, height: int
) -> list[tuple[int, int, int, int]]:
    rects: list[tuple[int, int, int, int]] = []
    max_w = max(8, width // 3)
    max_h = max(8, height // 3)
    for _ in range(count):
        placed = False
        for _ in range(_PLACEMENT_TRIES):
            rw = int(rng.integers(6, max_w + 1))
            rh = int(rng.integers(6, max_h + 1))
            x0 = int(rng.integers(0, width - rw + 1))
            y0 = int(rng.integers(0, height - rh + 1))
            candidate = (x0, y0, x0 + rw, y0 + rh)
            if all(
                candidate[2] <= r[0] or r[2] <= candidate[0]
                or candidate[3] <= r[1] or r[3] <= candidate[1]
                for r in rects
            ):
                rects.append(candidate)
                placed = True
                break
        if not placed:
            raise PlacementError(
                f"could not place {count} non-overlapping rectangles in "
                f"{width}x{height} after {_PLACEMENT_TRIES} tries each"
            )
    return rects


def inset_bbox(
    rect: tuple[int, int, int, int], width: int, height: int
) -> tuple[float, float, float, float]:
    """Normalized box whose pixel conversion reproduces the rect exactly."""
    x0, y0, x1, y1 = rect
    return (
        (x0 + _EDGE_INSET) / width,
        (y0 + _EDGE_INSET) / height,
        (x1 - _EDGE_INSET) / width,
        (y1 - _EDGE_INSET) / height,
    )


def gen_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> GeneratedScene:
    """Write a fixture triple (image, segmentation, annotation) into out_dir.

    The scene is fully determined by the spec: identical specs produce
    bit-identical files. Rectangle pixels are labeled with their class, the
    rest of the raster with "background", and each rectangle instance is
    linked to the background instance by one relation triplet.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    count = int(rng.integers(spec.min_instances, spec.max_instances + 1))

    pixels = _background(rng, spec.width, spec.height)
    labels = np.zeros((spec.height, spec.width), dtype=np.int32)
    rects = _place_rects(rng, count, spec.width, spec.height)

    class_table: dict[int, str] = {0: "background"}
    class_index: dict[str, int] = {}
    instances: list[Instance] = []
    triplets: list[Triplet] = []
    if count > 0:
        instances.append(
            Instance(id=0, class_label="background", score=1.0, bbox=(0.0, 0.0, 1.0, 1.0))
        )
    for i, rect in enumerate(rects):
        x0, y0, x1, y1 = rect
        cls = spec.classes[int(rng.integers(len(spec.classes)))]
        rel = spec.relations[int(rng.integers(len(spec.relations)))]
        if cls not in class_index:
            class_index[cls] = len(class_table)
            class_table[class_index[cls]] = cls
        pixels[y0:y1, x0:x1] = _rect_color(i)
        labels[y0:y1, x0:x1] = class_index[cls]
        score = float(np.round(rng.uniform(0.5, 1.0), 3))
        instances.append(
            Instance(
                id=i + 1,
                class_label=cls,
                score=score,
                bbox=inset_bbox(rect, spec.width, spec.height),
            )
        )
        triplets.append(Triplet(subject_id=i + 1, relation=rel, object_id=0))

    record = AnnotationRecord(
        image_path=IMAGE_NAME,
        seg_path=SEG_NAME,
        width=spec.width,
        height=spec.height,
        class_table=class_table,
        instances=tuple(instances),
        triplets=tuple(triplets),
    )

    img = Image(pixels)
    seg = SegmentationMap(labels=labels, class_table=class_table)
    report = validate_scene(record.to_scene_graph(), seg, img)
    if not report.ok:  # construction guarantees validity; guard regressions
        raise AssertionError(f"generated scene is invalid: {report.issues}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    image_path = out / IMAGE_NAME
    seg_path = out / SEG_NAME
    annotation_path = out / ANNOTATION_NAME
    write_ppm(img, image_path)
    write_segmentation(seg, seg_path)
    annotation_path.write_text(serialize_annotation(record), encoding="utf-8")
    return GeneratedScene(
        image_path=image_path,
        seg_path=seg_path,
        annotation_path=annotation_path,
        record=record,
    )
