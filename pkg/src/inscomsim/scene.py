"""Domain types for annotated scenes: images, instances, relation triplets,
segmentation maps, and structural validation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

# Smallest image side the block codec handles without falling back to padding-only
# content; validation reports smaller images instead of rejecting them at
# construction so that tiny rasters can still round-trip through file I/O.
MIN_CODEC_DIM = 8

# Validation issue kinds.
DANGLING_REFERENCE = "dangling-reference"
SELF_RELATION = "self-relation"
DUPLICATE_INSTANCE_ID = "duplicate-instance-id"
DUPLICATE_TRIPLET = "duplicate-triplet"
BBOX_OUT_OF_RANGE = "bbox-out-of-range"
SCORE_OUT_OF_RANGE = "score-out-of-range"
DIMENSION_MISMATCH = "dimension-mismatch"
UNKNOWN_LABEL_INDEX = "unknown-label-index"
IMAGE_TOO_SMALL = "image-too-small"


class UnknownInstanceError(KeyError):
    """A scene-graph lookup referenced an absent instance id."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit raster, row-major (H, W, C), 1 (gray) or 3 (color) channels."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 3:
            raise ValueError(f"pixels must have shape (H, W, C), got {arr.shape}")
        h, w, c = arr.shape
        if c not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {c}")
        if h < 1 or w < 1:
            raise ValueError(f"image dimensions must be positive, got {w}x{h}")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("pixel samples must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(np.array(arr, dtype=np.uint8)))

    @classmethod
    def from_flat(cls, width: int, height: int, channels: int, samples) -> "Image":
        buf = np.asarray(samples, dtype=np.uint8)
        if buf.size != width * height * channels:
            raise ValueError(
                f"buffer holds {buf.size} samples, expected {width * height * channels}"
            )
        return cls(buf.reshape(height, width, channels))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class Instance:
    """Detected object instance.

    The feature payload is carried opaquely for lossless annotation round
    trips; nothing in the pipeline interprets it. Range violations (bbox
    ordering, score bounds) are reported by validate_scene rather than
    rejected here, so that invalid annotations remain representable.
    """

    id: int
    class_label: str
    score: float
    bbox: tuple[float, float, float, float]
    feature: Optional[bytes] = None

    def __post_init__(self) -> None:
        if len(self.bbox) != 4:
            raise ValueError(f"bbox needs 4 coordinates, got {len(self.bbox)}")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))


@dataclass(frozen=True)
class Triplet:
    """Directed subject--relation--object edge between two instances."""

    subject_id: int
    relation: str
    object_id: int


@dataclass(frozen=True, eq=False)
class SceneGraph:
    """Instances plus relation triplets for one image."""

    instances: tuple[Instance, ...] = ()
    triplets: tuple[Triplet, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "triplets", tuple(self.triplets))

    def by_id(self) -> dict[int, Instance]:
        return {inst.id: inst for inst in self.instances}


def lookup_instance(sg: SceneGraph, instance_id: int) -> Instance:
    for inst in sg.instances:
        if inst.id == instance_id:
            return inst
    raise UnknownInstanceError(f"no instance with id {instance_id}")


@dataclass(frozen=True, eq=False)
class SegmentationMap:
    """Per-pixel semantic class indices with an index-to-label table."""

    labels: np.ndarray
    class_table: Mapping[int, str]

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"labels must have shape (H, W), got {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("label indices must be non-negative")
        object.__setattr__(self, "labels", _frozen(np.array(arr, dtype=np.int32)))
        object.__setattr__(
            self, "class_table", dict((int(k), str(v)) for k, v in self.class_table.items())
        )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def kinds(self) -> set[str]:
        return {issue.kind for issue in self.issues}


def bbox_to_pixel_rect(
    bbox: tuple[float, float, float, float], width: int, height: int
) -> tuple[int, int, int, int]:
    """Map a normalized box to the half-open pixel rect [x_lo, x_hi) x [y_lo, y_hi).

    Low edges floor, high edges ceil, clamped to the raster, so a box never
    loses covered pixels to rounding.
    """
    x1, y1, x2, y2 = bbox
    x_lo = min(max(math.floor(x1 * width), 0), width)
    x_hi = min(max(math.ceil(x2 * width), 0), width)
    y_lo = min(max(math.floor(y1 * height), 0), height)
    y_hi = min(max(math.ceil(y2 * height), 0), height)
    return x_lo, y_lo, x_hi, y_hi


def _graph_issues(sg: SceneGraph) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    seen_ids: set[int] = set()
    for inst in sg.instances:
        if inst.id in seen_ids:
            issues.append(
                ValidationIssue(DUPLICATE_INSTANCE_ID, f"instance id {inst.id} repeats")
            )
        seen_ids.add(inst.id)
        x1, y1, x2, y2 = inst.bbox
        if not (0.0 <= x1 < x2 <= 1.0 and 0.0 <= y1 < y2 <= 1.0):
            issues.append(
                ValidationIssue(
                    BBOX_OUT_OF_RANGE,
                    f"instance {inst.id} bbox {inst.bbox} violates 0<=lo<hi<=1",
                )
            )
        if not (0.0 <= inst.score <= 1.0) or math.isnan(inst.score):
            issues.append(
                ValidationIssue(
                    SCORE_OUT_OF_RANGE, f"instance {inst.id} score {inst.score} outside [0,1]"
                )
            )
    known = {inst.id for inst in sg.instances}
    seen_triplets: set[tuple[int, str, int]] = set()
    for t in sg.triplets:
        key = (t.subject_id, t.relation, t.object_id)
        if key in seen_triplets:
            issues.append(ValidationIssue(DUPLICATE_TRIPLET, f"triplet {key} repeats"))
        seen_triplets.add(key)
        if t.subject_id == t.object_id:
            issues.append(
                ValidationIssue(SELF_RELATION, f"triplet {key} relates instance to itself")
            )
        for role, ref in (("subject", t.subject_id), ("object", t.object_id)):
            if ref not in known:
                issues.append(
                    ValidationIssue(
                        DANGLING_REFERENCE, f"triplet {key} {role} id {ref} not in instances"
                    )
                )
    return issues


def validate_graph(sg: SceneGraph) -> ValidationReport:
    """Check scene-graph-internal invariants; file-independent subset of validate_scene."""
    return ValidationReport(tuple(_graph_issues(sg)))


def validate_scene(sg: SceneGraph, seg: SegmentationMap, img: Image) -> ValidationReport:
    """Report every violated invariant of the (graph, segmentation, image) triple.

    Never raises; an empty report means the scene is valid.
    """
    issues = _graph_issues(sg)
    if img.width < MIN_CODEC_DIM or img.height < MIN_CODEC_DIM:
        issues.append(
            ValidationIssue(
                IMAGE_TOO_SMALL,
                f"image {img.width}x{img.height} below codec floor "
                f"{MIN_CODEC_DIM}x{MIN_CODEC_DIM}",
            )
        )
    if (seg.width, seg.height) != (img.width, img.height):
        issues.append(
            ValidationIssue(
                DIMENSION_MISMATCH,
                f"segmentation {seg.width}x{seg.height} vs image {img.width}x{img.height}",
            )
        )
    present = np.unique(seg.labels)
    for idx in present.tolist():
        if idx not in seg.class_table:
            issues.append(
                ValidationIssue(UNKNOWN_LABEL_INDEX, f"label index {idx} missing from class table")
            )
    return ValidationReport(tuple(issues))
