"""Task-criteria configuration, two-stage scene-graph filtering, and binary
mask generation for task-critical image regions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .scene import Image, SceneGraph, SegmentationMap, Triplet, bbox_to_pixel_rect

BBox = tuple[float, float, float, float]


class DimensionMismatchError(ValueError):
    """Operands cover different rasters."""


@dataclass(frozen=True)
class TaskCriteria:
    """Subject classes and relation--object-class pairs critical to one task."""

    task_name: str
    critical_classes: frozenset[str] = frozenset()
    critical_relations: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "critical_classes", frozenset(self.critical_classes))
        object.__setattr__(
            self,
            "critical_relations",
            frozenset((str(r), str(o)) for r, o in self.critical_relations),
        )


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary pixel mask, row-major (H, W)."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must have shape (H, W), got {arr.shape}")
        arr = np.array(arr, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @classmethod
    def zeros(cls, width: int, height: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())


def _restrict_instances(sg: SceneGraph, triplets: Sequence[Triplet]) -> SceneGraph:
    # Keep only instances referenced by the surviving triplets, in original order.
    referenced = {t.subject_id for t in triplets} | {t.object_id for t in triplets}
    instances = tuple(inst for inst in sg.instances if inst.id in referenced)
    return SceneGraph(instances=instances, triplets=tuple(triplets))


def filter_semantic(sg: SceneGraph, crit: TaskCriteria) -> SceneGraph:
    """First stage: keep triplets whose subject class is task-critical."""
    by_id = sg.by_id()
    kept = [
        t
        for t in sg.triplets
        if t.subject_id in by_id and by_id[t.subject_id].class_label in crit.critical_classes
    ]
    return _restrict_instances(sg, kept)


def filter_instance(sg1: SceneGraph, crit: TaskCriteria) -> SceneGraph:
    """Second stage: keep triplets whose (relation, object class) pair is critical."""
    by_id = sg1.by_id()
    kept = [
        t
        for t in sg1.triplets
        if t.object_id in by_id
        and (t.relation, by_id[t.object_id].class_label) in crit.critical_relations
    ]
    return _restrict_instances(sg1, kept)


def critical_instances(sg2: SceneGraph) -> tuple[tuple[int, BBox], ...]:
    """Deduplicated subject instances of the filtered graph with their boxes, by id."""
    by_id = sg2.by_id()
    subjects = {t.subject_id for t in sg2.triplets}
    return tuple((sid, by_id[sid].bbox) for sid in sorted(subjects))


def semantic_mask(seg: SegmentationMap, crit: TaskCriteria) -> Mask:
    """Pixels whose semantic class is task-critical."""
    critical_indices = [
        idx for idx, name in seg.class_table.items() if name in crit.critical_classes
    ]
    bits = np.isin(seg.labels, critical_indices)
    return Mask(bits)


def instance_mask(boxes: Iterable[BBox], width: int, height: int) -> Mask:
    """Union of the pixel rects covered by the given normalized boxes."""
    bits = np.zeros((height, width), dtype=bool)
    for box in boxes:
        x_lo, y_lo, x_hi, y_hi = bbox_to_pixel_rect(box, width, height)
        bits[y_lo:y_hi, x_lo:x_hi] = True
    return Mask(bits)


def compose_and_apply(img: Image, m_sem: Mask, m_ins: Mask) -> tuple[Image, Mask]:
    """Intersect the two masks and zero every pixel outside the intersection."""
    dims = (img.width, img.height)
    if (m_sem.width, m_sem.height) != dims or (m_ins.width, m_ins.height) != dims:
        raise DimensionMismatchError(
            f"image {dims}, semantic mask {(m_sem.width, m_sem.height)}, "
            f"instance mask {(m_ins.width, m_ins.height)}"
        )
    combined = m_sem.bits & m_ins.bits
    masked = img.pixels * combined[:, :, None].astype(np.uint8)
    return Image(masked), Mask(combined)
