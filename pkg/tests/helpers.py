"""Shared fixture builders for the test suite."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from inscomsim.filtering import TaskCriteria
from inscomsim.formats import AnnotationRecord, serialize_annotation, write_ppm, write_segmentation
from inscomsim.scene import Image, Instance, SceneGraph, SegmentationMap, Triplet
from inscomsim.synth import inset_bbox


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def random_image(seed: int, width: int, height: int, channels: int = 3) -> Image:
    return Image(rng_for(seed).integers(0, 256, (height, width, channels), dtype=np.uint8))


def textured_scene(
    width: int,
    height: int,
    rect: tuple[int, int, int, int],
    seed: int,
    bg_amp: int = 36,
    patch_amp: int = 40,
) -> tuple[Image, SegmentationMap, SceneGraph, TaskCriteria]:
    """Crafted scene: one textured target patch over a textured background.

    Both regions sit at mid-gray mean so neither dominates the transmitted
    energy; the patch is where the task information lives.
    """
    rng = rng_for(seed)
    pixels = np.clip(
        128 + rng.integers(-bg_amp, bg_amp + 1, (height, width, 3)), 0, 255
    ).astype(np.uint8)
    labels = np.zeros((height, width), dtype=np.int32)
    x0, y0, x1, y1 = rect
    pixels[y0:y1, x0:x1] = np.clip(
        128 + rng.integers(-patch_amp, patch_amp + 1, (y1 - y0, x1 - x0, 3)), 0, 255
    )
    labels[y0:y1, x0:x1] = 1
    img = Image(pixels)
    seg = SegmentationMap(labels=labels, class_table={0: "background", 1: "target"})
    sg = SceneGraph(
        instances=(
            Instance(id=0, class_label="background", score=1.0, bbox=(0.0, 0.0, 1.0, 1.0)),
            Instance(id=1, class_label="target", score=0.9, bbox=inset_bbox(rect, width, height)),
        ),
        triplets=(Triplet(subject_id=1, relation="on", object_id=0),),
    )
    criteria = TaskCriteria(
        task_name="patch",
        critical_classes=frozenset({"target"}),
        critical_relations=frozenset({("on", "background")}),
    )
    return img, seg, sg, criteria


def write_scene_dir(
    out_dir: Path,
    img: Image,
    seg: SegmentationMap,
    sg: SceneGraph,
    name: str = "scene",
) -> Path:
    """Write image/segmentation/annotation files and return the annotation path."""
    out_dir.mkdir(parents=True, exist_ok=True)
    image_name = f"{name}.ppm"
    seg_name = f"{name}.pgm"
    write_ppm(img, out_dir / image_name)
    write_segmentation(seg, out_dir / seg_name)
    record = AnnotationRecord(
        image_path=image_name,
        seg_path=seg_name,
        width=img.width,
        height=img.height,
        class_table=dict(seg.class_table),
        instances=sg.instances,
        triplets=sg.triplets,
    )
    ann_path = out_dir / f"{name}.json"
    ann_path.write_text(serialize_annotation(record), encoding="utf-8")
    return ann_path


def write_manifest(out_dir: Path, annotation_paths: list[Path], name: str = "manifest.json") -> Path:
    manifest = out_dir / name
    manifest.write_text(
        json.dumps([str(p.relative_to(out_dir)) for p in annotation_paths]) + "\n",
        encoding="utf-8",
    )
    return manifest


def pedestrian_scene() -> tuple[Image, SegmentationMap, SceneGraph, TaskCriteria]:
    """Street scene used across filtering tests: one woman on the street, one
    on the sidewalk, plus a building; only the street walker is task-critical."""
    width = height = 32
    rng = rng_for(99)
    pixels = np.clip(
        120 + rng.integers(-20, 21, (height, width, 3)), 0, 255
    ).astype(np.uint8)
    labels = np.zeros((height, width), dtype=np.int32)
    table = {0: "street", 1: "woman", 2: "sidewalk", 3: "building"}
    regions = {
        1: (2, 2, 10, 14),
        2: (16, 0, 32, 8),
        3: (20, 20, 30, 30),
    }
    for label, (x0, y0, x1, y1) in regions.items():
        labels[y0:y1, x0:x1] = label
    woman_street = Instance(1, "woman", 0.95, inset_bbox(regions[1], width, height))
    woman_sidewalk = Instance(2, "woman", 0.90, inset_bbox((18, 1, 26, 7), width, height))
    street = Instance(3, "street", 0.99, (0.0, 0.4, 1.0, 1.0))
    sidewalk = Instance(4, "sidewalk", 0.97, inset_bbox(regions[2], width, height))
    building = Instance(5, "building", 0.92, inset_bbox(regions[3], width, height))
    sg = SceneGraph(
        instances=(woman_street, woman_sidewalk, street, sidewalk, building),
        triplets=(
            Triplet(1, "walking on", 3),
            Triplet(2, "walking on", 4),
            Triplet(5, "next to", 3),
        ),
    )
    criteria = TaskCriteria(
        task_name="pedestrian_warning",
        critical_classes=frozenset({"man", "woman"}),
        critical_relations=frozenset({("walking on", "street"), ("on", "crosswalk")}),
    )
    return Image(pixels), SegmentationMap(labels, table), sg, criteria
