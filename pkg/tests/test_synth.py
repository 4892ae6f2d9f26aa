from __future__ import annotations

import json

import numpy as np
import pytest

from inscomsim.filtering import TaskCriteria, semantic_mask
from inscomsim.pipeline import load_scene
from inscomsim.scene import validate_scene
from inscomsim.synth import (
    PlacementError,
    SyntheticSpec,
    gen_synthetic,
    parse_synthetic_spec,
)

VOCAB = ("car", "person", "sign")
RELS = ("on", "near")


def spec_with(seed=1, count=(2, 2), size=(64, 64)):
    return SyntheticSpec(
        width=size[0],
        height=size[1],
        min_instances=count[0],
        max_instances=count[1],
        classes=VOCAB,
        relations=RELS,
        seed=seed,
    )


def test_zero_instance_spec_gives_background_only_scene(tmp_path):
    gen = gen_synthetic(spec_with(count=(0, 0)), tmp_path)
    assert gen.record.instances == ()
    assert gen.record.triplets == ()
    img, seg, sg = load_scene(gen.record, tmp_path)
    assert set(np.unique(seg.labels)) == {0}
    assert validate_scene(sg, seg, img).ok


def test_generated_scene_validates(tmp_path):
    gen = gen_synthetic(spec_with(seed=5, count=(1, 4)), tmp_path)
    img, seg, sg = load_scene(gen.record, tmp_path)
    assert validate_scene(sg, seg, img).ok
    assert len(sg.triplets) == len(sg.instances) - 1  # one edge per rectangle


def test_semantic_mask_popcount_equals_rectangle_area(tmp_path):
    gen = gen_synthetic(spec_with(seed=9, count=(2, 2)), tmp_path)
    img, seg, sg = load_scene(gen.record, tmp_path)
    classes = frozenset(i.class_label for i in sg.instances if i.id != 0)
    crit = TaskCriteria("t", classes, frozenset())
    mask = semantic_mask(seg, crit)
    assert mask.popcount == int((seg.labels != 0).sum())
    # rectangle pixels are exactly the non-background labels
    rect_area = 0
    for inst in sg.instances:
        if inst.id == 0:
            continue
        x1, y1, x2, y2 = inst.bbox
        from inscomsim.scene import bbox_to_pixel_rect

        x_lo, y_lo, x_hi, y_hi = bbox_to_pixel_rect(inst.bbox, img.width, img.height)
        rect_area += (x_hi - x_lo) * (y_hi - y_lo)
    assert mask.popcount == rect_area


def test_same_seed_gives_bit_identical_files(tmp_path):
    a = gen_synthetic(spec_with(seed=12), tmp_path / "a")
    b = gen_synthetic(spec_with(seed=12), tmp_path / "b")
    for pa, pb in (
        (a.image_path, b.image_path),
        (a.seg_path, b.seg_path),
        (a.annotation_path, b.annotation_path),
    ):
        assert pa.read_bytes() == pb.read_bytes()


def test_different_seeds_differ(tmp_path):
    a = gen_synthetic(spec_with(seed=1), tmp_path / "a")
    b = gen_synthetic(spec_with(seed=2), tmp_path / "b")
    assert a.image_path.read_bytes() != b.image_path.read_bytes()


def test_infeasible_placement_raises(tmp_path):
    spec = SyntheticSpec(
        width=16,
        height=16,
        min_instances=30,
        max_instances=30,
        classes=VOCAB,
        relations=RELS,
        seed=3,
    )
    with pytest.raises(PlacementError):
        gen_synthetic(spec, tmp_path)


def test_spec_dimension_floor():
    with pytest.raises(ValueError):
        SyntheticSpec(
            width=8, height=64, min_instances=0, max_instances=0,
            classes=VOCAB, relations=RELS, seed=0,
        )


def test_parse_synthetic_spec_round_trip():
    doc = {
        "width": 64,
        "height": 48,
        "instances": [1, 3],
        "classes": list(VOCAB),
        "relations": list(RELS),
        "seed": 11,
    }
    spec = parse_synthetic_spec(json.dumps(doc))
    assert spec == SyntheticSpec(64, 48, 1, 3, VOCAB, RELS, 11)
