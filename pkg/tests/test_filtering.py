from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inscomsim.filtering import (
    DimensionMismatchError,
    Mask,
    TaskCriteria,
    compose_and_apply,
    critical_instances,
    filter_instance,
    filter_semantic,
    instance_mask,
    semantic_mask,
)
from inscomsim.scene import (
    Image,
    Instance,
    SceneGraph,
    SegmentationMap,
    Triplet,
    bbox_to_pixel_rect,
)

from helpers import pedestrian_scene, random_image, rng_for

CLASSES = ["woman", "man", "car", "street", "sidewalk", "building", "sky", "dog"]
RELATIONS = ["walking on", "on", "next to", "behind"]


def triplet_keys(sg: SceneGraph) -> set[tuple[int, str, int]]:
    return {(t.subject_id, t.relation, t.object_id) for t in sg.triplets}


def random_graph(rng, n_instances=10, n_triplets=20) -> SceneGraph:
    instances = tuple(
        Instance(
            id=i,
            class_label=CLASSES[int(rng.integers(len(CLASSES)))],
            score=float(rng.uniform(0, 1)),
            bbox=(0.1, 0.1, 0.6, 0.6),
        )
        for i in range(n_instances)
    )
    triplets = []
    seen = set()
    for _ in range(n_triplets):
        s, o = rng.choice(n_instances, size=2, replace=False)
        rel = RELATIONS[int(rng.integers(len(RELATIONS)))]
        key = (int(s), rel, int(o))
        if key in seen:
            continue
        seen.add(key)
        triplets.append(Triplet(*key))
    return SceneGraph(instances=instances, triplets=tuple(triplets))


def random_criteria(rng) -> TaskCriteria:
    classes = frozenset(
        CLASSES[i] for i in rng.choice(len(CLASSES), size=int(rng.integers(0, 4)), replace=False)
    )
    relations = frozenset(
        (RELATIONS[int(rng.integers(len(RELATIONS)))], CLASSES[int(rng.integers(len(CLASSES)))])
        for _ in range(int(rng.integers(0, 5)))
    )
    return TaskCriteria("random", classes, relations)


def test_semantic_filter_keeps_critical_subjects():
    _, _, sg, criteria = pedestrian_scene()
    sg1 = filter_semantic(sg, criteria)
    assert triplet_keys(sg1) == {(1, "walking on", 3), (2, "walking on", 4)}
    # the building subject is gone, and so is every unreferenced instance
    assert {i.id for i in sg1.instances} == {1, 2, 3, 4}


def test_instance_filter_keeps_critical_relation_object_pairs():
    _, _, sg, criteria = pedestrian_scene()
    sg2 = filter_instance(filter_semantic(sg, criteria), criteria)
    # the sidewalk walker is discarded; only the street walker remains
    assert triplet_keys(sg2) == {(1, "walking on", 3)}
    assert {i.id for i in sg2.instances} == {1, 3}


def test_empty_critical_classes_filters_everything():
    _, _, sg, _ = pedestrian_scene()
    empty = TaskCriteria("none", frozenset(), frozenset())
    sg1 = filter_semantic(sg, empty)
    assert sg1.triplets == () and sg1.instances == ()


def test_empty_critical_relations_filters_everything():
    _, _, sg, criteria = pedestrian_scene()
    sg1 = filter_semantic(sg, criteria)
    sg2 = filter_instance(sg1, TaskCriteria("none", criteria.critical_classes, frozenset()))
    assert sg2.triplets == ()


def test_two_stage_filter_matches_brute_force_scan():
    rng = rng_for(7)
    for _ in range(100):
        sg = random_graph(rng, n_instances=12, n_triplets=30)
        criteria = random_criteria(rng)
        got = filter_instance(filter_semantic(sg, criteria), criteria)
        by_id = sg.by_id()
        expected = {
            (t.subject_id, t.relation, t.object_id)
            for t in sg.triplets
            if by_id[t.subject_id].class_label in criteria.critical_classes
            and (t.relation, by_id[t.object_id].class_label) in criteria.critical_relations
        }
        assert triplet_keys(got) == expected


def test_filter_pipeline_is_shrinking():
    rng = rng_for(21)
    for _ in range(50):
        sg = random_graph(rng)
        criteria = random_criteria(rng)
        sg1 = filter_semantic(sg, criteria)
        sg2 = filter_instance(sg1, criteria)
        assert triplet_keys(sg2) <= triplet_keys(sg1) <= triplet_keys(sg)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_enlarging_criteria_never_drops_triplets(data):
    rng = rng_for(data.draw(st.integers(0, 10_000)))
    sg = random_graph(rng)
    base_classes = data.draw(st.frozensets(st.sampled_from(CLASSES), max_size=3))
    extra_classes = data.draw(st.frozensets(st.sampled_from(CLASSES), max_size=3))
    pairs = st.tuples(st.sampled_from(RELATIONS), st.sampled_from(CLASSES))
    base_rel = data.draw(st.frozensets(pairs, max_size=3))
    extra_rel = data.draw(st.frozensets(pairs, max_size=3))
    small = TaskCriteria("s", base_classes, base_rel)
    large = TaskCriteria("l", base_classes | extra_classes, base_rel | extra_rel)
    kept_small = triplet_keys(filter_instance(filter_semantic(sg, small), small))
    kept_large = triplet_keys(filter_instance(filter_semantic(sg, large), large))
    assert kept_small <= kept_large


def test_critical_instances_deduplicates_subjects():
    woman = Instance(1, "woman", 0.9, (0.1, 0.1, 0.4, 0.4))
    street = Instance(2, "street", 0.9, (0.0, 0.5, 1.0, 1.0))
    crossing = Instance(3, "crosswalk", 0.9, (0.2, 0.5, 0.8, 1.0))
    lamp = Instance(4, "lamp", 0.9, (0.8, 0.0, 0.9, 0.4))
    sg2 = SceneGraph(
        instances=(woman, street, crossing, lamp),
        triplets=(
            Triplet(1, "walking on", 2),
            Triplet(1, "on", 3),
            Triplet(1, "next to", 4),
        ),
    )
    subjects = critical_instances(sg2)
    assert subjects == ((1, woman.bbox),)


def test_critical_instances_empty_graph():
    assert critical_instances(SceneGraph()) == ()


def test_semantic_mask_empty_and_full():
    labels = np.zeros((8, 8), dtype=np.int32)
    labels[:4] = 1
    seg = SegmentationMap(labels, {0: "road", 1: "person"})
    none = semantic_mask(seg, TaskCriteria("t", frozenset(), frozenset()))
    assert none.popcount == 0
    full = semantic_mask(seg, TaskCriteria("t", frozenset({"road", "person"}), frozenset()))
    assert full.popcount == 64


def test_semantic_mask_matches_pixel_loop():
    rng = rng_for(5)
    labels = rng.integers(0, 3, (32, 32)).astype(np.int32)
    table = {0: "road", 1: "person", 2: "sky"}
    seg = SegmentationMap(labels, table)
    crit = TaskCriteria("t", frozenset({"person"}), frozenset())
    mask = semantic_mask(seg, crit)
    for i in range(32):
        for j in range(32):
            assert mask.bits[i, j] == (table[int(labels[i, j])] in crit.critical_classes)


def test_instance_mask_empty_and_full():
    assert instance_mask([], 16, 16).popcount == 0
    assert instance_mask([(0.0, 0.0, 1.0, 1.0)], 16, 16).popcount == 256


def test_instance_mask_union_matches_point_in_box_loop():
    boxes = [(0.1, 0.1, 0.5, 0.6), (0.4, 0.3, 0.9, 0.8)]
    mask = instance_mask(boxes, 64, 64)
    rects = [bbox_to_pixel_rect(b, 64, 64) for b in boxes]
    for i in range(64):
        for j in range(64):
            inside = any(x0 <= j < x1 and y0 <= i < y1 for (x0, y0, x1, y1) in rects)
            assert bool(mask.bits[i, j]) == inside


def test_compose_identity_and_zero():
    img = random_image(3, 16, 16)
    ones = Mask(np.ones((16, 16), dtype=bool))
    zeros = Mask.zeros(16, 16)
    out, m_t = compose_and_apply(img, ones, ones)
    assert np.array_equal(out.pixels, img.pixels)
    assert m_t.popcount == 256
    out, m_t = compose_and_apply(img, ones, zeros)
    assert not out.pixels.any()
    assert m_t.popcount == 0


def test_compose_matches_elementwise_product():
    rng = rng_for(11)
    img = random_image(4, 24, 24)
    m_sem = Mask(rng.random((24, 24)) < 0.5)
    m_ins = Mask(rng.random((24, 24)) < 0.5)
    out, m_t = compose_and_apply(img, m_sem, m_ins)
    for i in range(24):
        for j in range(24):
            both = m_sem.bits[i, j] and m_ins.bits[i, j]
            assert bool(m_t.bits[i, j]) == both
            expected = img.pixels[i, j] if both else np.zeros(3, dtype=np.uint8)
            assert np.array_equal(out.pixels[i, j], expected)


def test_compose_dimension_mismatch_raises():
    img = random_image(1, 16, 16)
    with pytest.raises(DimensionMismatchError):
        compose_and_apply(img, Mask.zeros(16, 16), Mask.zeros(8, 8))


def test_mask_intersection_popcount_bound():
    rng = rng_for(13)
    for _ in range(25):
        a = Mask(rng.random((12, 12)) < rng.uniform(0.2, 0.8))
        b = Mask(rng.random((12, 12)) < rng.uniform(0.2, 0.8))
        img = random_image(int(rng.integers(1000)), 12, 12)
        _, m_t = compose_and_apply(img, a, b)
        assert m_t.popcount <= min(a.popcount, b.popcount)
        assert np.array_equal(m_t.bits, a.bits & b.bits)


def test_sequential_masking_equals_single_composition():
    rng = rng_for(17)
    img = random_image(8, 16, 16)
    m_sem = Mask(rng.random((16, 16)) < 0.6)
    m_ins = Mask(rng.random((16, 16)) < 0.6)
    ones = Mask(np.ones((16, 16), dtype=bool))
    once, m_t = compose_and_apply(img, m_sem, m_ins)
    first, _ = compose_and_apply(img, m_sem, ones)
    second, _ = compose_and_apply(first, ones, m_ins)
    assert np.array_equal(once.pixels, second.pixels)


def test_masks_are_deterministic():
    _, seg, sg, criteria = pedestrian_scene()
    a = semantic_mask(seg, criteria)
    b = semantic_mask(seg, criteria)
    assert np.array_equal(a.bits, b.bits)
