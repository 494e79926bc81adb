import fractions

import numpy
import pytest

import exceptions
import geometry
from models.geometry import Rect, Transform


def random_rect(rng, size: int) -> Rect:
    left, right = sorted(rng.choice(size + 1, size=2, replace=False))
    top, bottom = sorted(rng.choice(size + 1, size=2, replace=False))
    return Rect.of(left, top, right, bottom)


def pixel_mask(r: Rect, size: int) -> numpy.ndarray:
    mask = numpy.zeros((size, size), dtype=bool)
    mask[r.top : r.bottom, r.left : r.right] = True
    return mask


def test_iou_matches_pixel_counting(rng):
    for _ in range(500):
        a, b = random_rect(rng, 32), random_rect(rng, 32)
        mask_a, mask_b = pixel_mask(a, 32), pixel_mask(b, 32)
        inter = int((mask_a & mask_b).sum())
        union = int((mask_a | mask_b).sum())
        assert geometry.intersection_area(a, b) == inter
        assert geometry.iou(a, b) == fractions.Fraction(inter, union)
        assert geometry.iou(a, b) == geometry.iou(b, a)


def test_iou_edge_cases():
    r = Rect.of(2, 3, 10, 7)
    assert geometry.iou(r, r) == 1
    # half-open rectangles sharing an edge do not overlap
    assert geometry.iou(r, Rect.of(10, 3, 12, 7)) == 0
    assert geometry.intersection(r, Rect.of(10, 3, 12, 7)) is None
    assert geometry.iou(Rect.of(0, 0, 4, 1), Rect.of(0, 0, 3, 1)) == fractions.Fraction(3, 4)


@pytest.mark.parametrize("coordinates", [(5, 0, 5, 3), (0, 4, 3, 2), (-1, 0, 2, 2)])
def test_degenerate_rectangles_are_rejected(coordinates):
    with pytest.raises(exceptions.DegenerateRectError):
        Rect.of(*coordinates)


def test_union_box_and_clip():
    assert geometry.union_box([Rect.of(5, 5, 6, 6), Rect.of(0, 2, 3, 4)]) == Rect.of(0, 2, 6, 6)
    with pytest.raises(ValueError):
        geometry.union_box([])
    assert geometry.clip(Rect.of(90, 10, 120, 20), (100, 100)) == Rect.of(90, 10, 100, 20)
    assert geometry.clip(Rect.of(100, 10, 120, 20), (100, 100)) is None


def test_expand_clamps_at_origin():
    assert geometry.expand(Rect.of(1, 5, 3, 7), 2) == Rect.of(0, 3, 5, 9)


def test_transform_rounds_outwards():
    t = Transform.scaling(fractions.Fraction(512, 1200))
    assert geometry.apply_transform(t, Rect.of(1, 1, 2, 2)) == Rect.of(0, 0, 1, 1)
    assert geometry.apply_transform(t, Rect.of(0, 0, 1200, 1200)) == Rect.of(0, 0, 512, 512)


def test_inverse_transform_covers_the_original(rng):
    t = Transform.scaling(fractions.Fraction(512, 1200), offset_x=3, offset_y=7)
    back = geometry.inverse_transform(t)
    for _ in range(200):
        r = random_rect(rng, 1000)
        restored = geometry.apply_transform(back, geometry.apply_transform(t, r))
        assert geometry.intersection(restored, r) == r


def test_transform_of_a_sub_pixel_box_is_degenerate():
    t = Transform(scale_x=1, scale_y=1, offset_x=-5, offset_y=0)
    with pytest.raises(exceptions.DegenerateRectError):
        geometry.apply_transform(t, Rect.of(1, 1, 3, 3))


def test_overlap_matrix_agrees_with_pairwise_areas(rng):
    a = [random_rect(rng, 64) for _ in range(7)]
    b = [random_rect(rng, 64) for _ in range(5)]
    inter, union = geometry.overlap_matrix(geometry.as_array(a), geometry.as_array(b))
    assert inter.shape == union.shape == (7, 5)
    for i, ra in enumerate(a):
        for j, rb in enumerate(b):
            assert inter[i, j] == geometry.intersection_area(ra, rb)
            assert fractions.Fraction(int(inter[i, j]), int(union[i, j])) == geometry.iou(ra, rb)


def test_as_array_of_nothing_has_four_columns():
    assert geometry.as_array([]).shape == (0, 4)


def lattice_rects(size: int):
    spans = [(low, high) for low in range(size) for high in range(low + 1, size + 1)]
    return [Rect.of(left, top, right, bottom) for left, right in spans for top, bottom in spans]


@pytest.mark.slow
def test_iou_of_every_pair_of_lattice_rectangles():
    size = 6
    rects = lattice_rects(size)
    assert len(rects) == 21 * 21
    masks = numpy.stack([pixel_mask(r, size).ravel() for r in rects]).astype(numpy.int64)
    inter = masks @ masks.T
    areas = masks.sum(axis=1)
    union = areas[:, None] + areas[None, :] - inter
    matrix_inter, matrix_union = geometry.overlap_matrix(geometry.as_array(rects), geometry.as_array(rects))
    assert numpy.array_equal(matrix_inter, inter)
    assert numpy.array_equal(matrix_union, union)
    for i, a in enumerate(rects):
        for j, b in enumerate(rects):
            assert geometry.iou(a, b) == fractions.Fraction(int(inter[i, j]), int(union[i, j]))
