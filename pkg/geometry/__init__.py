"""Integer rectangle arithmetic, intersection-over-union and coordinate transforms"""
import fractions
import math
import typing

import numpy

import exceptions
from models.geometry import Rect, ScoredRect, Transform

__all__ = [
    "Rect",
    "ScoredRect",
    "Transform",
    "iou",
    "aspect_ratio",
    "intersection",
    "intersection_area",
    "union_box",
    "clip",
    "expand",
    "apply_transform",
    "as_array",
    "overlap_matrix",
    "inverse_transform",
]


def intersection_area(a: Rect, b: Rect) -> int:
    width = min(a.right, b.right) - max(a.left, b.left)
    height = min(a.bottom, b.bottom) - max(a.top, b.top)
    if width <= 0 or height <= 0:
        return 0
    return width * height


def iou(a: Rect, b: Rect) -> fractions.Fraction:
    """
    Calculate the intersection-over-union of two rectangles

    The areas are computed with integers and divided once, so the result is exact.

    :param a: The first rectangle
    :param b: The second rectangle
    :return: The intersection-over-union in [0, 1]
    """
    inter = intersection_area(a, b)
    if inter == 0:
        return fractions.Fraction(0)
    return fractions.Fraction(inter, a.area + b.area - inter)


def aspect_ratio(r: Rect) -> fractions.Fraction:
    """Width divided by height"""
    return fractions.Fraction(r.width, r.height)


def intersection(a: Rect, b: Rect) -> typing.Optional[Rect]:
    """The overlapping region of both rectangles or None if they do not overlap"""
    left, top = max(a.left, b.left), max(a.top, b.top)
    right, bottom = min(a.right, b.right), min(a.bottom, b.bottom)
    if left >= right or top >= bottom:
        return None
    return Rect.of(left, top, right, bottom)


def union_box(rects: typing.Iterable[Rect]) -> Rect:
    """
    The tight bounding box of all rectangles

    :raises ValueError: No rectangle was supplied
    """
    rects = list(rects)
    if not rects:
        raise ValueError("The union of zero rectangles is undefined")
    return Rect.of(
        min(r.left for r in rects),
        min(r.top for r in rects),
        max(r.right for r in rects),
        max(r.bottom for r in rects),
    )


def clip(r: Rect, bounds: typing.Tuple[int, int]) -> typing.Optional[Rect]:
    """Clip a rectangle to a (width, height) area anchored at the origin"""
    width, height = bounds
    return intersection(r, Rect.of(0, 0, width, height))


def expand(r: Rect, px: int) -> Rect:
    """Grow the rectangle by px on every side. The result is clamped at the origin"""
    return Rect.of(max(0, r.left - px), max(0, r.top - px), r.right + px, r.bottom + px)


def apply_transform(t: Transform, r: Rect) -> Rect:
    """
    Transform a rectangle

    The coordinates are scaled in exact rational arithmetic and offset afterwards. The left and
    top edges are rounded down and the right and bottom edges are rounded up, so the transformed
    rectangle never loses a covered pixel.

    :param t: The transformation
    :param r: The rectangle
    :return: The transformed rectangle
    :raises exceptions.DegenerateRectError: The result has no area or negative coordinates
    """
    left = math.floor(r.left * t.scale_x + t.offset_x)
    top = math.floor(r.top * t.scale_y + t.offset_y)
    right = math.ceil(r.right * t.scale_x + t.offset_x)
    bottom = math.ceil(r.bottom * t.scale_y + t.offset_y)
    if left >= right or top >= bottom:
        raise exceptions.DegenerateRectError((left, top, right, bottom), "The transformed box is smaller than a pixel")
    return Rect.of(left, top, right, bottom)


def inverse_transform(t: Transform) -> Transform:
    """The transformation undoing t"""
    return Transform(
        scale_x=1 / t.scale_x,
        scale_y=1 / t.scale_y,
        offset_x=-t.offset_x / t.scale_x,
        offset_y=-t.offset_y / t.scale_y,
    )


def as_array(rects: typing.Iterable[Rect]) -> numpy.ndarray:
    """Stack rectangles into an (N, 4) int64 array of (left, top, right, bottom)"""
    array = numpy.array([r.as_tuple() for r in rects], dtype=numpy.int64)
    return array.reshape(-1, 4)


def overlap_matrix(a: numpy.ndarray, b: numpy.ndarray) -> typing.Tuple[numpy.ndarray, numpy.ndarray]:
    """
    The pairwise intersection and union areas of two rectangle arrays

    :param a: (N, 4) array of rectangles
    :param b: (M, 4) array of rectangles
    :return: The (N, M) intersection areas and the (N, M) union areas, both exact integers
    """
    a = a[:, None, :]
    b = b[None, :, :]
    width = numpy.clip(numpy.minimum(a[..., 2], b[..., 2]) - numpy.maximum(a[..., 0], b[..., 0]), 0, None)
    height = numpy.clip(numpy.minimum(a[..., 3], b[..., 3]) - numpy.maximum(a[..., 1], b[..., 1]), 0, None)
    inter = width * height
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    return inter, area_a + area_b - inter
