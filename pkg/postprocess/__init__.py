"""Cropping detections to the connected components of page ink they contain or touch"""
import collections
import logging
import typing

import cv2
import numpy

import geometry
from models.geometry import Rect
from models.windowing import PageImage

_logger = logging.getLogger(__name__)


def binarize_raster(pixels: numpy.ndarray) -> numpy.ndarray:
    """
    Separate dark ink from a light background with Otsu's threshold

    A raster with a single gray value has no usable histogram, its pixels are ink if they are
    darker than mid-gray.

    :param pixels: The 8-bit grayscale raster
    :return: A boolean mask which is True on ink
    """
    if pixels.size == 0:
        return numpy.zeros(pixels.shape, dtype=bool)
    if int(pixels.max()) == int(pixels.min()):
        return numpy.full(pixels.shape, int(pixels.flat[0]) < 128, dtype=bool)
    threshold, _ = cv2.threshold(pixels, 0, 255, cv2.THRESH_BINARY + cv2.THRESH_OTSU)
    return pixels <= threshold


def binarize(page: PageImage) -> numpy.ndarray:
    return binarize_raster(page.pixels)


def component_stats(mask: numpy.ndarray) -> typing.List[typing.Tuple[Rect, int]]:
    """The tight box and the pixel count of every 8-connected component of a mask, in label order"""
    if not mask.any():
        return []
    count, _, stats, _ = cv2.connectedComponentsWithStats(mask.astype(numpy.uint8), connectivity=8)
    components = []
    for label in range(1, count):
        x, y = int(stats[label, cv2.CC_STAT_LEFT]), int(stats[label, cv2.CC_STAT_TOP])
        w, h = int(stats[label, cv2.CC_STAT_WIDTH]), int(stats[label, cv2.CC_STAT_HEIGHT])
        components.append((Rect.of(x, y, x + w, y + h), int(stats[label, cv2.CC_STAT_AREA])))
    return components


class InkComponents:
    """
    The connected ink components of a page, indexed in a uniform grid for intersection queries

    Instances are not modified after construction.
    """

    def __init__(self, components: typing.Sequence[typing.Tuple[Rect, int]], cell_size: int = 256):
        self.rects: typing.List[Rect] = [rect for rect, _ in components]
        self.pixel_counts: typing.List[int] = [count for _, count in components]
        self.cell_size = cell_size
        self._cells: typing.Dict[typing.Tuple[int, int], typing.List[int]] = collections.defaultdict(list)
        for index, rect in enumerate(self.rects):
            for cell in self._cells_of(rect):
                self._cells[cell].append(index)

    @classmethod
    def from_mask(cls, mask: numpy.ndarray, cell_size: int = 256) -> "InkComponents":
        return cls(component_stats(mask), cell_size)

    @classmethod
    def from_page(cls, page: PageImage, cell_size: int = 256) -> "InkComponents":
        components = cls.from_mask(binarize(page), cell_size)
        _logger.debug("Found %d ink components on page %s/%s", len(components), page.doc_id, page.page_number)
        return components

    def __len__(self) -> int:
        return len(self.rects)

    def _cells_of(self, rect: Rect) -> typing.Iterator[typing.Tuple[int, int]]:
        size = self.cell_size
        for cy in range(rect.top // size, (rect.bottom - 1) // size + 1):
            for cx in range(rect.left // size, (rect.right - 1) // size + 1):
                yield cx, cy

    def query(self, box: Rect) -> typing.List[int]:
        """The indices of all components whose box intersects the given box, in ascending order"""
        candidates = set()
        for cell in self._cells_of(box):
            candidates.update(self._cells.get(cell, ()))
        return sorted(i for i in candidates if geometry.intersection_area(self.rects[i], box) > 0)


MAX_CROP_ROUNDS = 4
"""How often a crop may grow to components touching its previous result"""


def crop_box(
    box: Rect,
    ink: InkComponents,
    tolerance: int = 1,
    clip: typing.Optional[Rect] = None,
    drop_inkless: bool = True,
    max_rounds: int = MAX_CROP_ROUNDS,
) -> typing.Optional[Rect]:
    """
    Crop a detection to the ink components it contains or touches

    A component touches the box if its box intersects the box grown by the tolerance. The result is
    the tight union of the touched components; components touching the result are added until
    nothing changes or max_rounds unions were formed. Along a line of closely set glyphs every round
    adds at most one glyph on each side. Results reached before the limit are returned unchanged
    when cropped again.

    :param box: The detection in page coordinates
    :param ink: The ink components of the page
    :param tolerance: The distance in pixels up to which a component counts as touching
    :param clip: A region the result is restricted to, e.g. the page area of a window
    :param drop_inkless: Return None for detections without ink instead of keeping them as they are
    :param max_rounds: The number of unions after which the growth stops
    :return: The cropped box or None if the detection was dropped
    """
    if max_rounds < 1:
        raise ValueError("A crop needs at least one round")
    current = box
    seen = set()
    for _ in range(max_rounds):
        hits = ink.query(geometry.expand(current, tolerance))
        result = geometry.union_box(ink.rects[i] for i in hits) if hits else None
        if result is not None and clip is not None:
            result = geometry.intersection(result, clip)
        if result is None:
            return None if drop_inkless else box
        if result == current or result.as_tuple() in seen:
            return result
        seen.add(current.as_tuple())
        current = result
    _logger.debug("Stopped growing %s at %s after %d rounds", box, current, max_rounds)
    return current
