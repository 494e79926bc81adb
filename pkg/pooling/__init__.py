"""Stitching window detections onto the page and pooling them by pixel level voting"""
import logging
import math
import typing

import numpy

import enums
import exceptions
import geometry
import postprocess
import windowing
from models.detections import WindowDetections
from models.geometry import Rect, ScoredRect
from models.windowing import WindowSpec

_logger = logging.getLogger(__name__)


class VoteMap:
    """
    Per-pixel votes of all detections covering a pixel

    The map may be kept at a reduced resolution. A box covers every cell it touches, i.e. its
    coordinates are divided by the downscale factor and rounded outwards.
    """

    def __init__(self, width: int, height: int, downscale: int = 1):
        """
        :param width: The page width
        :param height: The page height
        :param downscale: The edge length in page pixels of one map cell
        """
        if downscale <= 0:
            raise exceptions.UsageError(
                "INVALID_DOWNSCALE", "Invalid vote map downscale", f"The factor {downscale} needs to be positive"
            )
        self.width = width
        self.height = height
        self.downscale = downscale
        shape = (math.ceil(height / downscale), math.ceil(width / downscale))
        self.count = numpy.zeros(shape, dtype=numpy.int64)
        """The number of detections covering a cell"""

        self.weighted_sum = numpy.zeros(shape, dtype=numpy.float64)
        """The summed confidences of the detections covering a cell"""

        self.max_conf = numpy.zeros(shape, dtype=numpy.float64)
        """The highest confidence of the detections covering a cell"""

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.count.shape

    def cells(self, r: Rect) -> typing.Tuple[slice, slice]:
        f = self.downscale
        return slice(r.top // f, math.ceil(r.bottom / f)), slice(r.left // f, math.ceil(r.right / f))

    def add(self, det: ScoredRect) -> None:
        rows, columns = self.cells(det.rect)
        self.count[rows, columns] += 1
        self.weighted_sum[rows, columns] += det.confidence
        numpy.maximum(self.max_conf[rows, columns], det.confidence, out=self.max_conf[rows, columns])

    def add_all(self, dets: typing.Iterable[ScoredRect]) -> "VoteMap":
        for det in dets:
            self.add(det)
        return self

    def merge(self, other: "VoteMap") -> "VoteMap":
        """Combine two partial maps of the same page. The order of merging does not change the result"""
        if (self.width, self.height, self.downscale) != (other.width, other.height, other.downscale):
            raise ValueError("Only vote maps of the same page and resolution can be merged")
        merged = VoteMap(self.width, self.height, self.downscale)
        merged.count = self.count + other.count
        merged.weighted_sum = self.weighted_sum + other.weighted_sum
        merged.max_conf = numpy.maximum(self.max_conf, other.max_conf)
        return merged

    def score(self, method: enums.VoteMethod) -> numpy.ndarray:
        """The pixel scores of a voting method. The average of pixels without votes is 0"""
        method = enums.VoteMethod(method)
        if method == enums.VoteMethod.UNIFORM:
            return self.count.astype(numpy.float64)
        if method == enums.VoteMethod.SUM:
            return self.weighted_sum.copy()
        if method == enums.VoteMethod.MAX:
            return self.max_conf.copy()
        average = numpy.zeros(self.shape, dtype=numpy.float64)
        numpy.divide(self.weighted_sum, self.count, out=average, where=self.count > 0)
        return average


def stitch(
    window_dets: typing.Iterable[WindowDetections],
    windows: typing.Iterable[WindowSpec],
    page_size: typing.Optional[typing.Tuple[int, int]] = None,
) -> typing.List[ScoredRect]:
    """
    Map the detections of all windows onto the page

    :param window_dets: The detections per window, in detector input coordinates
    :param windows: The windows of the page
    :param page_size: If given, boxes are clipped to the page and boxes outside of it are dropped
    :return: The detections in page coordinates, in window and detection order
    :raises exceptions.DataError: Detections refer to a window which is not known
    """
    by_id = {w.window_id: w for w in windows}
    stitched = []
    for result in window_dets:
        w = by_id.get(result.window_id)
        if w is None:
            raise exceptions.DataError(
                "UNKNOWN_WINDOW", "Unknown window", f"Detections refer to the unknown window {result.window_id}"
            )
        for det in result.detections:
            rect = windowing.window_to_page(w, det.rect)
            if page_size is not None:
                rect = geometry.clip(rect, page_size)
                if rect is None:
                    continue
            stitched.append(ScoredRect.of(rect, det.confidence))
    return stitched


def vote(
    dets: typing.Iterable[ScoredRect],
    page_size: typing.Tuple[int, int],
    method: enums.VoteMethod,
    downscale: int = 1,
) -> numpy.ndarray:
    """The score map of the detections under a voting method"""
    return VoteMap(page_size[0], page_size[1], downscale).add_all(dets).score(method)


def threshold_mask(scores: numpy.ndarray, t: float) -> numpy.ndarray:
    """Pixels scoring at least t. At t = 0 every pixel is on, with or without votes"""
    if t < 0:
        raise exceptions.UsageError("INVALID_THRESHOLD", "Invalid vote threshold", f"The threshold {t} is negative")
    return scores >= t


def mask_components(mask: numpy.ndarray) -> typing.List[Rect]:
    """The tight boxes of the 8-connected components of a mask, ordered by top and left edge"""
    rects = [rect for rect, _ in postprocess.component_stats(mask)]
    return sorted(rects, key=lambda r: (r.top, r.left, r.bottom, r.right))


def scale_up(rects: typing.Iterable[Rect], downscale: int, page_size: typing.Tuple[int, int]) -> typing.List[Rect]:
    """Map vote map cells back to page pixels"""
    scaled = []
    for r in rects:
        clipped = geometry.clip(
            Rect.of(r.left * downscale, r.top * downscale, r.right * downscale, r.bottom * downscale), page_size
        )
        if clipped is not None:
            scaled.append(clipped)
    return scaled


def crop_window_detections(
    window_dets: typing.Iterable[WindowDetections],
    windows: typing.Iterable[WindowSpec],
    page_size: typing.Tuple[int, int],
    ink: postprocess.InkComponents,
    tolerance: int = 1,
    drop_inkless: bool = True,
) -> typing.List[ScoredRect]:
    """
    Stitch the detections and crop every box to the page ink inside of its window

    :return: The cropped detections in page coordinates
    """
    by_id = {w.window_id: w for w in windows}
    page_rect = Rect.of(0, 0, page_size[0], page_size[1])
    cropped = []
    for result in window_dets:
        w = by_id.get(result.window_id)
        if w is None:
            raise exceptions.DataError(
                "UNKNOWN_WINDOW", "Unknown window", f"Detections refer to the unknown window {result.window_id}"
            )
        area = geometry.intersection(w.page_rect, page_rect)
        for det in stitch([result], [w], page_size):
            rect = postprocess.crop_box(det.rect, ink, tolerance, clip=area, drop_inkless=drop_inkless)
            if rect is not None:
                cropped.append(ScoredRect.of(rect, det.confidence))
    return cropped


def regions_from_scores(
    scores: numpy.ndarray,
    threshold: float,
    page_size: typing.Tuple[int, int],
    downscale: int = 1,
    ink: typing.Optional[postprocess.InkComponents] = None,
    tolerance: int = 1,
    drop_inkless: bool = True,
) -> typing.List[Rect]:
    """
    Threshold a score map and turn its components into page regions

    If ink is given the regions are cropped to it; regions cropping to the same box are reported once.
    """
    regions = scale_up(mask_components(threshold_mask(scores, threshold)), downscale, page_size)
    if ink is None:
        return regions
    cropped = []
    for region in regions:
        rect = postprocess.crop_box(region, ink, tolerance, drop_inkless=drop_inkless)
        if rect is not None and rect not in cropped:
            cropped.append(rect)
    return sorted(cropped, key=lambda r: (r.top, r.left, r.bottom, r.right))


class PooledPage(typing.NamedTuple):
    regions: typing.List[Rect]
    """The final formula regions of the page"""

    votes: VoteMap
    """The votes the regions were derived from"""

    detections: typing.List[ScoredRect]
    """The stitched detections in page coordinates which were voted"""


def pool_page(
    window_dets: typing.Sequence[WindowDetections],
    windows: typing.Sequence[WindowSpec],
    page_size: typing.Tuple[int, int],
    method: enums.VoteMethod = enums.VoteMethod.UNIFORM,
    threshold: float = 30,
    ink: typing.Optional[postprocess.InkComponents] = None,
    downscale: int = 4,
    tolerance: int = 1,
    drop_inkless: bool = True,
    prestitch_postprocess: bool = True,
    postpool_postprocess: bool = True,
) -> PooledPage:
    """
    Pool the window detections of a page into formula regions

    The detections are stitched onto the page (and cropped to the page ink inside their window),
    voted into a score map, thresholded and split into connected components. The component boxes
    are cropped to the page ink once more.

    :param window_dets: The detections of every window
    :param windows: The windows of the page
    :param page_size: The (width, height) of the page
    :param method: The voting method
    :param threshold: The smallest score of a formula pixel
    :param ink: The ink components of the page. Without them no cropping takes place
    :param downscale: The vote map resolution divisor
    :param tolerance: The touching distance used while cropping
    :param drop_inkless: Drop boxes without ink while cropping
    :param prestitch_postprocess: Crop the detections before voting
    :param postpool_postprocess: Crop the pooled regions
    :return: The regions, the vote map and the voted detections
    """
    if ink is not None and prestitch_postprocess:
        dets = crop_window_detections(window_dets, windows, page_size, ink, tolerance, drop_inkless)
    else:
        dets = stitch(window_dets, windows, page_size)
    votes = VoteMap(page_size[0], page_size[1], downscale).add_all(dets)
    regions = regions_from_scores(
        votes.score(method),
        threshold,
        page_size,
        downscale,
        ink if postpool_postprocess else None,
        tolerance,
        drop_inkless,
    )
    _logger.debug("Pooled %d detections into %d regions", len(dets), len(regions))
    return PooledPage(regions=regions, votes=votes, detections=dets)
