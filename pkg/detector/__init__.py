"""The window level detector contract and non-maximal suppression"""
import abc
import logging
import typing

import numpy

import exceptions
import geometry
from models.detections import WindowDetections
from models.geometry import ScoredRect
from models.windowing import WindowSpec

_logger = logging.getLogger(__name__)


class Detector(abc.ABC):
    """
    A detector turns one resampled window into scored formula boxes in detector input coordinates

    Implementations need to be safe to call from several workers at once.
    """

    requires_raster: bool = True
    """The detector reads the window pixels. If False, detect is called without a raster"""

    @abc.abstractmethod
    def detect(self, raster: typing.Optional[numpy.ndarray], w: WindowSpec) -> WindowDetections:
        """
        Detect formulas in a window

        :param raster: The input_size x input_size raster of the window
        :param w: The window
        :raises exceptions.DetectorError: The detector failed on this window
        """


def validate_detections(result: WindowDetections, w: WindowSpec) -> WindowDetections:
    """
    Check that all boxes lie inside the detector input

    :raises exceptions.DetectorError: A box leaves the detector input
    """
    for det in result.detections:
        if det.rect.right > w.input_size or det.rect.bottom > w.input_size:
            raise exceptions.DetectorError(w.window_id, f"The box {det.rect.as_tuple()} leaves the detector input")
    return result


def run_detector(detector: Detector, raster: typing.Optional[numpy.ndarray], w: WindowSpec) -> WindowDetections:
    """
    Run a detector on one window, turning detector failures into an empty result carrying the error

    The page is processed with the remaining windows if a single window fails.
    """
    try:
        return validate_detections(detector.detect(raster, w), w)
    except exceptions.DetectorError as e:
        _logger.warning("%s", e)
        return WindowDetections(window_id=w.window_id, detections=[], error=str(e))


def nms(dets: typing.Sequence[ScoredRect], iou_threshold: float) -> typing.List[ScoredRect]:
    """
    Greedy non-maximal suppression

    The remaining detection with the highest confidence is kept and every detection overlapping it
    by an IOU above the threshold is discarded. Equal confidences keep the input order.

    :param dets: The detections
    :param iou_threshold: The suppression threshold in (0, 1]
    :return: The kept detections ordered by descending confidence
    :raises exceptions.UsageError: The threshold is outside of (0, 1]
    """
    if not 0 < iou_threshold <= 1:
        raise exceptions.UsageError(
            "INVALID_NMS_THRESHOLD", "Invalid NMS threshold", f"The threshold {iou_threshold} is outside of (0, 1]"
        )
    if len(dets) == 0:
        return []
    confidences = numpy.array([det.confidence for det in dets], dtype=numpy.float64)
    order = numpy.lexsort((numpy.arange(len(dets)), -confidences))
    boxes = geometry.as_array(det.rect for det in dets)
    inter, union = geometry.overlap_matrix(boxes, boxes)
    suppressed = inter > iou_threshold * union
    keep = []
    alive = numpy.ones(len(dets), dtype=bool)
    for i in order:
        if not alive[i]:
            continue
        keep.append(int(i))
        alive &= ~suppressed[i]
    return [dets[i] for i in keep]
