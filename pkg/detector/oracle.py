"""A test double emitting the (optionally jittered) ground truth of a window"""
import typing
import zlib

import numpy

import configuration
import enums
import windowing
from models.detections import WindowDetections
from models.geometry import Rect, ScoredRect
from models.windowing import WindowSpec

from . import Detector


def window_rng(seed: int, doc_id: str, page_number: int, window_id: int) -> numpy.random.Generator:
    """A random generator that only depends on the seed and the identity of the window"""
    return numpy.random.default_rng([seed % 2**32, zlib.crc32(f"{doc_id}/{page_number}/{window_id}".encode())])


def oracle_detect(
    window_id: int,
    gt: typing.Sequence[Rect],
    jitter: configuration.OracleConfiguration,
    rng: numpy.random.Generator,
    input_size: int = 512,
) -> WindowDetections:
    """
    Report ground truth boxes as detections

    Every box is dropped with the drop probability. Kept boxes are shifted by up to position_px
    and their width and height change by up to size_px, all drawn uniformly in input pixels. The
    random values are drawn for every box, so the draws do not depend on earlier outcomes.

    :param window_id: The id of the window
    :param gt: The ground truth clipped to the window, in detector input coordinates
    :param jitter: The noise settings
    :param rng: The generator of the window (see window_rng)
    :param input_size: The edge length of the detector input the boxes are clipped to
    :return: The detections of the window
    """
    detections = []
    for rect in gt:
        dropped = rng.random() < jitter.drop_prob
        dx, dy = (int(v) for v in rng.integers(-jitter.position_px, jitter.position_px + 1, size=2))
        dw, dh = (int(v) for v in rng.integers(-jitter.size_px, jitter.size_px + 1, size=2))
        if jitter.confidence_model == enums.ConfidenceModel.UNIFORM:
            confidence = float(rng.uniform(jitter.confidence_low, 1.0))
        else:
            confidence = 1.0
        if dropped:
            continue
        left, top = max(0, rect.left + dx), max(0, rect.top + dy)
        right = min(input_size, rect.right + dx + dw)
        bottom = min(input_size, rect.bottom + dy + dh)
        if left >= right or top >= bottom:
            continue
        detections.append(ScoredRect.of(Rect.of(left, top, right, bottom), confidence))
    return WindowDetections(window_id=window_id, detections=detections)


class OracleDetector(Detector):
    """The oracle for the windows of a single page"""

    requires_raster = False

    def __init__(
        self,
        doc_id: str,
        page_number: int,
        formulas: typing.Sequence[Rect],
        jitter: configuration.OracleConfiguration,
        seed: int = 0,
    ):
        """
        :param doc_id: The document of the page
        :param page_number: The page number
        :param formulas: The ground truth formula boxes of the page in page coordinates
        :param jitter: The noise settings
        :param seed: The base seed, combined with the window identity for every window
        """
        self.doc_id = doc_id
        self.page_number = page_number
        self.formulas = list(formulas)
        self.jitter = jitter
        self.seed = seed

    def detect(self, raster: typing.Optional[numpy.ndarray], w: WindowSpec) -> WindowDetections:
        gt = [cropped.rect for cropped in windowing.crop_ground_truth(w, self.formulas)]
        rng = window_rng(self.seed, self.doc_id, self.page_number, w.window_id)
        return oracle_detect(w.window_id, gt, self.jitter, rng, w.input_size)
