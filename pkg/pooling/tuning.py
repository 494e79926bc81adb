"""Grid search for the vote threshold maximizing the formula f-score"""
import logging
import typing

import enums
import evaluation
import exceptions
import postprocess
from models.evaluation import TuningResult
from models.geometry import Rect, ScoredRect

from . import VoteMap, regions_from_scores

_logger = logging.getLogger(__name__)


class TuningSample(typing.NamedTuple):
    """One training page prepared for the grid search"""

    key: typing.Tuple[str, int]
    ground_truth: typing.List[Rect]
    detections: typing.List[ScoredRect]
    """The stitched (and cropped) detections in page coordinates"""

    page_size: typing.Tuple[int, int]
    ink: typing.Optional[postprocess.InkComponents] = None


def default_grid(method: enums.VoteMethod) -> typing.List[float]:
    """
    The thresholds searched by default

    Counting methods search 0 to 55 votes. Confidence based maxima and averages lie in [0, 1] and
    are searched in steps of a hundredth.
    """
    method = enums.VoteMethod(method)
    if method in (enums.VoteMethod.UNIFORM, enums.VoteMethod.SUM):
        return [float(t) for t in range(0, 56)]
    return [k / 100 for k in range(0, 101)]


def tune_threshold(
    samples: typing.Sequence[TuningSample],
    method: enums.VoteMethod,
    grid: typing.Optional[typing.Sequence[float]] = None,
    iou_threshold: float = 0.75,
    downscale: int = 4,
    tolerance: int = 1,
    drop_inkless: bool = True,
) -> TuningResult:
    """
    Find the vote threshold with the best f-score on the samples

    The votes of every page are accumulated once and re-thresholded for every candidate. Equal
    f-scores are resolved in favour of the lowest threshold.

    :param samples: The training pages
    :param method: The voting method
    :param grid: The candidate thresholds, the method's default grid if omitted
    :param iou_threshold: The IOU of the optimized f-score
    :param downscale: The vote map resolution divisor
    :param tolerance: The touching distance of the post-pooling crop
    :param drop_inkless: Drop regions without ink in the post-pooling crop
    :return: The best threshold and the f-score of every candidate
    :raises exceptions.UsageError: The grid is empty
    """
    grid = sorted(default_grid(method) if grid is None else grid)
    if not grid:
        raise exceptions.UsageError("EMPTY_GRID", "Empty threshold grid", "The grid search needs a candidate")
    scores = [
        VoteMap(sample.page_size[0], sample.page_size[1], downscale).add_all(sample.detections).score(method)
        for sample in samples
    ]
    gt = {sample.key: sample.ground_truth for sample in samples}
    curve = []
    for t in grid:
        dets = {
            sample.key: regions_from_scores(
                page_scores, t, sample.page_size, downscale, sample.ink, tolerance, drop_inkless
            )
            for sample, page_scores in zip(samples, scores)
        }
        curve.append((t, evaluation.evaluate_pages(gt, dets, iou_threshold).fscore))
        _logger.debug("Threshold %g reaches an f-score of %.4f", t, curve[-1][1])
    best_threshold, best_fscore = curve[0]
    for t, fscore in curve[1:]:
        if fscore > best_fscore:
            best_threshold, best_fscore = t, fscore
    _logger.info("Best %s threshold: %g (f-score %.4f)", enums.VoteMethod(method).value, best_threshold, best_fscore)
    return TuningResult(method=method, best_threshold=best_threshold, best_fscore=best_fscore, curve=curve)
