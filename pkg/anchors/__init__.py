"""SSD default boxes, ground truth matching and the export of training targets"""
import logging
import math
import typing

import numpy

import configuration
import exceptions
import formats
import geometry
import windowing
from models.anchors import Assignment, DefaultBox, MatchResult, TrainingTarget
from models.dataset import GroundTruthPage
from models.geometry import Rect
from models.windowing import WindowSpec

_logger = logging.getLogger(__name__)


def level_scales(cfg: configuration.AnchorConfiguration) -> typing.List[float]:
    """The box scale of every grid, linearly interpolated between the minimal and the maximal scale"""
    levels = len(cfg.grid_sizes)
    if levels == 1:
        return [cfg.scale_min]
    return [cfg.scale_min + (cfg.scale_max - cfg.scale_min) * k / (levels - 1) for k in range(levels)]


def generate_default_boxes(cfg: configuration.AnchorConfiguration) -> typing.List[DefaultBox]:
    """
    Lay out the default boxes of every grid

    A box of scale s and aspect ratio a is s * input * sqrt(a) wide and s * input / sqrt(a) high and
    centered on its grid cell. The boxes are rounded outwards and clipped to the input; boxes left
    without area are dropped.

    :param cfg: The anchor configuration
    :return: The boxes ordered by grid, cell row, cell column and aspect ratio
    """
    size = cfg.input_size
    boxes: typing.List[DefaultBox] = []
    dropped = 0
    for level, (grid, scale) in enumerate(zip(cfg.grid_sizes, level_scales(cfg))):
        shapes = [
            (float(ratio), scale * size * math.sqrt(ratio), scale * size / math.sqrt(ratio))
            for ratio in cfg.aspect_ratios
        ]
        for row in range(grid):
            cy = (row + 0.5) / grid * size
            for column in range(grid):
                cx = (column + 0.5) / grid * size
                for ratio, width, height in shapes:
                    left = max(0, math.floor(round(cx - width / 2, 6)))
                    top = max(0, math.floor(round(cy - height / 2, 6)))
                    right = min(size, math.ceil(round(cx + width / 2, 6)))
                    bottom = min(size, math.ceil(round(cy + height / 2, 6)))
                    if left >= right or top >= bottom:
                        dropped += 1
                        continue
                    boxes.append(
                        DefaultBox.construct(
                            box_id=len(boxes),
                            level=level,
                            cell=(row, column),
                            aspect_ratio=ratio,
                            width=width,
                            height=height,
                            rect=Rect.of(left, top, right, bottom),
                        )
                    )
    if dropped:
        _logger.warning("Dropped %d default boxes without area after clipping", dropped)
    return boxes


def default_box_array(boxes: typing.Sequence[DefaultBox]) -> numpy.ndarray:
    return geometry.as_array(box.rect for box in boxes)


def match_ground_truth(
    gt: typing.Sequence[Rect],
    boxes: typing.Sequence[DefaultBox],
    box_array: typing.Optional[numpy.ndarray] = None,
) -> MatchResult:
    """
    Match ground truth boxes to default boxes

    Every ground truth box is matched to the default box it overlaps most (the lowest box id wins
    ties) and to every default box it overlaps by an IOU above 0.5. Matched boxes are positives,
    all others negatives.

    :param gt: The ground truth in detector input coordinates
    :param boxes: The default boxes
    :param box_array: The boxes as (N, 4) array, if already computed
    :return: The assignments ordered by box id and ground truth index
    :raises exceptions.UsageError: There are no default boxes
    """
    if len(boxes) == 0:
        raise exceptions.UsageError("NO_DEFAULT_BOXES", "No default boxes", "Matching needs at least one default box")
    all_ids = frozenset(box.box_id for box in boxes)
    if len(gt) == 0:
        return MatchResult(assignments=[], positives=frozenset(), negatives=all_ids)
    if box_array is None:
        box_array = default_box_array(boxes)
    inter, union = geometry.overlap_matrix(geometry.as_array(gt), box_array)
    ious = inter / union
    selected = 2 * inter > union
    selected[numpy.arange(len(gt)), numpy.argmax(ious, axis=1)] = True
    box_indices, gt_indices = numpy.nonzero(selected.T)
    assignments = [
        Assignment(box_id=boxes[n].box_id, gt_index=int(g), iou=float(ious[g, n]))
        for n, g in zip(box_indices.tolist(), gt_indices.tolist())
    ]
    positives = frozenset(a.box_id for a in assignments)
    return MatchResult(assignments=assignments, positives=positives, negatives=all_ids - positives)


def encode_offsets(
    gt: Rect, box: Rect, variances: typing.Tuple[float, float] = (0.1, 0.2)
) -> typing.Tuple[float, float, float, float]:
    """Encode a ground truth box relative to a default box (SSD center-size encoding)"""
    gcx, gcy = (gt.left + gt.right) / 2, (gt.top + gt.bottom) / 2
    dcx, dcy = (box.left + box.right) / 2, (box.top + box.bottom) / 2
    return (
        (gcx - dcx) / (box.width * variances[0]),
        (gcy - dcy) / (box.height * variances[0]),
        math.log(gt.width / box.width) / variances[1],
        math.log(gt.height / box.height) / variances[1],
    )


def decode_offsets(
    box: Rect, offsets: typing.Sequence[float], variances: typing.Tuple[float, float] = (0.1, 0.2)
) -> typing.Tuple[float, float, float, float]:
    """Invert encode_offsets. Returns the (left, top, right, bottom) of the encoded box as floats"""
    d_cx, d_cy, d_logw, d_logh = offsets
    cx = (box.left + box.right) / 2 + d_cx * variances[0] * box.width
    cy = (box.top + box.bottom) / 2 + d_cy * variances[0] * box.height
    width = box.width * math.exp(d_logw * variances[1])
    height = box.height * math.exp(d_logh * variances[1])
    return cx - width / 2, cy - height / 2, cx + width / 2, cy + height / 2


def export_training_targets(
    pages: typing.Iterable[GroundTruthPage],
    windows: typing.Mapping[formats.PageKey, typing.Sequence[WindowSpec]],
    cfg: configuration.AnchorConfiguration,
    min_coverage: float = 0.25,
    boxes: typing.Optional[typing.Sequence[DefaultBox]] = None,
) -> typing.Iterator[TrainingTarget]:
    """
    Produce one training target per positive assignment of every window

    :param pages: The ground truth pages
    :param windows: The windows of every page
    :param cfg: The anchor configuration
    :param min_coverage: The visible fraction a clipped formula needs (see windowing.exportable)
    :param boxes: The default boxes, generated from cfg if not supplied
    :return: The targets, ordered by page, window, default box and ground truth
    """
    boxes = boxes if boxes is not None else generate_default_boxes(cfg)
    box_array = default_box_array(boxes)
    for page in pages:
        formulas = page.formula_rects
        for w in windows.get(page.key, []):
            if w.input_size != cfg.input_size:
                raise exceptions.UsageError(
                    "INPUT_SIZE_MISMATCH",
                    "Input size mismatch",
                    f"The window uses {w.input_size} px inputs, the default boxes {cfg.input_size} px",
                )
            cropped = windowing.crop_ground_truth(w, formulas)
            kept = [c for c in cropped if windowing.exportable(c, box_array, min_coverage)]
            if not kept:
                continue
            result = match_ground_truth([c.rect for c in kept], boxes, box_array)
            name = windowing.window_name(page.doc_id, page.page_number, w.window_id)
            for assignment in result.assignments:
                gt = kept[assignment.gt_index].rect
                d_cx, d_cy, d_logw, d_logh = encode_offsets(gt, boxes[assignment.box_id].rect, cfg.variances)
                yield TrainingTarget(
                    window_id=name, box_id=assignment.box_id, gt=gt, d_cx=d_cx, d_cy=d_cy, d_logw=d_logw, d_logh=d_logh
                )


def write_training_targets(stream: typing.TextIO, targets: typing.Iterable[TrainingTarget]) -> int:
    """Write the targets in the training target layout and return the number of rows"""
    return formats.write_rows(
        stream,
        formats.TRAINING_TARGET_COLUMNS,
        (
            (
                t.window_id,
                t.box_id,
                *t.gt.as_tuple(),
                f"{t.d_cx:.6f}",
                f"{t.d_cy:.6f}",
                f"{t.d_logw:.6f}",
                f"{t.d_logh:.6f}",
            )
            for t in targets
        ),
    )
