"""Formula and character level scoring of page detections against the ground truth"""
import fractions
import logging
import typing

import numpy

import enums
import formats
import geometry
from models.dataset import GroundTruthPage
from models.evaluation import CharEvalResult, ErrorAnalysis, EvalResult, Match, Scores
from models.geometry import Rect

_logger = logging.getLogger(__name__)

SUITE_THRESHOLDS = (0.5, 0.75, 1.0)
"""IOU of at least 0.5, at least 0.75 and exact location"""

PageBoxes = typing.Mapping[formats.PageKey, typing.Sequence[Rect]]


def _threshold_fraction(iou_threshold: float) -> fractions.Fraction:
    return fractions.Fraction(iou_threshold).limit_denominator(1_000_000)


def match_formulas(gt: typing.Sequence[Rect], dets: typing.Sequence[Rect], iou_threshold: float) -> EvalResult:
    """
    Match the detections of one page to its ground truth

    All pairs reaching the IOU threshold are visited by descending IOU and a pair is matched if
    neither box is matched yet. Equal IOUs are ordered by the ground truth box, then the detection
    box and only then by index, so permuting either list does not change the counts.

    :param gt: The ground truth formula boxes
    :param dets: The detected regions
    :param iou_threshold: The smallest IOU of a match
    :return: The counts and the matches of the page
    """
    matches = []
    if gt and dets:
        inter, union = geometry.overlap_matrix(geometry.as_array(gt), geometry.as_array(dets))
        threshold = _threshold_fraction(iou_threshold)
        qualifying = (inter > 0) & (inter * threshold.denominator >= threshold.numerator * union)
        candidates = [
            (fractions.Fraction(int(inter[g, d]), int(union[g, d])), int(g), int(d))
            for g, d in zip(*numpy.nonzero(qualifying))
        ]
        candidates.sort(key=lambda c: (-c[0], gt[c[1]].as_tuple(), dets[c[2]].as_tuple(), c[1], c[2]))
        used_gt, used_dets = set(), set()
        for iou, g, d in candidates:
            if g in used_gt or d in used_dets:
                continue
            used_gt.add(g)
            used_dets.add(d)
            matches.append(Match(gt_index=g, det_index=d, iou=float(iou)))
    return EvalResult(
        iou_threshold=iou_threshold,
        true_positives=len(matches),
        false_positives=len(dets) - len(matches),
        false_negatives=len(gt) - len(matches),
        matches=matches,
    )


def evaluate_pages(gt: PageBoxes, dets: PageBoxes, iou_threshold: float) -> EvalResult:
    """
    Evaluate every page on its own and aggregate the counts overall and per document

    Pages only present on one side contribute false negatives or false positives. The matches of
    the single pages are not kept.
    """
    total = Scores()
    per_document: typing.Dict[str, Scores] = {}
    for key in sorted(set(gt) | set(dets)):
        page = match_formulas(list(gt.get(key, [])), list(dets.get(key, [])), iou_threshold)
        counts = Scores(
            true_positives=page.true_positives,
            false_positives=page.false_positives,
            false_negatives=page.false_negatives,
        )
        total = total + counts
        per_document[key[0]] = per_document.get(key[0], Scores()) + counts
    return EvalResult(iou_threshold=iou_threshold, per_document=per_document, **total.dict())


def evaluate_suite(
    gt: PageBoxes, dets: PageBoxes, thresholds: typing.Sequence[float] = SUITE_THRESHOLDS
) -> typing.Dict[float, EvalResult]:
    return {threshold: evaluate_pages(gt, dets, threshold) for threshold in thresholds}


def _inside(char: Rect, det: Rect, rule: enums.CharacterRule, containment: float) -> bool:
    if rule == enums.CharacterRule.CENTER:
        return det.contains_point(*char.center)
    return geometry.intersection_area(char, det) >= containment * char.area


def character_metrics(
    pages: typing.Iterable[GroundTruthPage],
    dets: PageBoxes,
    rule: enums.CharacterRule = enums.CharacterRule.AREA,
    containment: float = 0.5,
) -> CharEvalResult:
    """
    Score the characters located within detections as predicted math characters

    :param pages: The character level ground truth
    :param dets: The detected regions per page
    :param rule: area: at least the containment fraction of the character box lies inside a single
        detection. center: the center of the character box lies inside a detection
    :param containment: The area fraction of the area rule
    :return: The character level counts
    """
    tp = fp = fn = 0
    for page in pages:
        regions = list(dets.get(page.key, []))
        for char in page.characters:
            predicted = any(_inside(char.bbox, det, rule, containment) for det in regions)
            if predicted and char.is_math:
                tp += 1
            elif predicted:
                fp += 1
            elif char.is_math:
                fn += 1
    return CharEvalResult(true_positives=tp, false_positives=fp, false_negatives=fn, rule=rule)


def classify_errors(gt: typing.Sequence[Rect], dets: typing.Sequence[Rect], iou_threshold: float) -> ErrorAnalysis:
    """
    Count split and merged formulas among the unmatched boxes of a page

    A formula is split if at least two unmatched detections lie at least half inside it. A detection
    merges formulas if it contains at least half of two or more formulas and is not matched.
    """
    result = match_formulas(gt, dets, iou_threshold)
    matched_gt = {m.gt_index for m in result.matches}
    matched_dets = {m.det_index for m in result.matches}
    unmatched = [det for index, det in enumerate(dets) if index not in matched_dets]
    split = 0
    for index, formula in enumerate(gt):
        if index in matched_gt:
            continue
        parts = [det for det in unmatched if 2 * geometry.intersection_area(det, formula) >= det.area]
        if len(parts) >= 2:
            split += 1
    merged = 0
    for det in unmatched:
        covered = [formula for formula in gt if 2 * geometry.intersection_area(det, formula) >= formula.area]
        if len(covered) >= 2:
            merged += 1
    return ErrorAnalysis(split_formulas=split, merged_detections=merged)


def classify_pages(gt: PageBoxes, dets: PageBoxes, iou_threshold: float) -> ErrorAnalysis:
    split = merged = 0
    for key in sorted(set(gt) | set(dets)):
        page = classify_errors(list(gt.get(key, [])), list(dets.get(key, [])), iou_threshold)
        split += page.split_formulas
        merged += page.merged_detections
    return ErrorAnalysis(split_formulas=split, merged_detections=merged)


# %% Reports
def _iou_label(threshold: float) -> str:
    """Thresholds are written as decimals with at least one fractional digit, e.g. 0.5 and 1.0"""
    return repr(float(threshold))


def _metric_row(scope: str, iou: str, scores: Scores) -> typing.Tuple[str, str, str, str, str]:
    return scope, iou, f"{scores.precision:.4f}", f"{scores.recall:.4f}", f"{scores.fscore:.4f}"


def metric_rows(
    results: typing.Mapping[float, EvalResult], char_results: typing.Sequence[CharEvalResult] = ()
) -> typing.List[typing.Tuple[str, str, str, str, str]]:
    """The rows of the metrics table: overall, per document and character level"""
    rows = []
    for threshold, result in results.items():
        rows.append(_metric_row("all", _iou_label(threshold), result))
    for threshold, result in results.items():
        for doc_id, scores in sorted(result.per_document.items()):
            rows.append(_metric_row(doc_id, _iou_label(threshold), scores))
    for char_result in char_results:
        rows.append(_metric_row("charlevel", char_result.rule.value, char_result))
    return rows


def write_metrics_csv(
    stream: typing.TextIO,
    results: typing.Mapping[float, EvalResult],
    char_results: typing.Sequence[CharEvalResult] = (),
) -> int:
    return formats.write_rows(stream, formats.METRICS_COLUMNS, metric_rows(results, char_results))


def render_report(
    results: typing.Mapping[float, EvalResult],
    char_results: typing.Sequence[CharEvalResult] = (),
    errors: typing.Optional[ErrorAnalysis] = None,
) -> str:
    """Format the metrics as a plain-text table"""
    lines = [f"{'scope':<24} {'iou':>7} {'TP':>7} {'FP':>7} {'FN':>7} {'P':>7} {'R':>7} {'F':>7}"]

    def line(scope: str, iou: str, s: Scores) -> str:
        flags = []
        if s.precision_undefined:
            flags.append("P undefined")
        if s.recall_undefined:
            flags.append("R undefined")
        return (
            f"{scope:<24} {iou:>7} {s.true_positives:>7} {s.false_positives:>7} {s.false_negatives:>7} "
            f"{s.precision:>7.4f} {s.recall:>7.4f} {s.fscore:>7.4f}" + (f"  ({', '.join(flags)})" if flags else "")
        )

    for threshold, result in results.items():
        lines.append(line("all", _iou_label(threshold), result))
    for threshold, result in results.items():
        for doc_id, scores in sorted(result.per_document.items()):
            lines.append(line(doc_id, _iou_label(threshold), scores))
    for char_result in char_results:
        lines.append(line("charlevel", char_result.rule.value, char_result))
    if errors is not None:
        lines.append(f"split formulas: {errors.split_formulas}, merged detections: {errors.merged_detections}")
    return "\n".join(lines) + "\n"
