import typing

import pydantic

import enums
from . import BaseModel as _BaseModel


def safe_ratio(numerator: int, denominator: int) -> float:
    """Divide, defining the ratio as 0 if the denominator is 0"""
    return numerator / denominator if denominator else 0.0


def harmonic_mean(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


class Match(_BaseModel):
    gt_index: int
    det_index: int
    iou: float


class Scores(_BaseModel):
    """Precision, recall and f-score derived from counts"""

    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    @property
    def precision(self) -> float:
        return safe_ratio(self.true_positives, self.true_positives + self.false_positives)

    @property
    def recall(self) -> float:
        return safe_ratio(self.true_positives, self.true_positives + self.false_negatives)

    @property
    def fscore(self) -> float:
        return harmonic_mean(self.precision, self.recall)

    @property
    def precision_undefined(self) -> bool:
        """There were no detections, so precision was defined as 0"""
        return self.true_positives + self.false_positives == 0

    @property
    def recall_undefined(self) -> bool:
        """There was no ground truth, so recall was defined as 0"""
        return self.true_positives + self.false_negatives == 0

    def __add__(self, other: "Scores") -> "Scores":
        return Scores(
            true_positives=self.true_positives + other.true_positives,
            false_positives=self.false_positives + other.false_positives,
            false_negatives=self.false_negatives + other.false_negatives,
        )


class EvalResult(Scores):
    """The formula level evaluation at one IOU threshold"""

    iou_threshold: float = pydantic.Field(default=...)

    per_document: typing.Dict[str, Scores] = pydantic.Field(default_factory=dict)
    """The counts of each document"""

    matches: typing.List[Match] = pydantic.Field(default_factory=list)
    """The matched pairs. Indices refer to the page the match was computed on"""


class CharEvalResult(Scores):
    """The character level evaluation: characters inside detections are predicted as math"""

    rule: enums.CharacterRule = pydantic.Field(default=enums.CharacterRule.AREA)


class ErrorAnalysis(_BaseModel):
    """Counts of split and merged formula regions among the unmatched boxes"""

    split_formulas: int = 0
    """Ground truth formulas covered by two or more unmatched detections"""

    merged_detections: int = 0
    """Unmatched detections covering two or more ground truth formulas"""


class TuningResult(_BaseModel):
    """The outcome of a threshold grid search"""

    method: enums.VoteMethod
    best_threshold: float
    best_fscore: float
    curve: typing.List[typing.Tuple[float, float]] = pydantic.Field(default_factory=list)
    """The (threshold, f-score) pairs in grid order"""
