import typing

import pydantic

from . import BaseModel as _BaseModel
from .geometry import Rect


class DefaultBox(_BaseModel):
    """One SSD default box of a detector input"""

    box_id: int = pydantic.Field(default=..., ge=0)
    """The index of the box in the generated list"""

    level: int = pydantic.Field(default=..., ge=0)
    """The index of the feature grid the box belongs to"""

    cell: typing.Tuple[int, int] = pydantic.Field(default=...)
    """The (row, column) of the grid cell the box is centered on"""

    aspect_ratio: float = pydantic.Field(default=..., gt=0)
    """Width divided by height of the unclipped box"""

    width: float = pydantic.Field(default=..., gt=0)
    """Width of the unclipped box in input pixels"""

    height: float = pydantic.Field(default=..., gt=0)
    """Height of the unclipped box in input pixels"""

    rect: Rect = pydantic.Field(default=...)
    """The box rounded outwards and clipped to the input bounds"""


class Assignment(_BaseModel):
    """A default box matched to a ground truth box"""

    box_id: int
    gt_index: int
    iou: float


class MatchResult(_BaseModel):
    """The positive and negative default boxes of one detector input"""

    assignments: typing.List[Assignment] = pydantic.Field(default_factory=list)
    """All (default box, ground truth) pairs selected by the matching rule, ordered by box and gt index"""

    positives: typing.FrozenSet[int] = pydantic.Field(default_factory=frozenset)
    negatives: typing.FrozenSet[int] = pydantic.Field(default_factory=frozenset)


class TrainingTarget(_BaseModel):
    """One positive assignment encoded for an SSD style trainer"""

    window_id: str = pydantic.Field(default=...)
    """The name of the window crop ({doc_id}_{page}_{window_id})"""

    box_id: int
    gt: Rect
    d_cx: float
    d_cy: float
    d_logw: float
    d_logh: float
