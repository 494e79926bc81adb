import typing

import pydantic

from . import BaseModel as _BaseModel
from .geometry import ScoredRect, Rect


class WindowDetections(_BaseModel):
    """The detections a detector produced for a single window"""

    window_id: int = pydantic.Field(default=..., ge=0)

    detections: typing.List[ScoredRect] = pydantic.Field(default_factory=list)
    """The detections in detector input coordinates"""

    error: typing.Optional[str] = pydantic.Field(default=None)
    """The failure message if the detector failed on this window"""


class PageDetections(_BaseModel):
    """The final, unscored formula regions of one page"""

    doc_id: str
    page_number: int
    regions: typing.List[Rect] = pydantic.Field(default_factory=list)

    @property
    def key(self) -> typing.Tuple[str, int]:
        return self.doc_id, self.page_number
