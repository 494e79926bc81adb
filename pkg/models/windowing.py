import fractions
import typing

import numpy
import pydantic

from . import BaseModel as _BaseModel
from .geometry import Rect, Transform


class PageImage(_BaseModel):
    """A grayscale page raster"""

    doc_id: str = pydantic.Field(default=...)
    page_number: int = pydantic.Field(default=..., ge=0)

    pixels: numpy.ndarray = pydantic.Field(default=...)
    """The 8-bit grayscale raster in row-major order (height x width)"""

    dpi: int = pydantic.Field(default=600, gt=0)
    """The nominal resolution of the raster"""

    @pydantic.validator("pixels")
    def check_raster(cls, v: numpy.ndarray):
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError("A page raster needs to be a non-empty two dimensional array")
        if v.dtype != numpy.uint8:
            raise ValueError("A page raster needs to be an 8-bit grayscale image")
        return v

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def size(self) -> typing.Tuple[int, int]:
        return self.width, self.height

    @property
    def key(self) -> typing.Tuple[str, int]:
        return self.doc_id, self.page_number


class WindowSpec(_BaseModel):
    """One placement of the sliding window on a page"""

    window_id: int = pydantic.Field(default=..., ge=0)
    """The index of the window in row-major generation order"""

    origin_x: int = pydantic.Field(default=..., ge=0)
    origin_y: int = pydantic.Field(default=..., ge=0)

    window_size: pydantic.PositiveInt = pydantic.Field(default=1200)
    """The edge length of the window on the page"""

    input_size: pydantic.PositiveInt = pydantic.Field(default=512)
    """The edge length of the detector input the window is resampled to"""

    clamped: bool = pydantic.Field(default=False)
    """The window was moved flush to the page edge, or the page is smaller than the window"""

    @property
    def to_input(self) -> Transform:
        """Maps window crop coordinates to detector input coordinates"""
        return Transform.scaling(fractions.Fraction(self.input_size, self.window_size))

    @property
    def page_rect(self) -> Rect:
        """The window extent in page coordinates (may exceed small, padded pages)"""
        return Rect.of(
            self.origin_x, self.origin_y, self.origin_x + self.window_size, self.origin_y + self.window_size
        )


class CroppedFormula(_BaseModel):
    """A formula clipped to a window and transformed to detector input coordinates"""

    rect: Rect = pydantic.Field(default=...)
    """The clipped formula in detector input coordinates"""

    coverage: float = pydantic.Field(default=..., ge=0.0, le=1.0)
    """The clipped area divided by the full area of the formula"""

    source_index: int = pydantic.Field(default=..., ge=0)
    """The index of the formula in the list that was cropped"""
