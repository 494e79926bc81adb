import fractions
import typing

import pydantic

import exceptions
from . import BaseModel as _BaseModel


class Rect(_BaseModel):
    """
    An integer pixel rectangle using the half-open convention [left, right) x [top, bottom)
    """

    left: pydantic.NonNegativeInt = pydantic.Field(default=...)
    """The first pixel column covered by the rectangle"""

    top: pydantic.NonNegativeInt = pydantic.Field(default=...)
    """The first pixel row covered by the rectangle"""

    right: pydantic.NonNegativeInt = pydantic.Field(default=...)
    """The first pixel column right of the rectangle"""

    bottom: pydantic.NonNegativeInt = pydantic.Field(default=...)
    """The first pixel row below the rectangle"""

    @pydantic.root_validator(skip_on_failure=True)
    def check_extent(cls, values):
        if values["left"] >= values["right"] or values["top"] >= values["bottom"]:
            raise ValueError("A rectangle needs left < right and top < bottom")
        return values

    @classmethod
    def of(cls, left, top, right, bottom) -> "Rect":
        """
        Create a rectangle from its four coordinates

        :param left: The left edge
        :param top: The top edge
        :param right: The right edge (exclusive)
        :param bottom: The bottom edge (exclusive)
        :return: The rectangle
        :raises exceptions.DegenerateRectError: The coordinates do not span any pixel or are negative
        """
        left, top, right, bottom = int(left), int(top), int(right), int(bottom)
        if left < 0 or top < 0:
            raise exceptions.DegenerateRectError((left, top, right, bottom), "The rectangle has negative coordinates")
        if left >= right or top >= bottom:
            raise exceptions.DegenerateRectError((left, top, right, bottom))
        return cls.construct(left=left, top=top, right=right, bottom=bottom)

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> typing.Tuple[fractions.Fraction, fractions.Fraction]:
        return fractions.Fraction(self.left + self.right, 2), fractions.Fraction(self.top + self.bottom, 2)

    def as_tuple(self) -> typing.Tuple[int, int, int, int]:
        return self.left, self.top, self.right, self.bottom

    def shift(self, dx: int, dy: int) -> "Rect":
        return Rect.of(self.left + dx, self.top + dy, self.right + dx, self.bottom + dy)

    def contains_point(self, x, y) -> bool:
        return self.left <= x < self.right and self.top <= y < self.bottom


class ScoredRect(_BaseModel):
    """A rectangle together with the confidence of the detection it represents"""

    rect: Rect = pydantic.Field(default=...)
    """The detected region"""

    confidence: pydantic.confloat(ge=0.0, le=1.0) = pydantic.Field(default=1.0)
    """The confidence of the detection"""

    @classmethod
    def of(cls, rect: Rect, confidence: float) -> "ScoredRect":
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise exceptions.DataError(
                "CONFIDENCE_OUT_OF_RANGE", "Invalid confidence", f"The confidence {confidence} is outside of [0, 1]"
            )
        return cls.construct(rect=rect, confidence=confidence)


class Transform(_BaseModel):
    """
    An axis aligned affine transformation. Coordinates are scaled first and offset afterwards.

    Scales and offsets are stored as exact fractions. Offsets created by users are integers, the
    offsets of inverted transformations may be rational.
    """

    scale_x: fractions.Fraction = pydantic.Field(default=fractions.Fraction(1))
    scale_y: fractions.Fraction = pydantic.Field(default=fractions.Fraction(1))
    offset_x: fractions.Fraction = pydantic.Field(default=fractions.Fraction(0))
    offset_y: fractions.Fraction = pydantic.Field(default=fractions.Fraction(0))

    @pydantic.validator("scale_x", "scale_y", "offset_x", "offset_y", pre=True)
    def convert_to_fraction(cls, v):
        if isinstance(v, fractions.Fraction):
            return v
        if isinstance(v, (int, str)):
            return fractions.Fraction(v)
        if isinstance(v, float):
            return fractions.Fraction(v).limit_denominator(1_000_000)
        raise TypeError("Transform parameters need to be numbers")

    @pydantic.validator("scale_x", "scale_y")
    def check_positive_scale(cls, v):
        if v <= 0:
            raise ValueError("The scale of a transform needs to be strictly positive")
        return v

    @classmethod
    def scaling(cls, scale, offset_x=0, offset_y=0) -> "Transform":
        """Create a transform with the same scale on both axes"""
        return cls(scale_x=scale, scale_y=scale, offset_x=offset_x, offset_y=offset_y)
