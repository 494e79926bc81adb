import typing

import pydantic

import enums
from . import BaseModel as _BaseModel
from .geometry import Rect


class CharacterRecord(_BaseModel):
    """One annotated character of the character level ground truth"""

    char_id: str = pydantic.Field(default=...)
    """The identifier of the character, unique within its page"""

    bbox: Rect = pydantic.Field(default=...)
    """The bounding box of the character in page pixels"""

    label: str = pydantic.Field(default="")
    """The label (transcription) of the character"""

    is_math: bool = pydantic.Field(default=False)
    """Indicates if the character belongs to a formula"""

    parent_id: typing.Optional[str] = pydantic.Field(default=None)
    """The identifier of the character this character is attached to"""

    relationship: enums.Relationship = pydantic.Field(default=enums.Relationship.NONE)
    """The spatial relationship to the parent character"""

    @pydantic.validator("parent_id")
    def check_parent_is_not_self(cls, v, values):
        if v is not None and v == values.get("char_id"):
            raise ValueError("A character may not be its own parent")
        return v


class FormulaRegion(_BaseModel):
    """A formula region derived from the math characters or read from a formula region file"""

    formula_id: str = pydantic.Field(default=...)
    """The identifier of the formula, unique within its page"""

    bbox: Rect = pydantic.Field(default=...)
    """The tight bounding box of the formula in page pixels"""

    member_char_ids: typing.List[str] = pydantic.Field(default_factory=list)
    """The characters forming the formula. Empty if the formula was read without character data"""


class GroundTruthPage(_BaseModel):
    """The ground truth of a single document page"""

    doc_id: str = pydantic.Field(default=...)
    """The document the page belongs to"""

    page_number: int = pydantic.Field(default=..., ge=0)
    """The number of the page inside the document"""

    page_size: typing.Tuple[pydantic.PositiveInt, pydantic.PositiveInt] = pydantic.Field(default=...)
    """The (width, height) of the page image in pixels at 600 dpi"""

    characters: typing.List[CharacterRecord] = pydantic.Field(default_factory=list)
    """The annotated characters of the page"""

    formulas: typing.List[FormulaRegion] = pydantic.Field(default_factory=list)
    """The formula regions of the page"""

    @pydantic.root_validator(skip_on_failure=True)
    def check_formulas_inside_page(cls, values):
        width, height = values["page_size"]
        for formula in values["formulas"]:
            if formula.bbox.right > width or formula.bbox.bottom > height:
                raise ValueError(f"The formula {formula.formula_id} exceeds the page bounds {width}x{height}")
        return values

    @property
    def key(self) -> typing.Tuple[str, int]:
        return self.doc_id, self.page_number

    @property
    def formula_rects(self) -> typing.List[Rect]:
        return [formula.bbox for formula in self.formulas]


class CollectionStats(_BaseModel):
    """Counts describing a ground truth collection"""

    docs: int = 0
    pages: int = 0
    single_symbol_formulas: int = 0
    multi_symbol_formulas: int = 0
    total: int = 0
