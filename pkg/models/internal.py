import typing

import pydantic

from . import BaseModel as __BaseModel


class AnchorPreset(__BaseModel):
    grid_sizes: typing.List[pydantic.PositiveInt] = pydantic.Field(default=..., alias="gridSizes")
    """The feature grid resolutions, from the finest to the coarsest"""

    scale_min: float = pydantic.Field(default=..., alias="scaleMin")
    """The default box scale of the finest grid as a fraction of the input size"""

    scale_max: float = pydantic.Field(default=..., alias="scaleMax")
    """The default box scale of the coarsest grid as a fraction of the input size"""

    aspect_ratios: typing.List[str] = pydantic.Field(default=..., alias="aspectRatios")
    """The aspect ratios (width / height) written as rationals, e.g. "1/3" """

    variances: typing.Tuple[float, float] = pydantic.Field(default=(0.1, 0.2), alias="variances")
    """The SSD encoding variances for the center and size offsets"""


class AnchorPresets(__BaseModel):
    presets: typing.Dict[str, AnchorPreset] = pydantic.Field(default=...)
    default: str = pydantic.Field(default=...)
    """The preset used when the configuration does not name one"""


class RunManifest(__BaseModel):
    """The record of a command line run"""

    command: str
    config: typing.Dict[str, typing.Any]
    config_hash: str
    inputs: typing.Dict[str, str] = pydantic.Field(default_factory=dict)
    """The sha256 digests of the files which were read, keyed by path"""

    outputs: typing.Dict[str, str] = pydantic.Field(default_factory=dict)
    """The sha256 digests of the files which were written, keyed by path"""

    versions: typing.Dict[str, str] = pydantic.Field(default_factory=dict)
