import fractions
import functools
import pathlib
import typing

import pydantic

import enums
import exceptions
import models.internal

_ANCHOR_PRESET_FILE = pathlib.Path(__file__).parent / "anchors.json"


@functools.lru_cache(maxsize=1)
def get_anchor_presets() -> models.internal.AnchorPresets:
    return models.internal.AnchorPresets.parse_file(_ANCHOR_PRESET_FILE)


class AnchorConfiguration(pydantic.BaseSettings):
    """Settings describing the SSD default boxes of a detector input"""

    preset: str = pydantic.Field(
        default_factory=lambda: get_anchor_presets().default,
        title="Anchor Preset",
        description="The preset from anchors.json which supplies every value not set explicitly",
        env="CONFIG_ANCHOR_PRESET",
        alias="CONFIG_ANCHOR_PRESET",
    )
    """
    Anchor Preset

    The name of the preset in the anchors.json file. `math512` uses the wide aspect ratios, `ssd512` the
    ratios of the original SSD512 model
    """

    input_size: pydantic.PositiveInt = pydantic.Field(
        default=512,
        title="Detector Input Size",
        description="The edge length of the detector input in pixels",
        env="CONFIG_INPUT_SIZE",
        alias="CONFIG_INPUT_SIZE",
    )
    """
    Detector Input Size

    The edge length of the square detector input the default boxes are laid out on
    """

    grid_sizes: typing.List[pydantic.PositiveInt] = pydantic.Field(
        default=...,
        title="Grid Sizes",
        description="The feature grid resolutions from the finest to the coarsest",
        env="CONFIG_ANCHOR_GRID_SIZES",
        alias="CONFIG_ANCHOR_GRID_SIZES",
    )
    """
    Grid Sizes

    The resolutions of the feature grids. Every grid cell carries one default box per aspect ratio
    """

    scale_min: float = pydantic.Field(
        default=...,
        title="Minimal Scale",
        description="The box scale of the finest grid as a fraction of the input size",
        env="CONFIG_ANCHOR_SCALE_MIN",
        alias="CONFIG_ANCHOR_SCALE_MIN",
    )

    scale_max: float = pydantic.Field(
        default=...,
        title="Maximal Scale",
        description="The box scale of the coarsest grid as a fraction of the input size",
        env="CONFIG_ANCHOR_SCALE_MAX",
        alias="CONFIG_ANCHOR_SCALE_MAX",
    )

    aspect_ratios: typing.List[fractions.Fraction] = pydantic.Field(
        default=...,
        title="Aspect Ratios",
        description="The aspect ratios (width / height) of the default boxes",
        env="CONFIG_ANCHOR_ASPECT_RATIOS",
        alias="CONFIG_ANCHOR_ASPECT_RATIOS",
    )
    """
    Aspect Ratios

    The aspect ratios of the default boxes written as rationals. Set as JSON list in the configuration
    file, e.g. `CONFIG_ANCHOR_ASPECT_RATIOS=["1", "2", "1/2"]`
    """

    variances: typing.Tuple[float, float] = pydantic.Field(
        default=...,
        title="Encoding Variances",
        description="The SSD variances dividing the center and the size offsets",
        env="CONFIG_ANCHOR_VARIANCES",
        alias="CONFIG_ANCHOR_VARIANCES",
    )

    @pydantic.root_validator(pre=True)
    def fill_from_preset(cls, values):
        presets = get_anchor_presets()
        preset_name = values.get("CONFIG_ANCHOR_PRESET", values.get("preset")) or presets.default
        if preset_name not in presets.presets:
            raise ValueError(f"Unknown anchor preset '{preset_name}'. Known: {sorted(presets.presets)}")
        preset = presets.presets[preset_name]
        for field_name in ("grid_sizes", "scale_min", "scale_max", "aspect_ratios", "variances"):
            alias = cls.__fields__[field_name].alias
            if field_name not in values and alias not in values:
                values[alias] = getattr(preset, field_name)
        return values

    @pydantic.validator("aspect_ratios", pre=True, each_item=True)
    def convert_ratio(cls, v):
        try:
            ratio = fractions.Fraction(str(v))
        except ValueError:
            raise ValueError(f"'{v}' is not a rational aspect ratio")
        if ratio <= 0:
            raise ValueError("Aspect ratios need to be positive")
        return ratio

    @pydantic.validator("aspect_ratios")
    def check_ratios_present(cls, v):
        if len(v) == 0:
            raise ValueError("At least one aspect ratio is needed")
        return v

    @pydantic.validator("grid_sizes")
    def check_grid_sizes_decreasing(cls, v):
        if len(v) == 0:
            raise ValueError("At least one grid is needed")
        if any(finer <= coarser for finer, coarser in zip(v, v[1:])):
            raise ValueError("The grid sizes need to be strictly decreasing")
        return v

    @pydantic.validator("scale_min", "scale_max")
    def check_scale_range(cls, v):
        if not 0 < v <= 1:
            raise ValueError("Scales need to be in (0, 1]")
        return v

    @pydantic.root_validator(skip_on_failure=True)
    def check_scale_order(cls, values):
        if values["scale_min"] > values["scale_max"]:
            raise ValueError("The minimal scale may not exceed the maximal scale")
        return values

    class Config:
        env_file = ".env"
        arbitrary_types_allowed = True
        allow_population_by_field_name = True


class OracleConfiguration(pydantic.BaseSettings):
    """Settings for the noise of the oracle detector"""

    position_px: pydantic.NonNegativeInt = pydantic.Field(
        default=0,
        title="Position Jitter",
        description="The maximal shift of the box center in detector input pixels",
        env="CONFIG_ORACLE_POSITION_PX",
        alias="CONFIG_ORACLE_POSITION_PX",
    )

    size_px: pydantic.NonNegativeInt = pydantic.Field(
        default=0,
        title="Size Jitter",
        description="The maximal change of the box width and height in detector input pixels",
        env="CONFIG_ORACLE_SIZE_PX",
        alias="CONFIG_ORACLE_SIZE_PX",
    )

    drop_prob: pydantic.confloat(ge=0.0, le=1.0) = pydantic.Field(
        default=0.0,
        title="Drop Probability",
        description="The probability that a ground truth box is not reported",
        env="CONFIG_ORACLE_DROP_PROB",
        alias="CONFIG_ORACLE_DROP_PROB",
    )

    confidence_model: enums.ConfidenceModel = pydantic.Field(
        default=enums.ConfidenceModel.CONSTANT,
        title="Confidence Model",
        description="How the oracle assigns confidences",
        env="CONFIG_ORACLE_CONFIDENCE_MODEL",
        alias="CONFIG_ORACLE_CONFIDENCE_MODEL",
    )

    confidence_low: pydantic.confloat(ge=0.0, le=1.0) = pydantic.Field(
        default=0.5,
        title="Lowest Confidence",
        description="The lower bound of the uniform confidence model",
        env="CONFIG_ORACLE_CONFIDENCE_LOW",
        alias="CONFIG_ORACLE_CONFIDENCE_LOW",
    )

    class Config:
        env_file = ".env"
        allow_population_by_field_name = True


class PipelineConfiguration(pydantic.BaseSettings):
    """Settings of the formula detection pipeline"""

    window_size: pydantic.PositiveInt = pydantic.Field(
        default=1200,
        title="Window Size",
        description="The edge length of the sliding window in page pixels",
        env="CONFIG_WINDOW_SIZE",
        alias="CONFIG_WINDOW_SIZE",
    )
    """
    Window Size

    The edge length of the sliding window. 1200 pixels are roughly ten text lines at 600 dpi
    """

    stride: pydantic.PositiveInt = pydantic.Field(
        default=120,
        title="Window Stride",
        description="The horizontal and vertical shift between two windows in page pixels",
        env="CONFIG_STRIDE",
        alias="CONFIG_STRIDE",
    )

    input_size: pydantic.PositiveInt = pydantic.Field(
        default=512,
        title="Detector Input Size",
        description="The edge length of the detector input the windows are resampled to",
        env="CONFIG_INPUT_SIZE",
        alias="CONFIG_INPUT_SIZE",
    )

    vote_method: enums.VoteMethod = pydantic.Field(
        default=enums.VoteMethod.UNIFORM,
        title="Vote Method",
        description="The scoring function turning stitched detections into pixel scores",
        env="CONFIG_VOTE_METHOD",
        alias="CONFIG_VOTE_METHOD",
    )

    vote_threshold: pydantic.confloat(ge=0.0) = pydantic.Field(
        default=30,
        title="Vote Threshold",
        description="Pixels scoring at least this value are part of a formula",
        env="CONFIG_VOTE_THRESHOLD",
        alias="CONFIG_VOTE_THRESHOLD",
    )

    vote_downscale: pydantic.PositiveInt = pydantic.Field(
        default=4,
        title="Vote Map Downscale",
        description="The factor by which the vote map resolution is reduced (1 = full resolution)",
        env="CONFIG_VOTE_DOWNSCALE",
        alias="CONFIG_VOTE_DOWNSCALE",
    )

    nms_iou: pydantic.confloat(gt=0.0, le=1.0) = pydantic.Field(
        default=0.45,
        title="NMS IOU Threshold",
        description="Window detections overlapping a stronger one by more than this IOU are suppressed",
        env="CONFIG_NMS_IOU",
        alias="CONFIG_NMS_IOU",
    )

    detector: enums.DetectorKind = pydantic.Field(
        default=enums.DetectorKind.ORACLE,
        title="Detector",
        description="The window level detector",
        env="CONFIG_DETECTOR",
        alias="CONFIG_DETECTOR",
    )

    seed: int = pydantic.Field(
        default=0,
        title="Random Seed",
        description="The seed of the oracle noise and the synthetic pages",
        env="CONFIG_SEED",
        alias="CONFIG_SEED",
    )

    workers: pydantic.PositiveInt = pydantic.Field(
        default=1,
        title="Worker Count",
        description="The number of processes working on pages concurrently",
        env="CONFIG_WORKERS",
        alias="CONFIG_WORKERS",
    )

    logging_level: str = pydantic.Field(
        default="INFO",
        title="Logging Level",
        description="The level which is used for the root logger, which will display messages from this and levels "
        "above",
        env="CONFIG_LOGGING_LEVEL",
        alias="CONFIG_LOGGING_LEVEL",
    )

    export_coverage: pydantic.confloat(ge=0.0, le=1.0) = pydantic.Field(
        default=0.25,
        title="Export Coverage",
        description="The visible fraction a window-clipped formula needs to be exported as training target",
        env="CONFIG_EXPORT_COVERAGE",
        alias="CONFIG_EXPORT_COVERAGE",
    )

    prestitch_postprocess: bool = pydantic.Field(
        default=True,
        title="Crop Before Stitching",
        description="Crop window detections around the ink they touch before stitching",
        env="CONFIG_PRESTITCH_POSTPROCESS",
        alias="CONFIG_PRESTITCH_POSTPROCESS",
    )

    postpool_postprocess: bool = pydantic.Field(
        default=True,
        title="Crop After Pooling",
        description="Crop the pooled regions around the ink they touch",
        env="CONFIG_POSTPOOL_POSTPROCESS",
        alias="CONFIG_POSTPOOL_POSTPROCESS",
    )

    drop_inkless: bool = pydantic.Field(
        default=True,
        title="Drop Inkless Detections",
        description="Drop detections which do not touch any ink (keep them unchanged otherwise)",
        env="CONFIG_DROP_INKLESS",
        alias="CONFIG_DROP_INKLESS",
    )

    ink_tolerance: pydantic.NonNegativeInt = pydantic.Field(
        default=1,
        title="Ink Touch Tolerance",
        description="Ink components this many pixels away from a box count as touching it",
        env="CONFIG_INK_TOLERANCE",
        alias="CONFIG_INK_TOLERANCE",
    )

    heuristic_gap: pydantic.NonNegativeInt = pydantic.Field(
        default=12,
        title="Heuristic Merge Gap",
        description="The heuristic detector merges ink components up to this horizontal gap in input pixels",
        env="CONFIG_HEURISTIC_GAP",
        alias="CONFIG_HEURISTIC_GAP",
    )

    heuristic_min_area: pydantic.NonNegativeInt = pydantic.Field(
        default=4,
        title="Heuristic Minimal Area",
        description="Ink components with fewer pixels are ignored by the heuristic detector",
        env="CONFIG_HEURISTIC_MIN_AREA",
        alias="CONFIG_HEURISTIC_MIN_AREA",
    )

    char_containment: pydantic.confloat(gt=0.0, le=1.0) = pydantic.Field(
        default=0.5,
        title="Character Containment",
        description="The fraction of a character box that needs to be inside a detection to count as math",
        env="CONFIG_CHAR_CONTAINMENT",
        alias="CONFIG_CHAR_CONTAINMENT",
    )

    gt_inclusive: bool = pydantic.Field(
        default=False,
        title="Inclusive Ground Truth Coordinates",
        description="The right and bottom coordinates of the character ground truth are inclusive",
        env="CONFIG_GT_INCLUSIVE",
        alias="CONFIG_GT_INCLUSIVE",
    )

    images_dir: typing.Optional[pathlib.Path] = pydantic.Field(
        default=None,
        title="Page Image Directory",
        description="The directory containing the page rasters named {doc_id}_{page}.png",
        env="CONFIG_IMAGES_DIR",
        alias="CONFIG_IMAGES_DIR",
    )

    ground_truth: typing.Optional[pathlib.Path] = pydantic.Field(
        default=None,
        title="Ground Truth File",
        description="A character level GTDB CSV file or a formula region CSV file",
        env="CONFIG_GROUND_TRUTH",
        alias="CONFIG_GROUND_TRUTH",
    )

    detections: typing.Optional[pathlib.Path] = pydantic.Field(
        default=None,
        title="Detection File",
        description="A window level detection CSV (external detector, pool, tune) or page level CSV (evaluate)",
        env="CONFIG_DETECTIONS",
        alias="CONFIG_DETECTIONS",
    )

    output_dir: pathlib.Path = pydantic.Field(
        default=pathlib.Path("output"),
        title="Output Directory",
        description="The directory all artifacts of a run are written to",
        env="CONFIG_OUTPUT_DIR",
        alias="CONFIG_OUTPUT_DIR",
    )

    render_overlays: bool = pydantic.Field(
        default=False,
        title="Render Overlays",
        description="Draw the ground truth and the detections onto the page images",
        env="CONFIG_RENDER_OVERLAYS",
        alias="CONFIG_RENDER_OVERLAYS",
    )

    dump_heatmaps: bool = pydantic.Field(
        default=False,
        title="Dump Heat Maps",
        description="Write the pixel scores of the vote map as image per page",
        env="CONFIG_DUMP_HEATMAPS",
        alias="CONFIG_DUMP_HEATMAPS",
    )

    anchors: AnchorConfiguration = pydantic.Field(default_factory=AnchorConfiguration)
    """The default box layout used for exporting training targets"""

    oracle: OracleConfiguration = pydantic.Field(default_factory=OracleConfiguration)
    """The noise of the oracle detector"""

    @pydantic.root_validator(skip_on_failure=True)
    def check_stride(cls, values):
        if values["stride"] > values["window_size"]:
            raise ValueError("The stride may not exceed the window size, otherwise pixels stay uncovered")
        if values["anchors"].input_size != values["input_size"]:
            raise ValueError("The anchor configuration uses a different input size than the pipeline")
        return values

    class Config:
        env_file = ".env"
        arbitrary_types_allowed = True
        allow_population_by_field_name = True


def _by_alias(
    settings: typing.Type[pydantic.BaseSettings], values: typing.Dict[str, typing.Any]
) -> typing.Dict[str, typing.Any]:
    """Key values by the alias the environment and the configuration file use, so they replace those values"""
    return {settings.__fields__[name].alias: value for name, value in values.items()}


def load(
    config_file: typing.Optional[pathlib.Path] = None, overrides: typing.Optional[typing.Dict[str, typing.Any]] = None
) -> PipelineConfiguration:
    """
    Load the pipeline configuration

    Values are taken from the overrides first, then from the process environment, then from the
    configuration file and finally from the defaults.

    :param config_file: A key=value file (e.g. CONFIG_STRIDE=120). Defaults to ".env"
    :param overrides: Values keyed by field name. Oracle and anchor values use the prefixes
        "oracle_" and "anchor_", e.g. "oracle_drop_prob"
    :return: The validated configuration
    :raises exceptions.UsageError: The configuration file is missing or a value is invalid
    """
    overrides = dict(overrides or {})
    if config_file is not None and not pathlib.Path(config_file).is_file():
        raise exceptions.UsageError(
            "CONFIG_FILE_MISSING", "Configuration file missing", f"The file {config_file} does not exist"
        )
    env_file = config_file if config_file is not None else ".env"
    oracle_overrides = {k[len("oracle_") :]: overrides.pop(k) for k in list(overrides) if k.startswith("oracle_")}
    anchor_overrides = {k[len("anchor_") :]: overrides.pop(k) for k in list(overrides) if k.startswith("anchor_")}
    if "input_size" in overrides:
        anchor_overrides.setdefault("input_size", overrides["input_size"])
    unknown = set(overrides) - set(PipelineConfiguration.__fields__)
    unknown |= {f"oracle_{k}" for k in set(oracle_overrides) - set(OracleConfiguration.__fields__)}
    unknown |= {f"anchor_{k}" for k in set(anchor_overrides) - set(AnchorConfiguration.__fields__)}
    if unknown:
        raise exceptions.UsageError(
            "UNKNOWN_SETTING", "Unknown setting", f"The following settings are unknown: {sorted(unknown)}"
        )
    try:
        return PipelineConfiguration(
            _env_file=env_file,
            anchors=AnchorConfiguration(_env_file=env_file, **_by_alias(AnchorConfiguration, anchor_overrides)),
            oracle=OracleConfiguration(_env_file=env_file, **_by_alias(OracleConfiguration, oracle_overrides)),
            **_by_alias(PipelineConfiguration, overrides),
        )
    except pydantic.ValidationError as e:
        raise exceptions.UsageError("INVALID_CONFIGURATION", "Invalid configuration", str(e))
