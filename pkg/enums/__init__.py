import enum


class VoteMethod(str, enum.Enum):
    """The scoring functions which may be used to turn the stitched detections into pixel votes"""

    UNIFORM = "uniform"
    """Count the detections covering a pixel"""

    MAX = "max"
    """Use the highest confidence of all detections covering a pixel"""

    SUM = "sum"
    """Sum up the confidences of all detections covering a pixel"""

    AVERAGE = "average"
    """Divide the summed confidences by the number of detections covering a pixel"""


class Relationship(str, enum.Enum):
    """
    The spatial relationship between a character and its parent character as annotated in the
    character level ground truth
    """

    HORIZONTAL = "horizontal"
    SUBSCRIPT = "subscript"
    SUPERSCRIPT = "superscript"
    ABOVE = "above"
    BELOW = "below"
    INSIDE = "inside"
    NONE = "none"
    """The character has no (known) relationship to a parent"""


class DetectorKind(str, enum.Enum):
    """The window level detectors which are available in the pipeline"""

    ORACLE = "oracle"
    """Emit the (optionally jittered) ground truth of the window"""

    HEURISTIC = "heuristic"
    """Group connected ink components into text line fragments. This is a weak baseline"""

    EXTERNAL = "external"
    """Read the detections of an external detector from a detection CSV file"""


class ConfidenceModel(str, enum.Enum):
    """The way the oracle detector assigns confidences to its detections"""

    CONSTANT = "constant"
    """Every detection gets the confidence 1.0"""

    UNIFORM = "uniform"
    """The confidence is drawn uniformly from the interval [low, 1.0]"""


class CharacterRule(str, enum.Enum):
    """The rule deciding if a character is located within a detection"""

    AREA = "area"
    """At least the configured fraction of the character box lies inside the detection"""

    CENTER = "center"
    """The center point of the character box lies inside the detection"""


class GroundTruthFormat(str, enum.Enum):
    """The ground truth file layouts which may be ingested"""

    CHARACTERS = "characters"
    """GTDB style character level CSV file"""

    FORMULAS = "formulas"
    """Formula region CSV file"""


class PipelineStage(str, enum.Enum):
    """The stages of the pipeline. Used for attributing failures and timings"""

    INGEST = "ingest"
    TILE = "tile"
    DETECT = "detect"
    POSTPROCESS = "postprocess"
    STITCH = "stitch"
    VOTE = "vote"
    COMPONENTS = "components"
    EVALUATE = "evaluate"
    TUNE = "tune"
    EXPORT = "export"


class ExitCode(int, enum.Enum):
    """The exit codes of the command line interface"""

    SUCCESS = 0
    USAGE = 1
    """The command line or the configuration file contained invalid values"""

    DATA_ERROR = 2
    """An input file was missing or contained invalid data"""

    STAGE_FAILURE = 3
    """A pipeline stage failed while processing valid inputs"""
