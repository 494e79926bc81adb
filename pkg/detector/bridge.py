"""
File based exchange with external detectors

The windows are exported as a manifest and lossless crops. An external detector writes one
detection CSV row per box in detector input coordinates, which is imported again.
"""
import logging
import pathlib
import typing

import exceptions
import formats
import windowing
from models.detections import WindowDetections
from models.geometry import Rect, ScoredRect
from models.windowing import PageImage, WindowSpec

from . import Detector

_logger = logging.getLogger(__name__)

MANIFEST_NAME = "windows.csv"
CROP_DIRECTORY = "crops"


def bridge_export(
    pages: typing.Iterable[typing.Tuple[PageImage, typing.Sequence[WindowSpec]]], directory: pathlib.Path
) -> pathlib.Path:
    """
    Write the window manifest and the window crops of all pages

    :param pages: The pages together with their windows
    :param directory: The export directory
    :return: The path of the manifest
    """
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for page, windows in pages:
        windowing.write_window_crops(page, windows, directory / CROP_DIRECTORY)
        rows.extend((page.doc_id, page.page_number, w) for w in windows)
    manifest = directory / MANIFEST_NAME
    with open(manifest, "w", newline="") as stream:
        count = formats.write_window_manifest(stream, rows)
    _logger.info("Exported %d windows to %s", count, directory)
    return manifest


DetectionRow = typing.Tuple[int, formats.WindowKey, typing.Tuple[int, int, int, int], float]


def bridge_import(
    stream: typing.TextIO, windows: typing.Mapping[formats.WindowKey, WindowSpec]
) -> typing.Dict[formats.WindowKey, WindowDetections]:
    """
    Read the detections of an external detector

    Boxes reaching beyond the detector input are clamped to it. Every window of the mapping gets an
    entry, windows without rows get no detections.

    :param stream: The detection CSV
    :param windows: The exported windows keyed by (doc_id, page, window_id)
    :return: The detections keyed like the windows, in the order of the rows
    :raises exceptions.DataError: A row names an unknown window, has a confidence outside of [0, 1],
        or does not span any pixel of the detector input
    """
    return import_rows(formats.read_window_detection_rows(stream), windows)


def import_rows(
    rows: typing.Iterable[DetectionRow], windows: typing.Mapping[formats.WindowKey, WindowSpec]
) -> typing.Dict[formats.WindowKey, WindowDetections]:
    """Validate and attach already parsed detection rows to their windows (see bridge_import)"""
    detections: typing.Dict[formats.WindowKey, typing.List[ScoredRect]] = {key: [] for key in windows}
    clamped = 0
    for line, key, coordinates, confidence in rows:
        w = windows.get(key)
        if w is None:
            raise exceptions.DataError(
                "UNKNOWN_WINDOW", "Unknown window", f"Row {line} refers to the unknown window {key}"
            )
        if not 0.0 <= confidence <= 1.0:
            raise exceptions.DataError(
                "CONFIDENCE_OUT_OF_RANGE",
                "Invalid confidence",
                f"Row {line}: the confidence {confidence} is outside of [0, 1]",
            )
        left, top, right, bottom = (min(max(v, 0), w.input_size) for v in coordinates)
        if (left, top, right, bottom) != coordinates:
            clamped += 1
        if left >= right or top >= bottom:
            raise exceptions.DataError(
                "MALFORMED_ROW", "Malformed detection row", f"Row {line}: the box {coordinates} has no area"
            )
        detections[key].append(ScoredRect.of(Rect.of(left, top, right, bottom), confidence))
    if clamped:
        _logger.warning("Clamped %d imported detections to the detector input", clamped)
    return {key: WindowDetections(window_id=key[2], detections=dets) for key, dets in detections.items()}


class ImportedDetector(Detector):
    """Serves previously imported detections of one page as if they were detected now"""

    requires_raster = False

    def __init__(self, doc_id: str, page_number: int, imported: typing.Mapping[formats.WindowKey, WindowDetections]):
        self.doc_id = doc_id
        self.page_number = page_number
        self.imported = imported

    def detect(self, raster, w: WindowSpec) -> WindowDetections:
        result = self.imported.get((self.doc_id, self.page_number, w.window_id))
        if result is None:
            raise exceptions.DetectorError(w.window_id, "The window has no imported detections")
        return result
