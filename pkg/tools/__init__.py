import contextlib
import hashlib
import importlib.metadata
import logging
import pathlib
import time
import typing

import cv2
import numpy
import orjson

import enums
import exceptions

_logger = logging.getLogger(__name__)

PAGE_IMAGE_SUFFIX = ".png"
_VERSIONED_PACKAGES = ("numpy", "opencv-python-headless", "pydantic", "orjson", "python-dotenv")


@contextlib.contextmanager
def stage_timer(stage: enums.PipelineStage, subject: str = ""):
    """
    Log the duration of a pipeline stage and attribute unexpected failures to it

    :param stage: The stage which is executed inside the context
    :param subject: A short description of what the stage works on (e.g. the page)
    :raises exceptions.StageError: The stage raised an exception which is not a pipeline exception
    """
    start = time.perf_counter()
    try:
        yield
    except exceptions.PipelineException as e:
        if e.stage is None:
            e.stage = stage
        raise
    except Exception as e:
        message = f"{type(e).__name__}: {e}"
        raise exceptions.StageError(stage, f"{subject}: {message}" if subject else message) from e
    _logger.info("Stage '%s' %s finished in %.3f s", stage.value, subject, time.perf_counter() - start)


def sha256_file(path: pathlib.Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as stream:
        for chunk in iter(lambda: stream.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _default(value):
    return str(value)


def config_hash(config: typing.Mapping[str, typing.Any]) -> str:
    """Hash a configuration independent of the key order"""
    data = orjson.dumps(config, option=orjson.OPT_SORT_KEYS, default=_default)
    return hashlib.sha3_256(data).hexdigest()


def dump_json(path: pathlib.Path, data: typing.Any) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2, default=_default))


def package_versions() -> typing.Dict[str, str]:
    versions = {}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = importlib.metadata.version(name)
        except importlib.metadata.PackageNotFoundError:
            versions[name] = "missing"
    return versions


# %% Rasters
def parse_page_name(path: pathlib.Path) -> typing.Tuple[str, int]:
    """
    Split a page image name {doc_id}_{page}.png into the document id and the page number

    :raises exceptions.DataError: The name does not follow the convention
    """
    doc_id, _, page = pathlib.Path(path).stem.rpartition("_")
    if not doc_id or not page.isdigit():
        raise exceptions.DataError(
            "INVALID_PAGE_NAME",
            "Invalid page image name",
            f"{path} is not named {{doc_id}}_{{page}}{PAGE_IMAGE_SUFFIX}",
        )
    return doc_id, int(page)


def page_image_path(directory: pathlib.Path, doc_id: str, page_number: int) -> pathlib.Path:
    return pathlib.Path(directory) / f"{doc_id}_{page_number}{PAGE_IMAGE_SUFFIX}"


def list_page_images(directory: pathlib.Path) -> typing.List[pathlib.Path]:
    """List the page images of a directory ordered by document and page number"""
    directory = pathlib.Path(directory)
    if not directory.is_dir():
        raise exceptions.DataError(
            "IMAGE_DIRECTORY_MISSING", "Page image directory missing", f"The directory {directory} does not exist"
        )
    return sorted(directory.glob(f"*{PAGE_IMAGE_SUFFIX}"), key=parse_page_name)


def read_raster(path: pathlib.Path) -> numpy.ndarray:
    """
    Read an image as 8-bit grayscale raster

    :raises exceptions.DataError: The file is missing or is not a readable image
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise exceptions.DataError("IMAGE_MISSING", "Page image missing", f"The file {path} does not exist")
    raster = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raster is None:
        raise exceptions.DataError("IMAGE_UNREADABLE", "Page image unreadable", f"The file {path} is no image")
    return raster


def write_raster(path: pathlib.Path, raster: numpy.ndarray) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), raster):
        raise exceptions.DataError("IMAGE_NOT_WRITTEN", "Image not written", f"Unable to write {path}")


def render_overlay(
    raster: numpy.ndarray,
    ground_truth: typing.Iterable[typing.Tuple[int, int, int, int]],
    detections: typing.Iterable[typing.Tuple[int, int, int, int]],
) -> numpy.ndarray:
    """Draw the ground truth (green) and the detections (blue) onto a color copy of the page"""
    overlay = cv2.cvtColor(raster, cv2.COLOR_GRAY2BGR)
    for color, boxes in (((0, 200, 0), ground_truth), ((255, 0, 0), detections)):
        for left, top, right, bottom in boxes:
            cv2.rectangle(overlay, (left, top), (right - 1, bottom - 1), color, 3)
    return overlay


def render_heatmap(scores: numpy.ndarray) -> numpy.ndarray:
    """Color a score map: zero stays dark, the maximal score is drawn hottest"""
    peak = float(scores.max()) if scores.size else 0.0
    normalized = numpy.zeros(scores.shape, dtype=numpy.uint8)
    if peak > 0:
        normalized = numpy.clip(scores / peak * 255.0, 0, 255).astype(numpy.uint8)
    return cv2.applyColorMap(normalized, cv2.COLORMAP_JET)
