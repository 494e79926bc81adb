"""Sliding windows over page images and the mapping between page and detector coordinates"""
import logging
import pathlib
import typing

import cv2
import numpy

import exceptions
import geometry
import tools
from models.geometry import Rect
from models.windowing import CroppedFormula, PageImage, WindowSpec

_logger = logging.getLogger(__name__)


def _axis_origins(dim: int, window_size: int, stride: int) -> typing.List[typing.Tuple[int, bool]]:
    if dim <= window_size:
        return [(0, dim < window_size)]
    origins = [(origin, False) for origin in range(0, dim - window_size + 1, stride)]
    if origins[-1][0] != dim - window_size:
        origins.append((dim - window_size, True))
    return origins


def generate_windows(
    page_size: typing.Tuple[int, int], window_size: int = 1200, stride: int = 120, input_size: int = 512
) -> typing.List[WindowSpec]:
    """
    Place the sliding windows on a page

    Along each axis the windows start at multiples of the stride. If the last of them does not end
    flush with the page edge, a clamped window ending at the edge is appended. Pages smaller than
    the window get a single window per axis which is padded with white when cropped.

    :param page_size: The (width, height) of the page
    :param window_size: The edge length of the windows
    :param stride: The shift between neighbouring windows
    :param input_size: The edge length of the detector input
    :return: The windows in row-major order
    :raises exceptions.UsageError: The stride or the window size is not positive
    """
    if stride <= 0 or window_size <= 0:
        raise exceptions.UsageError(
            "INVALID_WINDOWING", "Invalid windowing", f"Stride ({stride}) and window size need to be positive"
        )
    width, height = page_size
    windows = []
    for origin_y, clamped_y in _axis_origins(height, window_size, stride):
        for origin_x, clamped_x in _axis_origins(width, window_size, stride):
            windows.append(
                WindowSpec(
                    window_id=len(windows),
                    origin_x=origin_x,
                    origin_y=origin_y,
                    window_size=window_size,
                    input_size=input_size,
                    clamped=clamped_x or clamped_y,
                )
            )
    return windows


def coverage_counts(
    page_size: typing.Tuple[int, int], window_size: int = 1200, stride: int = 120
) -> typing.Tuple[numpy.ndarray, numpy.ndarray]:
    """
    Count the windows covering every pixel column and every pixel row

    The number of windows covering the pixel (x, y) is x_counts[x] * y_counts[y].

    :return: The column counts (length width) and the row counts (length height)
    """
    counts = []
    for dim in page_size:
        axis = numpy.zeros(dim + 1, dtype=numpy.int64)
        for origin, _ in _axis_origins(dim, window_size, stride):
            axis[origin] += 1
            axis[min(dim, origin + window_size)] -= 1
        counts.append(numpy.cumsum(axis)[:dim])
    return counts[0], counts[1]


def crop_window(page: PageImage, w: WindowSpec) -> numpy.ndarray:
    """
    Cut a window out of the page and resample it to the detector input size

    Areas outside of the page are filled with white. Downsampling uses area averaging.

    :return: The input_size x input_size 8-bit raster
    """
    crop = page.pixels[w.origin_y : w.origin_y + w.window_size, w.origin_x : w.origin_x + w.window_size]
    if crop.shape != (w.window_size, w.window_size):
        padded = numpy.full((w.window_size, w.window_size), 255, dtype=numpy.uint8)
        padded[: crop.shape[0], : crop.shape[1]] = crop
        crop = padded
    if w.input_size == w.window_size:
        return crop.copy()
    return cv2.resize(crop, (w.input_size, w.input_size), interpolation=cv2.INTER_AREA)


def page_to_window(w: WindowSpec, r: Rect) -> typing.Optional[Rect]:
    """Clip a page rectangle to the window and map it into detector input coordinates"""
    clipped = geometry.intersection(r, w.page_rect)
    if clipped is None:
        return None
    return geometry.apply_transform(w.to_input, clipped.shift(-w.origin_x, -w.origin_y))


def window_to_page(w: WindowSpec, r: Rect) -> Rect:
    """
    Map a rectangle in detector input coordinates back onto the page

    :raises exceptions.DegenerateRectError: The mapped rectangle has no area
    """
    return geometry.apply_transform(geometry.inverse_transform(w.to_input), r).shift(w.origin_x, w.origin_y)


def crop_ground_truth(w: WindowSpec, formulas: typing.Sequence[Rect]) -> typing.List[CroppedFormula]:
    """
    Clip the formulas intersecting a window and map them into detector input coordinates

    :param w: The window
    :param formulas: The formula boxes in page coordinates
    :return: One entry per intersecting formula with the visible fraction of its area
    """
    cropped = []
    for index, formula in enumerate(formulas):
        clipped = geometry.intersection(formula, w.page_rect)
        if clipped is None:
            continue
        cropped.append(
            CroppedFormula(
                rect=geometry.apply_transform(w.to_input, clipped.shift(-w.origin_x, -w.origin_y)),
                coverage=clipped.area / formula.area,
                source_index=index,
            )
        )
    return cropped


def exportable(cropped: CroppedFormula, default_boxes: numpy.ndarray, min_coverage: float = 0.25) -> bool:
    """
    Decide if a window-clipped formula is used as a positive training target

    :param cropped: The clipped formula
    :param default_boxes: (N, 4) array of the default boxes of the detector input
    :param min_coverage: The visible fraction which is always sufficient
    :return: True if enough of the formula is visible or some default box overlaps it by more than 0.5 IOU
    """
    if cropped.coverage >= min_coverage:
        return True
    if len(default_boxes) == 0:
        return False
    inter, union = geometry.overlap_matrix(geometry.as_array([cropped.rect]), default_boxes)
    return bool(numpy.any(2 * inter > union))


def window_name(doc_id: str, page_number: int, window_id: int) -> str:
    return f"{doc_id}_{page_number}_{window_id}"


def write_window_crops(
    page: PageImage, windows: typing.Iterable[WindowSpec], directory: pathlib.Path
) -> typing.List[pathlib.Path]:
    """Write the resampled crops of the windows as lossless PNG files"""
    paths = []
    for w in windows:
        path = pathlib.Path(directory) / f"{window_name(page.doc_id, page.page_number, w.window_id)}.png"
        tools.write_raster(path, crop_window(page, w))
        paths.append(path)
    _logger.debug("Wrote %d window crops of page %s/%s", len(paths), page.doc_id, page.page_number)
    return paths
