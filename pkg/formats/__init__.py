"""The CSV tables read and written by the pipeline"""
import csv
import logging
import typing

import exceptions
from models.detections import PageDetections
from models.geometry import Rect, ScoredRect
from models.windowing import WindowSpec

_logger = logging.getLogger(__name__)

# %% Table layouts
CHARACTER_COLUMNS = (
    "doc_id",
    "page",
    "char_id",
    "left",
    "top",
    "right",
    "bottom",
    "label",
    "is_math",
    "parent_id",
    "relationship",
)
FORMULA_COLUMNS = ("doc_id", "page", "formula_id", "left", "top", "right", "bottom")
WINDOW_MANIFEST_COLUMNS = (
    "doc_id",
    "page",
    "window_id",
    "origin_x",
    "origin_y",
    "window_size",
    "input_size",
    "clamped",
)
WINDOW_DETECTION_COLUMNS = ("doc_id", "page", "window_id", "left", "top", "right", "bottom", "confidence")
PAGE_DETECTION_COLUMNS = ("doc_id", "page", "left", "top", "right", "bottom")
TRAINING_TARGET_COLUMNS = (
    "window_id",
    "box_id",
    "gt_left",
    "gt_top",
    "gt_right",
    "gt_bottom",
    "d_cx",
    "d_cy",
    "d_logw",
    "d_logh",
)
METRICS_COLUMNS = ("scope", "iou", "precision", "recall", "fscore")

PageKey = typing.Tuple[str, int]
WindowKey = typing.Tuple[str, int, int]


# %% Generic readers and writers
def read_rows(
    stream: typing.TextIO, columns: typing.Sequence[str], table: str
) -> typing.Iterator[typing.Tuple[int, typing.Dict[str, str]]]:
    """
    Read the rows of a CSV table with a mandatory header

    :param stream: The opened file
    :param columns: The columns the header needs to contain
    :param table: The name of the table used in error messages
    :return: An iterator over (line number, row) pairs
    :raises exceptions.DataError: The header is missing columns or a row has a wrong number of fields
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        return
    header = [name.strip() for name in reader.fieldnames]
    missing = [column for column in columns if column not in header]
    if missing:
        raise exceptions.DataError(
            "MISSING_COLUMNS", f"Invalid {table} header", f"The header is missing the columns {missing}"
        )
    reader.fieldnames = header
    for row in reader:
        if None in row or any(row[column] is None for column in columns):
            raise exceptions.DataError(
                "MALFORMED_ROW", f"Malformed {table} row", f"Row {reader.line_num} has a wrong number of fields"
            )
        yield reader.line_num, {key: value.strip() for key, value in row.items()}


def write_rows(stream: typing.TextIO, columns: typing.Sequence[str], rows: typing.Iterable[typing.Sequence]) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    count = 0
    for row in rows:
        writer.writerow(row)
        count += 1
    return count


def parse_int(row: typing.Dict[str, str], column: str, line: int, table: str) -> int:
    try:
        return int(row[column])
    except ValueError:
        raise exceptions.DataError(
            "MALFORMED_ROW",
            f"Malformed {table} row",
            f"Row {line}: the column '{column}' contains '{row[column]}' which is not an integer",
        )


def parse_float(row: typing.Dict[str, str], column: str, line: int, table: str) -> float:
    try:
        return float(row[column])
    except ValueError:
        raise exceptions.DataError(
            "MALFORMED_ROW",
            f"Malformed {table} row",
            f"Row {line}: the column '{column}' contains '{row[column]}' which is not a number",
        )


def parse_bool(row: typing.Dict[str, str], column: str, line: int, table: str) -> bool:
    value = row[column].lower()
    if value in ("1", "true", "yes"):
        return True
    if value in ("0", "false", "no", ""):
        return False
    raise exceptions.DataError(
        "MALFORMED_ROW", f"Malformed {table} row", f"Row {line}: '{row[column]}' is not a boolean"
    )


def parse_rect(row: typing.Dict[str, str], line: int, table: str, prefix: str = "") -> Rect:
    coordinates = [parse_int(row, prefix + name, line, table) for name in ("left", "top", "right", "bottom")]
    try:
        return Rect.of(*coordinates)
    except exceptions.DegenerateRectError as e:
        raise exceptions.DataError("MALFORMED_ROW", f"Malformed {table} row", f"Row {line}: {e.error_description}")


def format_confidence(confidence: float) -> str:
    return f"{confidence:.6f}"


# %% Formula regions
def read_formula_rows(stream: typing.TextIO) -> typing.Dict[PageKey, typing.List[typing.Tuple[str, Rect]]]:
    """Read a formula region CSV into (formula id, box) lists keyed by (doc_id, page)"""
    pages: typing.Dict[PageKey, typing.List[typing.Tuple[str, Rect]]] = {}
    for line, row in read_rows(stream, FORMULA_COLUMNS, "formula"):
        key = row["doc_id"], parse_int(row, "page", line, "formula")
        pages.setdefault(key, []).append((row["formula_id"], parse_rect(row, line, "formula")))
    return pages


def write_formula_rows(stream: typing.TextIO, rows: typing.Iterable[typing.Tuple[str, int, str, Rect]]) -> int:
    return write_rows(
        stream, FORMULA_COLUMNS, ((doc_id, page, fid, *rect.as_tuple()) for doc_id, page, fid, rect in rows)
    )


# %% Window manifest
def write_window_manifest(
    stream: typing.TextIO, windows: typing.Iterable[typing.Tuple[str, int, WindowSpec]]
) -> int:
    return write_rows(
        stream,
        WINDOW_MANIFEST_COLUMNS,
        (
            (doc_id, page, w.window_id, w.origin_x, w.origin_y, w.window_size, w.input_size, int(w.clamped))
            for doc_id, page, w in windows
        ),
    )


def read_window_manifest(stream: typing.TextIO) -> typing.Dict[WindowKey, WindowSpec]:
    windows: typing.Dict[WindowKey, WindowSpec] = {}
    for line, row in read_rows(stream, WINDOW_MANIFEST_COLUMNS, "window manifest"):
        table = "window manifest"
        window = WindowSpec(
            window_id=parse_int(row, "window_id", line, table),
            origin_x=parse_int(row, "origin_x", line, table),
            origin_y=parse_int(row, "origin_y", line, table),
            window_size=parse_int(row, "window_size", line, table),
            input_size=parse_int(row, "input_size", line, table),
            clamped=parse_bool(row, "clamped", line, table),
        )
        windows[(row["doc_id"], parse_int(row, "page", line, table), window.window_id)] = window
    return windows


# %% Window level detections
def write_window_detections(
    stream: typing.TextIO, rows: typing.Iterable[typing.Tuple[str, int, int, ScoredRect]]
) -> int:
    return write_rows(
        stream,
        WINDOW_DETECTION_COLUMNS,
        (
            (doc_id, page, window_id, *det.rect.as_tuple(), format_confidence(det.confidence))
            for doc_id, page, window_id, det in rows
        ),
    )


def read_window_detection_rows(
    stream: typing.TextIO,
) -> typing.Iterator[typing.Tuple[int, WindowKey, typing.Tuple[int, int, int, int], float]]:
    """Read the raw rows of a window level detection CSV. Validation is left to the caller"""
    table = "detection"
    for line, row in read_rows(stream, WINDOW_DETECTION_COLUMNS, table):
        key = row["doc_id"], parse_int(row, "page", line, table), parse_int(row, "window_id", line, table)
        coordinates = tuple(parse_int(row, name, line, table) for name in ("left", "top", "right", "bottom"))
        yield line, key, coordinates, parse_float(row, "confidence", line, table)


# %% Page level detections
def write_page_detections(stream: typing.TextIO, pages: typing.Iterable[PageDetections]) -> int:
    return write_rows(
        stream,
        PAGE_DETECTION_COLUMNS,
        ((page.doc_id, page.page_number, *rect.as_tuple()) for page in pages for rect in page.regions),
    )


def read_page_detections(stream: typing.TextIO) -> typing.Dict[PageKey, PageDetections]:
    regions: typing.Dict[PageKey, typing.List[Rect]] = {}
    for line, row in read_rows(stream, PAGE_DETECTION_COLUMNS, "page detection"):
        key = row["doc_id"], parse_int(row, "page", line, "page detection")
        regions.setdefault(key, []).append(parse_rect(row, line, "page detection"))
    return {
        key: PageDetections(doc_id=key[0], page_number=key[1], regions=rects) for key, rects in sorted(regions.items())
    }
