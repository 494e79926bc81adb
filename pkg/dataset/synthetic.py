"""Synthetic pages with black box formulas for end-to-end runs without scanned data"""
import typing

import numpy

import enums
import geometry
import windowing
from models.dataset import CharacterRecord, GroundTruthPage
from models.geometry import Rect
from models.windowing import PageImage

from . import group_formulas


def synthesize_page(
    rng: numpy.random.Generator,
    doc_id: str,
    page_number: int,
    page_size: typing.Tuple[int, int] = (2400, 3000),
    formula_count: int = 3,
    width_range: typing.Tuple[int, int] = (150, 400),
    height_range: typing.Tuple[int, int] = (40, 120),
    margin: int = 150,
    separation: int = 200,
    window_size: int = 1200,
    stride: int = 120,
    min_coverage: int = 0,
    max_attempts: int = 10_000,
) -> typing.Tuple[PageImage, GroundTruthPage]:
    """
    Create a white page with filled black rectangles as formulas

    Every formula is made of one to four abutting characters linked by horizontal relationships.

    :param rng: The random generator
    :param doc_id: The document id of the page
    :param page_number: The page number
    :param page_size: The (width, height) of the page
    :param formula_count: The number of formulas on the page
    :param width_range: The inclusive range of formula widths
    :param height_range: The inclusive range of formula heights
    :param margin: The minimal distance between a formula and the page edges
    :param separation: The minimal distance between two formulas
    :param window_size: The sliding window size used for the coverage requirement
    :param stride: The sliding window stride used for the coverage requirement
    :param min_coverage: Every formula pixel needs to be covered by at least this many windows
    :param max_attempts: The number of placements tried before giving up
    :return: The page image and its ground truth
    :raises ValueError: The formulas could not be placed
    """
    width, height = page_size
    x_counts, y_counts = windowing.coverage_counts(page_size, window_size, stride)
    placed: typing.List[Rect] = []
    attempts = 0
    while len(placed) < formula_count:
        attempts += 1
        if attempts > max_attempts:
            raise ValueError(f"Unable to place {formula_count} formulas on a {width}x{height} page")
        w = int(rng.integers(width_range[0], width_range[1] + 1))
        h = int(rng.integers(height_range[0], height_range[1] + 1))
        if width - 2 * margin - w < 0 or height - 2 * margin - h < 0:
            continue
        x = int(rng.integers(margin, width - margin - w + 1))
        y = int(rng.integers(margin, height - margin - h + 1))
        candidate = Rect.of(x, y, x + w, y + h)
        if int(x_counts[x : x + w].min()) * int(y_counts[y : y + h].min()) < min_coverage:
            continue
        grown = geometry.expand(candidate, separation)
        if any(geometry.intersection(grown, other) is not None for other in placed):
            continue
        placed.append(candidate)

    pixels = numpy.full((height, width), 255, dtype=numpy.uint8)
    characters = []
    for index, rect in enumerate(placed):
        pixels[rect.top : rect.bottom, rect.left : rect.right] = 0
        pieces = int(rng.integers(1, 5))
        edges = numpy.linspace(rect.left, rect.right, pieces + 1).round().astype(int)
        for piece in range(pieces):
            characters.append(
                CharacterRecord(
                    char_id=f"{index}.{piece}",
                    bbox=Rect.of(edges[piece], rect.top, edges[piece + 1], rect.bottom),
                    label="x",
                    is_math=True,
                    parent_id=f"{index}.{piece - 1}" if piece > 0 else None,
                    relationship=enums.Relationship.HORIZONTAL if piece > 0 else enums.Relationship.NONE,
                )
            )
    page = GroundTruthPage(
        doc_id=doc_id,
        page_number=page_number,
        page_size=page_size,
        characters=characters,
        formulas=group_formulas(characters),
    )
    return PageImage(doc_id=doc_id, page_number=page_number, pixels=pixels), page


def synthesize_corpus(
    seed: int, page_count: int, doc_id: str = "synthetic", **page_options
) -> typing.List[typing.Tuple[PageImage, GroundTruthPage]]:
    """Create page_count synthetic pages of one document, deterministically for a seed"""
    rng = numpy.random.default_rng(seed)
    return [synthesize_page(rng, doc_id, page_number, **page_options) for page_number in range(page_count)]
