"""Ingestion of character level ground truth and derivation of formula regions"""
import collections
import logging
import math
import pathlib
import typing

import numpy
import pydantic

import enums
import exceptions
import formats
import geometry
from models.dataset import CharacterRecord, CollectionStats, FormulaRegion, GroundTruthPage
from models.geometry import Rect, Transform

_logger = logging.getLogger(__name__)

PageSizes = typing.Mapping[formats.PageKey, typing.Tuple[int, int]]

_RELATIONSHIP_ALIASES = {
    "": enums.Relationship.NONE,
    "-": enums.Relationship.NONE,
    "h": enums.Relationship.HORIZONTAL,
    "hor": enums.Relationship.HORIZONTAL,
    "right": enums.Relationship.HORIZONTAL,
    "sub": enums.Relationship.SUBSCRIPT,
    "sup": enums.Relationship.SUPERSCRIPT,
    "super": enums.Relationship.SUPERSCRIPT,
    "upper": enums.Relationship.ABOVE,
    "over": enums.Relationship.ABOVE,
    "lower": enums.Relationship.BELOW,
    "under": enums.Relationship.BELOW,
    "in": enums.Relationship.INSIDE,
    "root": enums.Relationship.INSIDE,
}

# Bin edges of the formula aspect ratio histogram
ASPECT_RATIO_EDGES = (0.0, 1 / 3, 1 / 2, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, math.inf)


def normalize_relationship(label: str) -> typing.Optional[enums.Relationship]:
    """Map a relationship label to the known vocabulary. Returns None for unknown labels"""
    label = label.strip().lower()
    try:
        return enums.Relationship(label)
    except ValueError:
        return _RELATIONSHIP_ALIASES.get(label)


def _extent(rects: typing.Iterable[Rect]) -> typing.Tuple[int, int]:
    rects = list(rects)
    if not rects:
        return 1, 1
    return max(r.right for r in rects), max(r.bottom for r in rects)


def _build_page(
    key: formats.PageKey,
    characters: typing.List[CharacterRecord],
    formulas: typing.List[FormulaRegion],
    page_sizes: typing.Optional[PageSizes],
) -> GroundTruthPage:
    page_size = (page_sizes or {}).get(key)
    if page_size is None:
        page_size = _extent([c.bbox for c in characters] + [f.bbox for f in formulas])
    try:
        return GroundTruthPage(
            doc_id=key[0], page_number=key[1], page_size=page_size, characters=characters, formulas=formulas
        )
    except pydantic.ValidationError as e:
        raise exceptions.DataError(
            "BOX_OUTSIDE_PAGE", "Ground truth outside of the page", f"Page {key[0]}/{key[1]}: {e}"
        )


def parse_gtdb(
    stream: typing.TextIO, inclusive: bool = False, page_sizes: typing.Optional[PageSizes] = None
) -> typing.List[GroundTruthPage]:
    """
    Parse a character level ground truth CSV file

    The rows are grouped into pages, the parent references are validated and the formula
    regions are derived from the math characters.

    :param stream: The opened CSV file (header required)
    :param inclusive: The right and bottom coordinates of the file are inclusive and are converted to
        the half-open convention
    :param page_sizes: The (width, height) of the page images. Pages without an entry use the extent
        of their boxes
    :return: The pages ordered by document and page number
    :raises exceptions.DataError: A row is malformed or a parent reference does not resolve
    """
    table = "character"
    grouped: typing.Dict[formats.PageKey, typing.List[CharacterRecord]] = {}
    unknown_relationships = collections.Counter()
    for line, row in formats.read_rows(stream, formats.CHARACTER_COLUMNS, table):
        key = row["doc_id"], formats.parse_int(row, "page", line, table)
        left, top, right, bottom = (
            formats.parse_int(row, name, line, table) for name in ("left", "top", "right", "bottom")
        )
        if inclusive:
            right, bottom = right + 1, bottom + 1
        relationship = normalize_relationship(row["relationship"])
        if relationship is None:
            unknown_relationships[row["relationship"]] += 1
            relationship = enums.Relationship.NONE
        if not row["char_id"]:
            raise exceptions.DataError("MALFORMED_ROW", "Malformed character row", f"Row {line} has no char_id")
        try:
            record = CharacterRecord(
                char_id=row["char_id"],
                bbox=Rect.of(left, top, right, bottom),
                label=row["label"],
                is_math=formats.parse_bool(row, "is_math", line, table),
                parent_id=row["parent_id"] or None,
                relationship=relationship,
            )
        except (pydantic.ValidationError, exceptions.DegenerateRectError) as e:
            raise exceptions.DataError("MALFORMED_ROW", "Malformed character row", f"Row {line}: {e}")
        grouped.setdefault(key, []).append(record)
    for label, count in sorted(unknown_relationships.items()):
        _logger.warning("Mapped %d occurrences of the unknown relationship '%s' to 'none'", count, label)

    pages = []
    for key in sorted(grouped):
        characters = grouped[key]
        ids = collections.Counter(c.char_id for c in characters)
        duplicates = sorted(char_id for char_id, count in ids.items() if count > 1)
        if duplicates:
            raise exceptions.DataError(
                "DUPLICATE_CHARACTER", "Duplicate character id", f"Page {key[0]}/{key[1]} repeats {duplicates}"
            )
        for character in characters:
            if character.parent_id is not None and character.parent_id not in ids:
                raise exceptions.DataError(
                    "DANGLING_PARENT",
                    "Unresolved parent reference",
                    f"The character {character.char_id} on page {key[0]}/{key[1]} references the unknown "
                    f"parent {character.parent_id}",
                )
        formulas = group_formulas(characters)
        pages.append(_build_page(key, characters, formulas, page_sizes))
    return pages


def group_formulas(characters: typing.Sequence[CharacterRecord]) -> typing.List[FormulaRegion]:
    """
    Partition the math characters into formulas

    Two math characters belong to the same formula if they are connected through child/parent
    links between math characters. The result does not depend on the order of the characters.
    """
    math_chars = {c.char_id: c for c in characters if c.is_math}
    parent = {char_id: char_id for char_id in math_chars}

    def find(char_id: str) -> str:
        while parent[char_id] != char_id:
            parent[char_id] = parent[parent[char_id]]
            char_id = parent[char_id]
        return char_id

    for character in math_chars.values():
        if character.parent_id in math_chars:
            a, b = find(character.char_id), find(character.parent_id)
            if a != b:
                parent[max(a, b)] = min(a, b)

    groups: typing.Dict[str, typing.List[str]] = {}
    for char_id in math_chars:
        groups.setdefault(find(char_id), []).append(char_id)

    regions = []
    for members in groups.values():
        members = sorted(members)
        bbox = geometry.union_box(math_chars[char_id].bbox for char_id in members)
        regions.append((bbox.top, bbox.left, members[0], bbox, members))
    regions.sort(key=lambda entry: entry[:3])
    return [
        FormulaRegion(formula_id=str(index), bbox=bbox, member_char_ids=members)
        for index, (_, _, _, bbox, members) in enumerate(regions)
    ]


def formulas_from_characters(page: GroundTruthPage) -> typing.List[FormulaRegion]:
    """Derive the formula regions of a page from its characters"""
    return group_formulas(page.characters)


def adjust_ground_truth(page: GroundTruthPage, t: Transform) -> GroundTruthPage:
    """
    Transform every box of a page, e.g. to follow a rescaled or shifted page image

    :param page: The page
    :param t: The transformation. The page size is scaled with it
    :return: The adjusted page
    :raises exceptions.DataError: A box leaves the page bounds
    """
    width = math.ceil(page.page_size[0] * t.scale_x)
    height = math.ceil(page.page_size[1] * t.scale_y)

    def move(rect: Rect, what: str) -> Rect:
        try:
            moved = geometry.apply_transform(t, rect)
        except exceptions.DegenerateRectError as e:
            raise exceptions.DataError(
                "BOX_OUTSIDE_PAGE", "Adjusted box outside of the page", f"{what}: {e.error_description}"
            )
        if moved.right > width or moved.bottom > height:
            raise exceptions.DataError(
                "BOX_OUTSIDE_PAGE",
                "Adjusted box outside of the page",
                f"{what} was moved to {moved.as_tuple()} outside of the page {width}x{height}",
            )
        return moved

    characters = [c.copy(update={"bbox": move(c.bbox, f"Character {c.char_id}")}) for c in page.characters]
    formulas = [f.copy(update={"bbox": move(f.bbox, f"Formula {f.formula_id}")}) for f in page.formulas]
    return GroundTruthPage(
        doc_id=page.doc_id,
        page_number=page.page_number,
        page_size=(width, height),
        characters=characters,
        formulas=formulas,
    )


def collection_stats(pages: typing.Iterable[GroundTruthPage]) -> CollectionStats:
    """Count the documents, pages and single/multi symbol formulas of a collection"""
    pages = list(pages)
    total = sum(len(page.formulas) for page in pages)
    single = sum(1 for page in pages for formula in page.formulas if len(formula.member_char_ids) == 1)
    return CollectionStats(
        docs=len({page.doc_id for page in pages}),
        pages=len(pages),
        single_symbol_formulas=single,
        multi_symbol_formulas=total - single,
        total=total,
    )


def aspect_ratio_histogram(
    pages: typing.Iterable[GroundTruthPage], edges: typing.Sequence[float] = ASPECT_RATIO_EDGES
) -> typing.List[typing.Tuple[float, float, int]]:
    """
    Count the formulas per aspect ratio bin

    :return: (lower edge, upper edge, count) per bin; the lower edge is inclusive
    """
    ratios = numpy.array(
        [float(geometry.aspect_ratio(formula.bbox)) for page in pages for formula in page.formulas], dtype=float
    )
    bins = numpy.searchsorted(numpy.asarray(edges, dtype=float), ratios, side="right") - 1
    counts = numpy.bincount(bins[(bins >= 0) & (bins < len(edges) - 1)], minlength=len(edges) - 1)
    return [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(edges) - 1)]


def split_pages(
    pages: typing.Sequence[GroundTruthPage], validation_fraction: float = 116 / 569, seed: int = 0
) -> typing.Tuple[typing.List[GroundTruthPage], typing.List[GroundTruthPage]]:
    """
    Split pages into a training and a validation part

    :param pages: The pages to split
    :param validation_fraction: The share of pages put into the validation part
    :param seed: The seed of the random permutation
    :return: (training pages, validation pages), both in input order
    """
    if not 0 <= validation_fraction <= 1:
        raise ValueError("The validation fraction needs to be in [0, 1]")
    count = round(len(pages) * validation_fraction)
    chosen = set(numpy.random.default_rng(seed).permutation(len(pages))[:count].tolist())
    training = [page for index, page in enumerate(pages) if index not in chosen]
    validation = [page for index, page in enumerate(pages) if index in chosen]
    return training, validation


def sniff_format(path: pathlib.Path) -> enums.GroundTruthFormat:
    with open(path, encoding="utf-8", newline="") as stream:
        header = {name.strip() for name in stream.readline().split(",")}
    if "char_id" in header:
        return enums.GroundTruthFormat.CHARACTERS
    if "formula_id" in header:
        return enums.GroundTruthFormat.FORMULAS
    raise exceptions.DataError(
        "UNKNOWN_GROUND_TRUTH_FORMAT",
        "Unknown ground truth format",
        f"The header of {path} neither matches the character nor the formula region layout",
    )


def load_ground_truth(
    path: pathlib.Path, inclusive: bool = False, page_sizes: typing.Optional[PageSizes] = None
) -> typing.List[GroundTruthPage]:
    """
    Load a character level or formula region ground truth file

    :raises exceptions.DataError: The file does not exist or contains invalid data
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise exceptions.DataError(
            "GROUND_TRUTH_MISSING",
            "Ground truth file missing",
            f"The file {path} does not exist",
            stage=enums.PipelineStage.INGEST,
        )
    ground_truth_format = sniff_format(path)
    with open(path, encoding="utf-8", newline="") as stream:
        if ground_truth_format == enums.GroundTruthFormat.CHARACTERS:
            return parse_gtdb(stream, inclusive=inclusive, page_sizes=page_sizes)
        rows = formats.read_formula_rows(stream)
    return [
        _build_page(key, [], [FormulaRegion(formula_id=fid, bbox=rect) for fid, rect in rows[key]], page_sizes)
        for key in sorted(rows)
    ]


def write_formula_csv(stream: typing.TextIO, pages: typing.Iterable[GroundTruthPage]) -> int:
    """Write the formula regions of the pages in the formula region layout"""
    return formats.write_formula_rows(
        stream,
        (
            (page.doc_id, page.page_number, formula.formula_id, formula.bbox)
            for page in pages
            for formula in page.formulas
        ),
    )


def write_character_csv(stream: typing.TextIO, pages: typing.Iterable[GroundTruthPage]) -> int:
    """Write the characters of the pages in the character level layout"""
    return formats.write_rows(
        stream,
        formats.CHARACTER_COLUMNS,
        (
            (
                page.doc_id,
                page.page_number,
                char.char_id,
                *char.bbox.as_tuple(),
                char.label,
                int(char.is_math),
                char.parent_id or "",
                char.relationship.value,
            )
            for page in pages
            for char in page.characters
        ),
    )
