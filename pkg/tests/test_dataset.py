import io
import logging

import numpy
import pytest

import dataset
import enums
import exceptions
import windowing
from dataset import synthetic
from models.geometry import Rect, Transform

HEADER = "doc_id,page,char_id,left,top,right,bottom,label,is_math,parent_id,relationship\n"

# Two formulas on page 1 of doc "a" (x^2 + y and an isolated alpha) next to plain text,
# plus one formula on page 0
CHARACTERS = HEADER + (
    "a,1,c1,10,10,20,30,x,1,,\n"
    "a,1,c2,20,5,26,12,2,1,c1,sup\n"
    "a,1,c3,30,10,40,30,+,1,c1,h\n"
    "a,1,c4,45,10,55,30,y,1,c3,horizontal\n"
    "a,1,t1,100,10,110,30,T,0,,\n"
    "a,1,t2,110,10,120,30,e,0,t1,h\n"
    "a,1,c5,200,100,210,120,alpha,1,t2,h\n"
    "a,0,z1,5,5,9,9,z,1,,\n"
)


@pytest.fixture
def pages():
    return dataset.parse_gtdb(io.StringIO(CHARACTERS))


def test_pages_are_sorted_and_sized_by_their_extent(pages):
    assert [page.key for page in pages] == [("a", 0), ("a", 1)]
    assert pages[0].page_size == (9, 9)
    assert pages[1].page_size == (210, 120)


def test_formulas_follow_math_parent_links(pages):
    formulas = pages[1].formulas
    assert [f.bbox for f in formulas] == [Rect.of(10, 5, 55, 30), Rect.of(200, 100, 210, 120)]
    assert formulas[0].member_char_ids == ["c1", "c2", "c3", "c4"]
    # a math character attached to text starts a formula of its own
    assert formulas[1].member_char_ids == ["c5"]
    assert [f.formula_id for f in formulas] == ["0", "1"]


def test_grouping_does_not_depend_on_the_row_order(pages, rng):
    characters = list(pages[1].characters)
    expected = dataset.group_formulas(characters)
    for _ in range(20):
        rng.shuffle(characters)
        assert dataset.group_formulas(characters) == expected


def test_relationship_labels_are_normalized(pages):
    relationships = {c.char_id: c.relationship for c in pages[1].characters}
    assert relationships["c2"] == enums.Relationship.SUPERSCRIPT
    assert relationships["c3"] == enums.Relationship.HORIZONTAL
    assert relationships["c1"] == enums.Relationship.NONE


def test_unknown_relationships_are_mapped_to_none(caplog):
    text = HEADER + "a,0,c1,0,0,5,5,x,1,,\na,0,c2,5,0,9,5,y,1,c1,diagonal\n"
    with caplog.at_level(logging.WARNING):
        (page,) = dataset.parse_gtdb(io.StringIO(text))
    assert page.characters[1].relationship == enums.Relationship.NONE
    assert "diagonal" in caplog.text


def test_inclusive_coordinates_are_converted():
    (page,) = dataset.parse_gtdb(io.StringIO(HEADER + "a,0,c1,0,0,4,4,x,1,,\n"), inclusive=True)
    assert page.characters[0].bbox == Rect.of(0, 0, 5, 5)


def test_explicit_page_sizes_are_used():
    (page,) = dataset.parse_gtdb(io.StringIO(HEADER + "a,0,c1,0,0,4,4,x,1,,\n"), page_sizes={("a", 0): (100, 50)})
    assert page.page_size == (100, 50)
    with pytest.raises(exceptions.DataError):
        dataset.parse_gtdb(io.StringIO(HEADER + "a,0,c1,0,0,40,40,x,1,,\n"), page_sizes={("a", 0): (10, 10)})


@pytest.mark.parametrize(
    "rows, error_code",
    [
        ("a,0,c1,0,0,4,4,x,1,c9,h\n", "DANGLING_PARENT"),
        ("a,0,c1,0,0,4,4,x,1,,\na,0,c1,5,0,9,4,y,1,,\n", "DUPLICATE_CHARACTER"),
        ("a,0,c1,4,0,4,4,x,1,,\n", "MALFORMED_ROW"),
        ("a,zero,c1,0,0,4,4,x,1,,\n", "MALFORMED_ROW"),
        ("a,0,c1,0,0,4,4,x,maybe,,\n", "MALFORMED_ROW"),
        ("a,0,c1,0,0,4\n", "MALFORMED_ROW"),
    ],
)
def test_invalid_character_rows(rows, error_code):
    with pytest.raises(exceptions.DataError) as e:
        dataset.parse_gtdb(io.StringIO(HEADER + rows))
    assert e.value.error_code == error_code
    assert e.value.exit_code == enums.ExitCode.DATA_ERROR


def test_missing_columns_are_reported():
    with pytest.raises(exceptions.DataError) as e:
        dataset.parse_gtdb(io.StringIO("doc_id,page,char_id\na,0,c1\n"))
    assert e.value.error_code == "MISSING_COLUMNS"


def test_collection_statistics(pages):
    stats = dataset.collection_stats(pages)
    assert (stats.docs, stats.pages, stats.total) == (1, 2, 3)
    assert (stats.single_symbol_formulas, stats.multi_symbol_formulas) == (2, 1)


def test_aspect_ratio_histogram(pages):
    histogram = dataset.aspect_ratio_histogram(pages)
    assert len(histogram) == len(dataset.ASPECT_RATIO_EDGES) - 1
    counts = {(low, high): count for low, high, count in histogram}
    # 45x25 (1.8), 10x20 (0.5) and 4x4 (1.0)
    assert counts[(1.0, 2.0)] == 2
    assert counts[(0.5, 1.0)] == 1
    assert sum(counts.values()) == 3


def test_split_is_disjoint_and_deterministic(pages):
    many = [page.copy(update={"page_number": n}) for n in range(20) for page in pages[:1]]
    training, validation = dataset.split_pages(many, 0.25, seed=3)
    assert len(validation) == 5 and len(training) == 15
    assert {p.page_number for p in training}.isdisjoint(p.page_number for p in validation)
    assert dataset.split_pages(many, 0.25, seed=3) == (training, validation)
    with pytest.raises(ValueError):
        dataset.split_pages(many, 1.5)


def test_formula_files_are_loaded(tmp_path, pages):
    path = tmp_path / "formulas.csv"
    with open(path, "w", newline="") as stream:
        assert dataset.write_formula_csv(stream, pages) == 3
    loaded = dataset.load_ground_truth(path)
    assert [page.formula_rects for page in loaded] == [page.formula_rects for page in pages]
    assert all(page.characters == [] for page in loaded)


def test_character_files_are_loaded(tmp_path, pages):
    path = tmp_path / "characters.csv"
    with open(path, "w", newline="") as stream:
        dataset.write_character_csv(stream, pages)
    assert dataset.load_ground_truth(path) == pages


def test_unknown_ground_truth_files(tmp_path):
    with pytest.raises(exceptions.DataError) as e:
        dataset.load_ground_truth(tmp_path / "missing.csv")
    assert e.value.error_code == "GROUND_TRUTH_MISSING"
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(exceptions.DataError) as e:
        dataset.load_ground_truth(path)
    assert e.value.error_code == "UNKNOWN_GROUND_TRUTH_FORMAT"


def test_adjusting_the_ground_truth_to_a_scaled_page(pages):
    adjusted = dataset.adjust_ground_truth(pages[1], Transform.scaling(2))
    assert adjusted.page_size == (420, 240)
    assert adjusted.formulas[0].bbox == Rect.of(20, 10, 110, 60)
    with pytest.raises(exceptions.DataError):
        dataset.adjust_ground_truth(pages[1], Transform.scaling(1, offset_x=50))


def test_synthetic_pages_honour_the_coverage_requirement(rng):
    image, page = synthetic.synthesize_page(rng, "syn", 4, formula_count=4, min_coverage=30)
    assert page.key == image.key == ("syn", 4)
    assert len(page.formulas) == 4
    x_counts, y_counts = windowing.coverage_counts(page.page_size, 1200, 120)
    for formula in page.formula_rects:
        region = image.pixels[formula.top : formula.bottom, formula.left : formula.right]
        assert (region == 0).all()
        assert x_counts[formula.left : formula.right].min() * y_counts[formula.top : formula.bottom].min() >= 30
    assert int((image.pixels == 0).sum()) == sum(f.area for f in page.formula_rects)


def test_synthetic_corpus_is_reproducible():
    first = synthetic.synthesize_corpus(5, 2)
    second = synthetic.synthesize_corpus(5, 2)
    assert [page for _, page in first] == [page for _, page in second]
    assert all(numpy.array_equal(a.pixels, b.pixels) for (a, _), (b, _) in zip(first, second))
