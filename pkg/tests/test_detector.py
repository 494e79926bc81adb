import fractions
import io

import numpy
import pytest

import configuration
import detector
import exceptions
import windowing
from detector import bridge, heuristic, oracle
from models.detections import WindowDetections
from models.geometry import Rect, ScoredRect
from models.windowing import PageImage, WindowSpec

WINDOW = WindowSpec(window_id=7, origin_x=0, origin_y=0, window_size=512, input_size=512)


def reference_nms(dets, threshold):
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    kept = []
    for i in order:
        if all(geometry_iou(dets[i].rect, dets[k].rect) <= threshold for k in kept):
            kept.append(i)
    return [dets[i] for i in kept]


def geometry_iou(a: Rect, b: Rect) -> fractions.Fraction:
    width = max(0, min(a.right, b.right) - max(a.left, b.left))
    height = max(0, min(a.bottom, b.bottom) - max(a.top, b.top))
    inter = width * height
    return fractions.Fraction(inter, a.area + b.area - inter)


@pytest.mark.parametrize("threshold", [0.25, 0.5, 0.75, 1.0])
def test_nms_agrees_with_a_reference(rng, threshold):
    for _ in range(250):
        dets = []
        for _ in range(int(rng.integers(0, 12))):
            left, top = int(rng.integers(0, 40)), int(rng.integers(0, 40))
            rect = Rect.of(left, top, left + int(rng.integers(1, 20)), top + int(rng.integers(1, 20)))
            dets.append(ScoredRect.of(rect, float(rng.choice([0.25, 0.5, 0.75, 1.0]))))
        assert detector.nms(dets, threshold) == reference_nms(dets, threshold)


def test_nms_keeps_the_input_order_among_equal_confidences():
    a = ScoredRect.of(Rect.of(0, 0, 10, 10), 0.5)
    b = ScoredRect.of(Rect.of(1, 0, 11, 10), 0.5)
    c = ScoredRect.of(Rect.of(100, 0, 110, 10), 0.9)
    assert detector.nms([a, b, c], 0.5) == [c, a]
    assert detector.nms([], 0.5) == []


@pytest.mark.parametrize("threshold", [0, -0.1, 1.5])
def test_nms_rejects_invalid_thresholds(threshold):
    with pytest.raises(exceptions.UsageError):
        detector.nms([ScoredRect.of(Rect.of(0, 0, 1, 1), 1.0)], threshold)


class FailingDetector(detector.Detector):
    requires_raster = False

    def detect(self, raster, w):
        raise exceptions.DetectorError(w.window_id, "out of memory")


class OversizedDetector(detector.Detector):
    requires_raster = False

    def detect(self, raster, w):
        return WindowDetections(window_id=w.window_id, detections=[ScoredRect.of(Rect.of(500, 0, 600, 10), 1.0)])


@pytest.mark.parametrize("failing", [FailingDetector(), OversizedDetector()])
def test_detector_failures_are_contained_to_the_window(failing):
    result = detector.run_detector(failing, None, WINDOW)
    assert result.window_id == 7
    assert result.detections == []
    assert "DETECTOR_FAILED" in result.error


# %% Oracle
def test_oracle_without_noise_reports_the_ground_truth(rng):
    gt = [Rect.of(10, 10, 50, 30), Rect.of(100, 200, 180, 240)]
    result = oracle.oracle_detect(3, gt, configuration.OracleConfiguration(), rng)
    assert [det.rect for det in result.detections] == gt
    assert all(det.confidence == 1.0 for det in result.detections)


def test_oracle_draws_do_not_depend_on_dropped_boxes():
    gt = [Rect.of(20 * i, 100, 20 * i + 15, 120) for i in range(20)]
    jitter = configuration.OracleConfiguration(position_px=4, size_px=3)
    dropping = configuration.OracleConfiguration(position_px=4, size_px=3, drop_prob=0.5)
    full = oracle.oracle_detect(0, gt, jitter, oracle.window_rng(1, "doc", 0, 0)).detections
    partial = oracle.oracle_detect(0, gt, dropping, oracle.window_rng(1, "doc", 0, 0)).detections
    assert 0 < len(partial) < len(full)
    assert all(det in full for det in partial)


def test_oracle_noise_is_bounded_and_reproducible():
    gt = [Rect.of(40, 40, 140, 80)]
    jitter = configuration.OracleConfiguration(
        position_px=8, size_px=8, confidence_model="uniform", confidence_low=0.6
    )
    for window_id in range(50):
        first = oracle.oracle_detect(window_id, gt, jitter, oracle.window_rng(9, "d", 2, window_id))
        second = oracle.oracle_detect(window_id, gt, jitter, oracle.window_rng(9, "d", 2, window_id))
        assert first == second
        (det,) = first.detections
        assert abs(det.rect.left - 40) <= 8 and abs(det.rect.top - 40) <= 8
        assert abs(det.rect.width - 100) <= 8 and abs(det.rect.height - 40) <= 8
        assert 0.6 <= det.confidence <= 1.0


def test_oracle_drops_everything_at_probability_one(rng):
    jitter = configuration.OracleConfiguration(drop_prob=1.0)
    assert oracle.oracle_detect(0, [Rect.of(0, 0, 5, 5)], jitter, rng).detections == []


def test_oracle_detector_crops_the_page_ground_truth():
    w = windowing.generate_windows((2400, 3000), 1200, 120, 512)[0]
    found = oracle.OracleDetector("doc", 0, [Rect.of(1100, 100, 1400, 160)], configuration.OracleConfiguration())
    (det,) = found.detect(None, w).detections
    assert det.rect == windowing.page_to_window(w, Rect.of(1100, 100, 1400, 160))
    assert det.rect.right == 512


# %% Heuristic
def test_heuristic_merges_nearby_ink_on_a_line():
    raster = numpy.full((512, 512), 255, dtype=numpy.uint8)
    raster[100:120, 50:80] = 0
    raster[100:120, 85:100] = 0
    raster[100:120, 300:320] = 0
    raster[400:401, 400:401] = 0
    result = heuristic.HeuristicDetector(gap=12, min_area=4).detect(raster, WINDOW)
    assert [det.rect for det in result.detections] == [Rect.of(50, 100, 100, 120), Rect.of(300, 100, 320, 120)]
    assert result.detections[0].confidence == pytest.approx(45 / 50)
    assert result.detections[1].confidence == pytest.approx(1.0)


def test_horizontal_grouping_needs_vertical_overlap():
    rects = [Rect.of(0, 0, 10, 10), Rect.of(12, 20, 20, 30), Rect.of(15, 5, 25, 12)]
    assert heuristic.group_horizontally(rects, 5) == [[0, 2], [1]]
    assert heuristic.group_horizontally([], 5) == []


# %% Bridge
def test_windows_are_exported_with_their_crops(tmp_path):
    page = PageImage(doc_id="doc", page_number=1, pixels=numpy.full((1300, 1200), 255, dtype=numpy.uint8))
    windows = windowing.generate_windows(page.size, 1200, 120, 512)
    manifest = bridge.bridge_export([(page, windows)], tmp_path)
    assert manifest == tmp_path / bridge.MANIFEST_NAME
    assert sorted(p.name for p in (tmp_path / bridge.CROP_DIRECTORY).iterdir()) == ["doc_1_0.png", "doc_1_1.png"]
    with open(manifest, newline="") as stream:
        lines = stream.read().splitlines()
    assert lines == [
        "doc_id,page,window_id,origin_x,origin_y,window_size,input_size,clamped",
        "doc,1,0,0,0,1200,512,0",
        "doc,1,1,0,100,1200,512,1",
    ]


def manifest_windows():
    return {("doc", 1, 0): WindowSpec(window_id=0, origin_x=0, origin_y=0, window_size=1200, input_size=512)}


def test_imported_detections_are_clamped_to_the_input():
    rows = io.StringIO(
        "doc_id,page,window_id,left,top,right,bottom,confidence\n"
        "doc,1,0,10,20,30,40,0.9\n"
        "doc,1,0,500,20,530,40,0.5\n"
    )
    imported = bridge.bridge_import(rows, manifest_windows())
    dets = imported[("doc", 1, 0)].detections
    assert [det.rect for det in dets] == [Rect.of(10, 20, 30, 40), Rect.of(500, 20, 512, 40)]
    assert [det.confidence for det in dets] == [0.9, 0.5]


def test_windows_without_rows_get_empty_detections():
    rows = io.StringIO("doc_id,page,window_id,left,top,right,bottom,confidence\n")
    assert bridge.bridge_import(rows, manifest_windows())[("doc", 1, 0)].detections == []


@pytest.mark.parametrize(
    "row, error_code",
    [
        ("doc,1,5,10,20,30,40,0.9", "UNKNOWN_WINDOW"),
        ("doc,1,0,10,20,30,40,1.5", "CONFIDENCE_OUT_OF_RANGE"),
        ("doc,1,0,520,20,530,40,0.5", "MALFORMED_ROW"),
        ("doc,1,0,10,20,ten,40,0.5", "MALFORMED_ROW"),
    ],
)
def test_invalid_imported_rows(row, error_code):
    rows = io.StringIO("doc_id,page,window_id,left,top,right,bottom,confidence\n" + row + "\n")
    with pytest.raises(exceptions.DataError) as e:
        bridge.bridge_import(rows, manifest_windows())
    assert e.value.error_code == error_code


def test_imported_detector_serves_its_page():
    imported = {("doc", 1, 0): WindowDetections(window_id=0, detections=[])}
    served = bridge.ImportedDetector("doc", 1, imported)
    assert served.detect(None, manifest_windows()[("doc", 1, 0)]).window_id == 0
    with pytest.raises(exceptions.DetectorError):
        served.detect(None, WINDOW)
