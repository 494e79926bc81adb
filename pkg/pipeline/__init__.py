"""Page level orchestration of the detection pipeline"""
import concurrent.futures
import enum
import functools
import logging
import pathlib
import typing

import configuration
import detector
import enums
import exceptions
import formats
import pooling
import postprocess
import tools
import windowing
from detector import bridge, heuristic, oracle
from models.detections import PageDetections, WindowDetections
from models.geometry import Rect, ScoredRect
from models.internal import RunManifest
from models.windowing import PageImage, WindowSpec
from pooling.tuning import TuningSample

_logger = logging.getLogger(__name__)


class PageJob(typing.NamedTuple):
    """Everything a worker needs to process one page"""

    doc_id: str
    page_number: int
    image_path: typing.Optional[pathlib.Path] = None
    page_size: typing.Optional[typing.Tuple[int, int]] = None
    """The page size used when no image is read"""

    formulas: typing.List[Rect] = []
    """The ground truth formulas, used by the oracle detector and for overlays"""

    detection_rows: typing.List[bridge.DetectionRow] = []
    """The imported rows of an external detector"""

    @property
    def key(self) -> formats.PageKey:
        return self.doc_id, self.page_number


class PageOutcome(typing.NamedTuple):
    key: formats.PageKey
    page_size: typing.Tuple[int, int]
    windows: typing.List[WindowSpec]
    window_detections: typing.List[WindowDetections]
    """The detections of every window after non-maximal suppression"""

    regions: typing.List[Rect]
    failed_windows: int
    sample: typing.Optional[TuningSample] = None


def build_detector(
    cfg: configuration.PipelineConfiguration, job: PageJob, windows: typing.Sequence[WindowSpec]
) -> detector.Detector:
    """Create the configured detector for the windows of a page"""
    if cfg.detector == enums.DetectorKind.ORACLE:
        return oracle.OracleDetector(job.doc_id, job.page_number, job.formulas, cfg.oracle, cfg.seed)
    if cfg.detector == enums.DetectorKind.HEURISTIC:
        return heuristic.HeuristicDetector(cfg.heuristic_gap, cfg.heuristic_min_area)
    keys = {(job.doc_id, job.page_number, w.window_id): w for w in windows}
    return bridge.ImportedDetector(job.doc_id, job.page_number, bridge.import_rows(job.detection_rows, keys))


def process_page(
    job: PageJob, cfg: configuration.PipelineConfiguration, keep_sample: bool = False
) -> PageOutcome:
    """
    Run tiling, detection and pooling on a single page

    Overlays and heat maps are written by the worker processing the page.

    :param job: The page
    :param cfg: The pipeline configuration
    :param keep_sample: Return the voted detections and the ink for threshold tuning
    :return: The regions and intermediate results of the page
    """
    subject = f"{job.doc_id}/{job.page_number}"
    page = None
    with tools.stage_timer(enums.PipelineStage.INGEST, subject):
        if job.image_path is not None:
            raster = tools.read_raster(job.image_path)
            page = PageImage(doc_id=job.doc_id, page_number=job.page_number, pixels=raster)
            page_size = page.size
        elif job.page_size is not None:
            page_size = job.page_size
        else:
            raise exceptions.UsageError(
                "PAGE_IMAGES_REQUIRED", "Page images required", f"The size of the page {subject} is unknown"
            )
    with tools.stage_timer(enums.PipelineStage.TILE, subject):
        windows = windowing.generate_windows(page_size, cfg.window_size, cfg.stride, cfg.input_size)
    with tools.stage_timer(enums.PipelineStage.DETECT, subject):
        active = build_detector(cfg, job, windows)
        if active.requires_raster and page is None:
            raise exceptions.UsageError(
                "PAGE_IMAGES_REQUIRED", "Page images required", f"The {cfg.detector.value} detector reads page images"
            )
        window_detections = []
        for w in windows:
            raster = windowing.crop_window(page, w) if active.requires_raster else None
            result = detector.run_detector(active, raster, w)
            window_detections.append(result.copy(update={"detections": detector.nms(result.detections, cfg.nms_iou)}))
        failed = sum(1 for result in window_detections if result.error is not None)
        if failed:
            _logger.warning("The detector failed on %d windows of page %s", failed, subject)
    ink = None
    if page is not None and (cfg.prestitch_postprocess or cfg.postpool_postprocess):
        with tools.stage_timer(enums.PipelineStage.POSTPROCESS, subject):
            ink = postprocess.InkComponents.from_page(page)
    with tools.stage_timer(enums.PipelineStage.VOTE, subject):
        pooled = pooling.pool_page(
            window_detections,
            windows,
            page_size,
            cfg.vote_method,
            cfg.vote_threshold,
            ink,
            cfg.vote_downscale,
            cfg.ink_tolerance,
            cfg.drop_inkless,
            cfg.prestitch_postprocess,
            cfg.postpool_postprocess,
        )
    write_page_artifacts(cfg, job, page, pooled)
    sample = None
    if keep_sample:
        sample = TuningSample(job.key, list(job.formulas), pooled.detections, page_size, ink)
    return PageOutcome(job.key, page_size, windows, window_detections, pooled.regions, failed, sample)


def write_page_artifacts(
    cfg: configuration.PipelineConfiguration,
    job: PageJob,
    page: typing.Optional[PageImage],
    pooled: pooling.PooledPage,
) -> None:
    name = f"{job.doc_id}_{job.page_number}.png"
    if cfg.dump_heatmaps:
        tools.write_raster(
            cfg.output_dir / "heatmaps" / name, tools.render_heatmap(pooled.votes.score(cfg.vote_method))
        )
    if cfg.render_overlays and page is not None:
        overlay = tools.render_overlay(
            page.pixels, (r.as_tuple() for r in job.formulas), (r.as_tuple() for r in pooled.regions)
        )
        tools.write_raster(cfg.output_dir / "overlays" / name, overlay)


def run_pages(
    jobs: typing.Sequence[PageJob], cfg: configuration.PipelineConfiguration, keep_sample: bool = False
) -> typing.List[PageOutcome]:
    """
    Process pages with a bounded pool of worker processes

    The outcomes are returned in the order of the jobs, independent of the number of workers.
    """
    work = functools.partial(process_page, cfg=cfg, keep_sample=keep_sample)
    if cfg.workers == 1 or len(jobs) <= 1:
        return [work(job) for job in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as executor:
        return list(executor.map(work, jobs))


# %% Inputs
def page_jobs(
    cfg: configuration.PipelineConfiguration,
    formulas: typing.Optional[typing.Mapping[formats.PageKey, typing.List[Rect]]] = None,
    page_sizes: typing.Optional[typing.Mapping[formats.PageKey, typing.Tuple[int, int]]] = None,
    detection_rows: typing.Optional[typing.Mapping[formats.PageKey, typing.List[bridge.DetectionRow]]] = None,
) -> typing.List[PageJob]:
    """
    Collect the pages to process

    With an image directory every page image is a job, and ground truth pages without an image
    are jobs failing on the missing file. Without one the ground truth pages are processed at their
    annotated size.

    :raises exceptions.DataError: Imported detections refer to a page which is not processed
    """
    formulas = formulas or {}
    detection_rows = detection_rows or {}
    if cfg.images_dir is not None:
        keyed = {tools.parse_page_name(path): path for path in tools.list_page_images(cfg.images_dir)}
        for doc_id, page_number in formulas:
            keyed.setdefault((doc_id, page_number), tools.page_image_path(cfg.images_dir, doc_id, page_number))
    else:
        keyed = {key: None for key in sorted(page_sizes or {})}
    unknown = sorted(set(detection_rows) - set(keyed))
    if unknown:
        raise exceptions.DataError(
            "UNKNOWN_PAGE", "Unknown page", f"Detections refer to pages without image: {unknown[:5]}"
        )
    return [
        PageJob(
            doc_id=key[0],
            page_number=key[1],
            image_path=path,
            page_size=(page_sizes or {}).get(key),
            formulas=list(formulas.get(key, [])),
            detection_rows=list(detection_rows.get(key, [])),
        )
        for key, path in sorted(keyed.items())
    ]


def group_detection_rows(path: pathlib.Path) -> typing.Dict[formats.PageKey, typing.List[bridge.DetectionRow]]:
    """Read a window level detection CSV and group its rows by page"""
    path = pathlib.Path(path)
    if not path.is_file():
        raise exceptions.DataError("DETECTIONS_MISSING", "Detection file missing", f"The file {path} does not exist")
    grouped: typing.Dict[formats.PageKey, typing.List[bridge.DetectionRow]] = {}
    with open(path, encoding="utf-8", newline="") as stream:
        for row in formats.read_window_detection_rows(stream):
            grouped.setdefault(row[1][:2], []).append(row)
    return grouped


# %% Outputs
def write_regions(path: pathlib.Path, outcomes: typing.Iterable[PageOutcome]) -> int:
    pages = [PageDetections(doc_id=o.key[0], page_number=o.key[1], regions=o.regions) for o in outcomes]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        return formats.write_page_detections(stream, pages)


def write_window_results(path: pathlib.Path, outcomes: typing.Iterable[PageOutcome]) -> int:
    rows: typing.List[typing.Tuple[str, int, int, ScoredRect]] = []
    for o in outcomes:
        for result in o.window_detections:
            rows.extend((o.key[0], o.key[1], result.window_id, det) for det in result.detections)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        return formats.write_window_detections(stream, rows)


def write_manifest(
    cfg: configuration.PipelineConfiguration,
    command: str,
    inputs: typing.Iterable[pathlib.Path],
    outputs: typing.Iterable[pathlib.Path],
) -> pathlib.Path:
    """Record the configuration and the digests of all files a run read and wrote"""
    config = orjson_safe(cfg.dict())
    manifest = RunManifest(
        command=command,
        config=config,
        config_hash=tools.config_hash(config),
        inputs={str(path): tools.sha256_file(path) for path in sorted(set(inputs))},
        outputs={str(path): tools.sha256_file(path) for path in sorted(set(outputs))},
        versions=tools.package_versions(),
    )
    path = cfg.output_dir / "run_manifest.json"
    tools.dump_json(path, manifest.dict())
    return path


def orjson_safe(value: typing.Any) -> typing.Any:
    """Convert the values orjson cannot serialize (paths, fractions, enums) into strings"""
    if isinstance(value, dict):
        return {str(k): orjson_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [orjson_safe(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bool, int, float, str)) or value is None:
        return value
    return str(value)
