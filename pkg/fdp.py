"""The command line interface of the formula detection pipeline: fdp <command> [options]"""
import argparse
import logging
import math
import pathlib
import sys
import typing

import numpy
import orjson

import anchors
import configuration
import dataset
import dataset.synthetic
import enums
import evaluation
import exceptions
import formats
import pipeline
import tools
import windowing
from detector import bridge
from models.windowing import PageImage
from pooling import tuning

_logger = logging.getLogger("fdp")

COMMANDS = ("synthesize", "stats", "tile", "export-targets", "detect", "pool", "evaluate", "tune", "pipeline")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise exceptions.UsageError("INVALID_ARGUMENTS", "Invalid command line", message)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", type=pathlib.Path, help="key=value configuration file (CONFIG_<NAME>=value)")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a setting, e.g. vote_threshold=25"
    )
    common.add_argument("--seed", type=int, help="seed of the oracle detector and of synthetic pages")
    common.add_argument("--workers", type=int, help="number of worker processes")
    common.add_argument("--detector", choices=[kind.value for kind in enums.DetectorKind])
    common.add_argument("--images", type=pathlib.Path, help="directory of page images named {doc_id}_{page}.png")
    common.add_argument("--ground-truth", type=pathlib.Path, help="character or formula ground truth CSV")
    common.add_argument("--detections", type=pathlib.Path, help="window or page level detection CSV")
    common.add_argument("--output", type=pathlib.Path, help="output directory")
    common.add_argument("--render-overlays", action="store_true", default=None)
    common.add_argument("--dump-heatmaps", action="store_true", default=None)

    parser = _ArgumentParser(prog="fdp", description="Formula detection in scanned document pages")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    synthesize = commands.add_parser("synthesize", parents=[common], help="generate synthetic pages")
    synthesize.add_argument("--pages", type=int, default=50)
    synthesize.add_argument("--formulas", type=int, default=3, help="formulas per page")
    synthesize.add_argument("--doc-id", default="synthetic")
    synthesize.add_argument(
        "--min-coverage", type=int, help="windows every formula pixel needs (default: the vote threshold)"
    )
    commands.add_parser("stats", parents=[common], help="ground truth statistics")
    commands.add_parser("tile", parents=[common], help="export windows for an external detector")
    commands.add_parser("export-targets", parents=[common], help="export default box training targets")
    commands.add_parser("detect", parents=[common], help="run the detector on all windows")
    commands.add_parser("pool", parents=[common], help="pool imported window detections into page regions")
    commands.add_parser("evaluate", parents=[common], help="score page detections against the ground truth")
    tune = commands.add_parser("tune", parents=[common], help="grid search the vote threshold")
    tune.add_argument("--method", choices=[method.value for method in enums.VoteMethod])
    tune.add_argument("--iou", type=float, default=0.75)
    commands.add_parser("pipeline", parents=[common], help="run the complete pipeline")
    return parser


def collect_overrides(args: argparse.Namespace) -> typing.Dict[str, typing.Any]:
    """Turn the command line flags into configuration overrides"""
    overrides: typing.Dict[str, typing.Any] = {}
    for item in args.set:
        key, separator, value = item.partition("=")
        if not separator or not key.strip():
            raise exceptions.UsageError("INVALID_ARGUMENTS", "Invalid override", f"'{item}' is not KEY=VALUE")
        overrides[key.strip()] = value.strip()
    flags = {
        "seed": args.seed,
        "workers": args.workers,
        "detector": args.detector,
        "images_dir": args.images,
        "ground_truth": args.ground_truth,
        "detections": args.detections,
        "output_dir": args.output,
        "render_overlays": args.render_overlays,
        "dump_heatmaps": args.dump_heatmaps,
    }
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return overrides


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(
        format="[%(asctime)s] [%(process)d] [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S %z",
        level=level,
        force=True,
    )


# %% Helpers
def _require(value: typing.Optional[pathlib.Path], flag: str) -> pathlib.Path:
    if value is None:
        raise exceptions.UsageError("MISSING_ARGUMENT", "Missing argument", f"The command needs {flag}")
    return value


def _load_ground_truth(cfg: configuration.PipelineConfiguration, page_sizes=None) -> typing.List:
    path = _require(cfg.ground_truth, "--ground-truth")
    with tools.stage_timer(enums.PipelineStage.INGEST, str(path)):
        return dataset.load_ground_truth(path, cfg.gt_inclusive, page_sizes)


def _image_sizes(cfg: configuration.PipelineConfiguration) -> typing.Dict[formats.PageKey, typing.Tuple[int, int]]:
    if cfg.images_dir is None:
        return {}
    sizes = {}
    for path in tools.list_page_images(cfg.images_dir):
        raster = tools.read_raster(path)
        sizes[tools.parse_page_name(path)] = (int(raster.shape[1]), int(raster.shape[0]))
    return sizes


def _inputs(cfg: configuration.PipelineConfiguration) -> typing.List[pathlib.Path]:
    paths = [path for path in (cfg.ground_truth, cfg.detections) if path is not None and path.is_file()]
    if cfg.images_dir is not None and cfg.images_dir.is_dir():
        paths.extend(tools.list_page_images(cfg.images_dir))
    return paths


def _write_text(path: pathlib.Path, text: str) -> pathlib.Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _evaluate(cfg, pages, detections) -> typing.List[pathlib.Path]:
    """Score page regions and write the metrics table and the plain-text report"""
    gt = {page.key: page.formula_rects for page in pages}
    with tools.stage_timer(enums.PipelineStage.EVALUATE):
        results = evaluation.evaluate_suite(gt, detections)
        char_results = []
        if any(page.characters for page in pages):
            char_results = [
                evaluation.character_metrics(pages, detections, rule, cfg.char_containment)
                for rule in enums.CharacterRule
            ]
        errors = evaluation.classify_pages(gt, detections, 0.75)
    report = evaluation.render_report(results, char_results, errors)
    print(report, end="")
    metrics = cfg.output_dir / "metrics.csv"
    metrics.parent.mkdir(parents=True, exist_ok=True)
    with open(metrics, "w", encoding="utf-8", newline="") as stream:
        evaluation.write_metrics_csv(stream, results, char_results)
    return [metrics, _write_text(cfg.output_dir / "report.txt", report)]


def _run(cfg, keep_sample=False, pages=None, detection_rows=None) -> typing.List[pipeline.PageOutcome]:
    pages = pages or []
    jobs = pipeline.page_jobs(
        cfg,
        formulas={page.key: page.formula_rects for page in pages},
        page_sizes={page.key: page.page_size for page in pages},
        detection_rows=detection_rows,
    )
    if not jobs:
        raise exceptions.DataError("NO_PAGES", "No pages", "There are no pages to process")
    outcomes = pipeline.run_pages(jobs, cfg, keep_sample)
    _logger.info("Processed %d pages", len(outcomes))
    return outcomes


# %% Commands
def cmd_synthesize(cfg, args) -> typing.List[pathlib.Path]:
    min_coverage = args.min_coverage
    if min_coverage is None:
        min_coverage = math.ceil(cfg.vote_threshold) if cfg.vote_method == enums.VoteMethod.UNIFORM else 1
    rng = numpy.random.default_rng(cfg.seed)
    outputs, pages = [], []
    for page_number in range(args.pages):
        image, page = dataset.synthetic.synthesize_page(
            rng,
            args.doc_id,
            page_number,
            formula_count=args.formulas,
            window_size=cfg.window_size,
            stride=cfg.stride,
            min_coverage=min_coverage,
        )
        path = tools.page_image_path(cfg.output_dir / "images", image.doc_id, image.page_number)
        tools.write_raster(path, image.pixels)
        outputs.append(path)
        pages.append(page)
    writers = (("characters.csv", dataset.write_character_csv), ("ground_truth.csv", dataset.write_formula_csv))
    for name, writer in writers:
        path = cfg.output_dir / name
        with open(path, "w", encoding="utf-8", newline="") as stream:
            writer(stream, pages)
        outputs.append(path)
    _logger.info("Synthesized %d pages into %s", len(pages), cfg.output_dir)
    return outputs


def cmd_stats(cfg, args) -> typing.List[pathlib.Path]:
    pages = _load_ground_truth(cfg)
    stats = dataset.collection_stats(pages)
    histogram = dataset.aspect_ratio_histogram(pages)
    lines = [
        f"documents: {stats.docs}",
        f"pages: {stats.pages}",
        f"formulas: {stats.total} ({stats.single_symbol_formulas} single symbol, "
        f"{stats.multi_symbol_formulas} multi symbol)",
        "aspect ratios:",
    ]
    lines.extend(f"  [{low:g}, {high:g}): {count}" for low, high, count in histogram)
    print("\n".join(lines))
    path = cfg.output_dir / "stats.json"
    tools.dump_json(path, {"stats": stats.dict(), "aspect_ratios": [list(row) for row in histogram]})
    return [path]


def cmd_tile(cfg, args) -> typing.List[pathlib.Path]:
    images = tools.list_page_images(_require(cfg.images_dir, "--images"))

    def pages():
        for path in images:
            doc_id, page_number = tools.parse_page_name(path)
            page = PageImage(doc_id=doc_id, page_number=page_number, pixels=tools.read_raster(path))
            yield page, windowing.generate_windows(page.size, cfg.window_size, cfg.stride, cfg.input_size)

    with tools.stage_timer(enums.PipelineStage.TILE):
        manifest = bridge.bridge_export(pages(), cfg.output_dir)
    return [manifest, *sorted((cfg.output_dir / bridge.CROP_DIRECTORY).glob("*.png"))]


def cmd_export_targets(cfg, args) -> typing.List[pathlib.Path]:
    pages = _load_ground_truth(cfg, _image_sizes(cfg) or None)
    windows = {
        page.key: windowing.generate_windows(page.page_size, cfg.window_size, cfg.stride, cfg.input_size)
        for page in pages
    }
    path = cfg.output_dir / "training_targets.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with tools.stage_timer(enums.PipelineStage.EXPORT):
        targets = anchors.export_training_targets(pages, windows, cfg.anchors, cfg.export_coverage)
        with open(path, "w", encoding="utf-8", newline="") as stream:
            count = anchors.write_training_targets(stream, targets)
    _logger.info("Exported %d training targets", count)
    return [path]


def cmd_detect(cfg, args) -> typing.List[pathlib.Path]:
    pages = _load_ground_truth(cfg) if cfg.ground_truth is not None else []
    if cfg.detector == enums.DetectorKind.EXTERNAL:
        raise exceptions.UsageError(
            "INVALID_DETECTOR", "Invalid detector", "External detections are imported with the pool command"
        )
    outcomes = _run(cfg, pages=pages)
    detections = pipeline.write_window_results(cfg.output_dir / "window_detections.csv", outcomes)
    manifest = cfg.output_dir / bridge.MANIFEST_NAME
    with open(manifest, "w", encoding="utf-8", newline="") as stream:
        formats.write_window_manifest(stream, ((o.key[0], o.key[1], w) for o in outcomes for w in o.windows))
    _logger.info("Wrote %d window detections", detections)
    return [cfg.output_dir / "window_detections.csv", manifest]


def cmd_pool(cfg, args) -> typing.List[pathlib.Path]:
    rows = pipeline.group_detection_rows(_require(cfg.detections, "--detections"))
    cfg = cfg.copy(update={"detector": enums.DetectorKind.EXTERNAL})
    pages = _load_ground_truth(cfg) if cfg.ground_truth is not None else []
    outcomes = _run(cfg, pages=pages, detection_rows=rows)
    path = cfg.output_dir / "detections.csv"
    pipeline.write_regions(path, outcomes)
    return [path]


def cmd_evaluate(cfg, args) -> typing.List[pathlib.Path]:
    pages = _load_ground_truth(cfg)
    path = _require(cfg.detections, "--detections")
    if not path.is_file():
        raise exceptions.DataError("DETECTIONS_MISSING", "Detection file missing", f"The file {path} does not exist")
    with open(path, encoding="utf-8", newline="") as stream:
        detections = {key: page.regions for key, page in formats.read_page_detections(stream).items()}
    return _evaluate(cfg, pages, detections)


def cmd_tune(cfg, args) -> typing.List[pathlib.Path]:
    method = enums.VoteMethod(args.method) if args.method else cfg.vote_method
    pages = _load_ground_truth(cfg)
    rows = None
    if cfg.detector == enums.DetectorKind.EXTERNAL:
        rows = pipeline.group_detection_rows(_require(cfg.detections, "--detections"))
    outcomes = _run(cfg.copy(update={"vote_method": method}), keep_sample=True, pages=pages, detection_rows=rows)
    with tools.stage_timer(enums.PipelineStage.TUNE):
        result = tuning.tune_threshold(
            [o.sample for o in outcomes],
            method,
            iou_threshold=args.iou,
            downscale=cfg.vote_downscale,
            tolerance=cfg.ink_tolerance,
            drop_inkless=cfg.drop_inkless,
        )
    print(f"best {method.value} threshold: {result.best_threshold:g} (f-score {result.best_fscore:.4f})")
    path = cfg.output_dir / "tuning.json"
    tools.dump_json(path, orjson.loads(result.json()))
    return [path]


def cmd_pipeline(cfg, args) -> typing.List[pathlib.Path]:
    pages = _load_ground_truth(cfg) if cfg.ground_truth is not None else []
    rows = None
    if cfg.detector == enums.DetectorKind.EXTERNAL:
        rows = pipeline.group_detection_rows(_require(cfg.detections, "--detections"))
    outcomes = _run(cfg, pages=pages, detection_rows=rows)
    path = cfg.output_dir / "detections.csv"
    with tools.stage_timer(enums.PipelineStage.EXPORT):
        pipeline.write_regions(path, outcomes)
    outputs = [path]
    if pages:
        outputs.extend(_evaluate(cfg, pages, {o.key: o.regions for o in outcomes}))
    return outputs


_HANDLERS = {
    "synthesize": cmd_synthesize,
    "stats": cmd_stats,
    "tile": cmd_tile,
    "export-targets": cmd_export_targets,
    "detect": cmd_detect,
    "pool": cmd_pool,
    "evaluate": cmd_evaluate,
    "tune": cmd_tune,
    "pipeline": cmd_pipeline,
}


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    """
    Run a command and translate failures into exit codes

    :return: 0 on success, 1 on usage errors, 2 on data errors and 3 on stage failures
    """
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        cfg = configuration.load(args.config, collect_overrides(args))
        configure_logging(cfg.logging_level)
        outputs = _HANDLERS[args.command](cfg, args)
        manifest = pipeline.write_manifest(cfg, args.command, _inputs(cfg), outputs)
        _logger.info("Wrote the run manifest to %s", manifest)
    except exceptions.PipelineException as e:
        _logger.error("%s", e)
        print(f"fdp: {e}", file=sys.stderr)
        return int(e.exit_code)
    except Exception as e:
        _logger.exception("Unexpected failure")
        print(f"fdp: {type(e).__name__}: {e}", file=sys.stderr)
        return int(enums.ExitCode.STAGE_FAILURE)
    return int(enums.ExitCode.SUCCESS)


if __name__ == "__main__":
    sys.exit(main())
