import pathlib
import typing

import numpy
import pytest

import configuration
import dataset
import tools
from dataset import synthetic
from models.dataset import GroundTruthPage
from models.windowing import PageImage

Corpus = typing.List[typing.Tuple[PageImage, GroundTruthPage]]


def write_corpus(directory: pathlib.Path, corpus: Corpus) -> typing.Tuple[pathlib.Path, pathlib.Path]:
    """Write the page images and the character ground truth of a corpus, returning both paths"""
    images = directory / "images"
    for image, _ in corpus:
        tools.write_raster(tools.page_image_path(images, image.doc_id, image.page_number), image.pixels)
    ground_truth = directory / "characters.csv"
    with open(ground_truth, "w", encoding="utf-8", newline="") as stream:
        dataset.write_character_csv(stream, [page for _, page in corpus])
    return images, ground_truth


@pytest.fixture
def rng() -> numpy.random.Generator:
    return numpy.random.default_rng(20240611)


@pytest.fixture
def cfg(tmp_path) -> configuration.PipelineConfiguration:
    return configuration.load(overrides={"output_dir": tmp_path / "output"})


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return synthetic.synthesize_corpus(seed=11, page_count=3, doc_id="small", min_coverage=30)


@pytest.fixture(scope="session")
def corpus_files(tmp_path_factory, small_corpus) -> typing.Tuple[pathlib.Path, pathlib.Path]:
    return write_corpus(tmp_path_factory.mktemp("corpus"), small_corpus)
