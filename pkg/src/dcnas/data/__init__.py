from .corpus import DIGIT_SIZE, DigitCorpus, load_mnist_corpus, make_glyph_corpus, resolve_corpus
from .synth import (
    GRID_SIGMAS,
    CleanSample,
    DatasetManifest,
    NoiseSpec,
    SynthDataset,
    add_gaussian_noise,
    build_dataset,
    compose_sample,
    default_splits,
    extract_digits,
    index_hash,
    load_dataset,
    sample_rng,
)

__all__ = [
    "DIGIT_SIZE",
    "DigitCorpus",
    "load_mnist_corpus",
    "make_glyph_corpus",
    "resolve_corpus",
    "GRID_SIGMAS",
    "CleanSample",
    "DatasetManifest",
    "NoiseSpec",
    "SynthDataset",
    "add_gaussian_noise",
    "build_dataset",
    "compose_sample",
    "default_splits",
    "extract_digits",
    "index_hash",
    "load_dataset",
    "sample_rng",
]
