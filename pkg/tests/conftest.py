import numpy as np
import pytest
import torch

from dcnas.data import DatasetManifest, build_dataset, make_glyph_corpus

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def glyph_corpus():
    return make_glyph_corpus(per_class=20, seed=0)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """120-sample dataset shared by fast tests."""
    out = tmp_path_factory.mktemp("ds") / "tiny"
    manifest = DatasetManifest(count=120, seed=7, corpus="glyph:20",
                               out_dir=str(out))
    return build_dataset(manifest)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
