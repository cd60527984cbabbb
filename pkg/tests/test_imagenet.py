import numpy as np
import pytest
from PIL import Image
from scipy import stats

from dcnas.data import NoiseSpec, sample_rng
from dcnas.errors import DataError
from dcnas.training import imagenet100_pipeline


@pytest.fixture(scope="module")
def image_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(0)
    classes = [f"class{i}" for i in range(3)]
    for cls in classes:
        (root / cls).mkdir()
        for j in range(4):
            arr = (rng.random((40, 48, 3)) * 255).astype(np.uint8)
            Image.fromarray(arr).save(root / cls / f"img{j}.png")
    return root, classes


class TestPipeline:
    def test_label_space_matches_class_list(self, image_tree):
        root, classes = image_tree
        data = imagenet100_pipeline(root, classes, crop=32)
        assert data.num_classes == 3
        assert len(data) == 12
        labels = {label for _, label in data.files}
        assert labels == {0, 1, 2}

    def test_hundred_class_label_space(self, tmp_path):
        rng = np.random.default_rng(2)
        classes = [f"n{i:04d}" for i in range(100)]
        for cls in classes:
            (tmp_path / cls).mkdir()
            arr = (rng.random((8, 8, 3)) * 255).astype(np.uint8)
            Image.fromarray(arr).save(tmp_path / cls / "one.png")
        data = imagenet100_pipeline(tmp_path, classes, crop=224)
        assert data.num_classes == 100
        assert {label for _, label in data.files} == set(range(100))

    def test_missing_class_directory_rejected(self, image_tree):
        root, classes = image_tree
        with pytest.raises(DataError):
            imagenet100_pipeline(root, classes + ["absent"], crop=32)

    def test_center_crop_shape(self, image_tree):
        root, classes = image_tree
        data = imagenet100_pipeline(root, classes, crop=32)
        arr = data._center_crop(data._load(0))
        assert arr.shape == (3, 32, 32)
        assert 0.0 <= arr.min() and arr.max() <= 1.0

    def test_exact_size_random_crop_is_identity_up_to_flip(self, image_tree):
        root, classes = image_tree
        data = imagenet100_pipeline(root, classes, crop=32)
        src = np.random.default_rng(1).random((3, 32, 32)).astype(np.float32)
        out = data._random_crop(src, sample_rng(0, 0))
        assert out.shape == src.shape
        assert np.array_equal(out, src) or np.array_equal(out, src[:, :, ::-1])

    def test_small_images_upscaled_before_crop(self, image_tree):
        root, classes = image_tree
        data = imagenet100_pipeline(root, classes, crop=64)
        arr = data._load(0)  # source is 40x48, below the crop size
        assert min(arr.shape[1:]) >= 64

    def test_train_batches_with_noise(self, image_tree):
        root, classes = image_tree
        noise = NoiseSpec(mode="uniform", range=(0.0, 1.0))
        data = imagenet100_pipeline(root, classes, crop=32, noise=noise, seed=0)
        noisy, clean, labels = next(data.train_batches(epoch=0, batch_size=5))
        assert noisy.shape == (5, 3, 32, 32)
        assert clean.shape == (5, 3, 32, 32)
        assert labels.shape == (5,)
        assert float(noisy.min()) >= 0.0 and float(noisy.max()) <= 1.0
        assert not np.array_equal(noisy.numpy(), clean.numpy())

    def test_train_batches_deterministic_per_epoch(self, image_tree):
        root, classes = image_tree
        noise = NoiseSpec(mode="uniform", range=(0.0, 1.0))
        data = imagenet100_pipeline(root, classes, crop=32, noise=noise, seed=4)
        a = next(data.train_batches(epoch=2, batch_size=4))
        b = next(data.train_batches(epoch=2, batch_size=4))
        assert np.array_equal(a[0].numpy(), b[0].numpy())

    def test_eval_batches_seeded_per_sample_and_sigma(self, image_tree):
        root, classes = image_tree
        data = imagenet100_pipeline(root, classes, crop=32, seed=0)
        a = next(data.eval_batches(sigma=0.4, batch_size=4, sigma_idx=2))
        b = next(data.eval_batches(sigma=0.4, batch_size=4, sigma_idx=2))
        assert np.array_equal(a[0].numpy(), b[0].numpy())
        c = next(data.eval_batches(sigma=0.4, batch_size=4, sigma_idx=3))
        assert not np.array_equal(a[0].numpy(), c[0].numpy())


class TestUniformSigma:
    def test_histogram_is_uniform(self):
        # chi-squared goodness of fit over 10k draws
        spec = NoiseSpec(mode="uniform", range=(0.0, 1.0))
        rng = sample_rng(123, 0)
        draws = np.array([spec.sample_sigma(rng) for _ in range(10_000)])
        counts, _ = np.histogram(draws, bins=20, range=(0.0, 1.0))
        _, p = stats.chisquare(counts)
        assert p > 0.01
        assert draws.min() >= 0.0 and draws.max() <= 1.0

    def test_grid_sampling_hits_grid_only(self):
        spec = NoiseSpec(mode="grid", levels=(0.1, 0.5, 0.9))
        rng = sample_rng(1, 1)
        draws = {spec.sample_sigma(rng) for _ in range(200)}
        assert draws <= {0.1, 0.5, 0.9}
        assert len(draws) == 3
