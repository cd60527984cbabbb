import math

import numpy as np
import pytest
import torch
import torch.nn as nn

from dcnas.data import NoiseSpec
from dcnas.errors import DcnasError, TrainingDiverged
from dcnas.models import UNET_PRESETS, UNetConfig, classifier_preset, make_unet
from dcnas.training import TrainConfig, evaluate_sweep, load_checkpoint, train
from dcnas.zoo import resolve_model

SHORT_NOISE = NoiseSpec(mode="grid", levels=(0.0, 0.3, 0.6))


class IdentityDenoiser(nn.Module):
    task = "denoise"

    def forward(self, x):
        return x


class TestTrainConfig:
    def test_controlled_preset_defaults(self):
        cfg = TrainConfig.controlled()
        assert cfg.optimizer == "adam"
        assert cfg.lr == 1e-3
        assert cfg.scheduler == "plateau"
        assert cfg.epochs == 100
        assert cfg.plateau_factor == 0.5 and cfg.plateau_patience == 5

    def test_nas_preset_defaults(self):
        cfg = TrainConfig.nas_derived()
        assert cfg.optimizer == "sgd"
        assert cfg.lr == 2e-1
        assert cfg.epochs == 250
        assert cfg.scheduler == "cosine"
        assert cfg.momentum == 0.9 and cfg.weight_decay == 1e-4


class TestTrain:
    def test_one_epoch_smoke(self, tiny_dataset, tmp_path):
        model = make_unet(UNetConfig(b=4, d=2, m=1.0, c=1))
        cfg = TrainConfig.controlled(epochs=1, batch_size=32, noise=SHORT_NOISE,
                                     max_samples=40, out_dir=str(tmp_path))
        result = train(model, tiny_dataset, cfg)
        assert len(result.history) == 1
        assert (tmp_path / "last.pt").exists()
        assert (tmp_path / "history.jsonl").exists()

    def test_incompatible_loss_rejected(self, tiny_dataset, tmp_path):
        model = classifier_preset("conv-s")
        cfg = TrainConfig.controlled(epochs=1, loss="charbonnier",
                                     out_dir=str(tmp_path))
        with pytest.raises(DcnasError):
            train(model, tiny_dataset, cfg)

    def test_divergence_keeps_checkpoint(self, tiny_dataset, tmp_path):
        model = make_unet(UNetConfig(b=4, d=2, m=1.0, c=1))
        cfg = TrainConfig.controlled(epochs=2, lr=1e18, batch_size=16,
                                     noise=SHORT_NOISE, max_samples=32,
                                     out_dir=str(tmp_path))
        with pytest.raises(TrainingDiverged) as excinfo:
            train(model, tiny_dataset, cfg)
        assert excinfo.value.checkpoint_path is not None

    def test_resume_reproduces_full_run(self, tiny_dataset, tmp_path):
        def fresh_model():
            torch.manual_seed(0)
            return make_unet(UNetConfig(b=4, d=2, m=1.0, c=1))

        full_cfg = TrainConfig.controlled(epochs=4, batch_size=16,
                                          noise=SHORT_NOISE, max_samples=48,
                                          out_dir=str(tmp_path / "full"))
        full = train(fresh_model(), tiny_dataset, full_cfg)

        half_cfg = TrainConfig.controlled(epochs=2, batch_size=16,
                                          noise=SHORT_NOISE, max_samples=48,
                                          out_dir=str(tmp_path / "half"))
        train(fresh_model(), tiny_dataset, half_cfg)

        resumed_cfg = TrainConfig.controlled(epochs=4, batch_size=16,
                                             noise=SHORT_NOISE, max_samples=48,
                                             out_dir=str(tmp_path / "resumed"))
        resumed = train(fresh_model(), tiny_dataset, resumed_cfg,
                        resume_from=tmp_path / "half" / "last.pt")
        for a, b in zip(full.history[2:], resumed.history[2:]):
            assert abs(a["train_loss"] - b["train_loss"]) < 1e-6
            assert abs(a["val_loss"] - b["val_loss"]) < 1e-6

    def test_checkpoint_round_trip(self, tiny_dataset, tmp_path):
        model = make_unet(UNetConfig(b=4, d=2, m=1.0, c=1))
        cfg = TrainConfig.controlled(epochs=1, batch_size=32, noise=SHORT_NOISE,
                                     max_samples=32, out_dir=str(tmp_path))
        result = train(model, tiny_dataset, cfg)
        clone = make_unet(UNetConfig(b=4, d=2, m=1.0, c=1))
        ckpt = load_checkpoint(result.checkpoint_path, clone)
        assert ckpt["epoch"] == 1
        for p1, p2 in zip(model.parameters(), clone.parameters()):
            assert torch.equal(p1, p2)

    @pytest.mark.slow
    def test_overfit_small_subset(self, tiny_dataset, tmp_path):
        # capacity sanity: the reduced denoiser must overfit 50 samples
        torch.manual_seed(0)
        model = make_unet(UNET_PRESETS["unet-s"])
        cfg = TrainConfig.controlled(epochs=30, batch_size=10,
                                     noise=NoiseSpec(mode="grid",
                                                     levels=(0.2, 0.4)),
                                     max_samples=50, out_dir=str(tmp_path))
        result = train(model, tiny_dataset, cfg)
        first = result.history[0]["train_loss"]
        best = min(h["train_loss"] for h in result.history)
        assert best <= 0.5 * first


class TestImageFolderTraining:
    @pytest.fixture()
    def folder_data(self, tmp_path):
        from PIL import Image

        from dcnas.training import imagenet100_pipeline

        rng = np.random.default_rng(0)
        classes = ["a", "b", "c"]
        for cls in classes:
            (tmp_path / cls).mkdir()
            for j in range(6):
                arr = (rng.random((40, 40, 3)) * 255).astype(np.uint8)
                Image.fromarray(arr).save(tmp_path / cls / f"{j}.png")
        noise = NoiseSpec(mode="uniform", range=(0.0, 1.0))
        return imagenet100_pipeline(tmp_path, classes, crop=32, noise=noise,
                                    seed=0)

    def test_nas_regime_classifier_on_image_folder(self, folder_data, tmp_path):
        from dcnas.models import ArchSpec, build_cnas, get_macro

        spec = ArchSpec(macro="S", choices=(0,) * 15, search_space_id="size-4")
        model = build_cnas(spec, num_classes=3, seed=0)
        cfg = TrainConfig.nas_derived(epochs=2, batch_size=6, lr=1e-2,
                                      out_dir=str(tmp_path / "run"))
        result = train(model, folder_data, cfg)
        assert len(result.history) == 2
        assert all(np.isfinite(h["train_loss"]) for h in result.history)
        assert all(np.isfinite(h["val_loss"]) for h in result.history)
        # cosine schedule actually moved the learning rate
        assert result.history[-1]["lr"] < cfg.lr

    def test_joint_image_mode_on_image_folder(self, folder_data, tmp_path):
        from dcnas.models import UNetConfig, join_sequential, make_unet

        denoiser = make_unet(UNetConfig(b=4, d=2, m=1.0, c=1), in_ch=3, out_ch=3)
        classifier = torch.nn.Sequential(torch.nn.AdaptiveAvgPool2d(1),
                                         torch.nn.Flatten(),
                                         torch.nn.Linear(3, 3))
        model = join_sequential(denoiser, classifier, crop_mode=False)
        cfg = TrainConfig(regime="nas-derived", optimizer="sgd", lr=1e-2,
                          scheduler="none", epochs=1, batch_size=6,
                          loss="both", out_dir=str(tmp_path / "run"))
        result = train(model, folder_data, cfg)
        assert np.isfinite(result.history[0]["train_loss"])


class TestEvaluateSweep:
    def test_identity_model_row_structure(self, tiny_dataset):
        noise = NoiseSpec(mode="grid", levels=tuple(0.1 * i for i in range(11)))
        report = evaluate_sweep(IdentityDenoiser(), tiny_dataset, noise,
                                max_samples=6)
        assert len(report.rows) == 11
        assert report.rows[0]["sigma"] == 0.0
        assert report.rows[0]["psnr"] == math.inf  # clean input, zero error
        assert report.rows[0]["ssim"] == pytest.approx(1.0)
        assert all(report.rows[i]["n"] == 6 for i in range(11))

    def test_psnr_non_increasing_in_sigma(self, tiny_dataset):
        report = evaluate_sweep(IdentityDenoiser(), tiny_dataset,
                                NoiseSpec(mode="grid",
                                          levels=(0.1, 0.3, 0.5, 0.8)),
                                max_samples=8)
        psnrs = [r["psnr"] for r in report.rows]
        for a, b in zip(psnrs, psnrs[1:]):
            assert b <= a + 0.2

    def test_means_equal_arithmetic_mean(self, tiny_dataset):
        report = evaluate_sweep(IdentityDenoiser(), tiny_dataset,
                                NoiseSpec(mode="grid", levels=(0.2, 0.4)),
                                max_samples=5)
        for key in ("psnr", "ssim"):
            vals = [r[key] for r in report.rows]
            assert report.means[key] == pytest.approx(np.mean(vals), abs=1e-9)

    def test_determinism_identical_hash(self, tiny_dataset):
        model = resolve_model("dcnet-integrated-reduced", seed=0)
        noise = NoiseSpec(mode="grid", levels=(0.0, 0.5))
        r1 = evaluate_sweep(model, tiny_dataset, noise, seed=3, max_samples=4)
        r2 = evaluate_sweep(model, tiny_dataset, noise, seed=3, max_samples=4)
        assert r1.report_hash() == r2.report_hash()

    def test_eval_seed_changes_corruptions(self, tiny_dataset):
        noise = NoiseSpec(mode="grid", levels=(0.5,))
        r1 = evaluate_sweep(IdentityDenoiser(), tiny_dataset, noise, seed=0,
                            max_samples=4)
        r2 = evaluate_sweep(IdentityDenoiser(), tiny_dataset, noise, seed=1,
                            max_samples=4)
        assert r1.rows[0]["psnr"] != r2.rows[0]["psnr"]

    def test_joint_model_consumes_each_image_once_per_sigma(self, tiny_dataset):
        model = resolve_model("dcnet-integrated-reduced", seed=0)
        calls = {"n": 0}
        original = model.forward

        def counting_forward(x, boxes=None):
            calls["n"] += x.shape[0]
            return original(x, boxes)

        model.forward = counting_forward
        noise = NoiseSpec(mode="grid", levels=(0.0, 0.3, 0.6))
        report = evaluate_sweep(model, tiny_dataset, noise, max_samples=7,
                                batch_size=3)
        assert calls["n"] == 7 * 3
        assert all(r["n"] == 7 for r in report.rows)
        assert report.rows[0]["accuracy"] is not None

    def test_classifier_report_has_accuracy_only(self, tiny_dataset):
        model = classifier_preset("conv-s")
        report = evaluate_sweep(model, tiny_dataset,
                                NoiseSpec(mode="grid", levels=(0.1,)),
                                max_samples=4)
        assert report.rows[0]["psnr"] is None
        assert report.rows[0]["accuracy"] is not None

    def test_uniform_noise_rejected(self, tiny_dataset):
        with pytest.raises(DcnasError):
            evaluate_sweep(IdentityDenoiser(), tiny_dataset,
                           NoiseSpec(mode="uniform", range=(0, 1)))

    def test_report_round_trip(self, tiny_dataset, tmp_path):
        report = evaluate_sweep(IdentityDenoiser(), tiny_dataset,
                                NoiseSpec(mode="grid", levels=(0.2,)),
                                max_samples=3)
        report.flops = 123
        path = tmp_path / "report.json"
        report.save(path)
        from dcnas.training import MetricsReport

        loaded = MetricsReport.load(path)
        assert loaded.report_hash() == report.report_hash()
        report.to_csv(tmp_path / "report.csv")
        assert (tmp_path / "report.csv").read_text().startswith("sigma,")
