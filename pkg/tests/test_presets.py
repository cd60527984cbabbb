"""Toy-scale end-to-end runs of the experiment presets."""
import json

import pytest

from dcnas.errors import DcnasError
from dcnas.presets import PRESETS, run_preset


class TestPlans:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_dry_run_plans(self, name):
        summary, run_dir = run_preset(name, dry_run=True)
        assert run_dir is None
        assert f"preset {name}" in summary["plan"]

    def test_unknown_preset(self):
        with pytest.raises(DcnasError):
            run_preset("table9")

    def test_unknown_scale(self):
        with pytest.raises(DcnasError):
            run_preset("dcnas-shape", scale="galactic")


@pytest.mark.slow
class TestToyRuns:
    def test_dcnas_shape(self, tmp_path):
        summary, run_dir = run_preset("dcnas-shape", scale="toy",
                                      run_root=tmp_path)
        assert summary["problems"] == []
        assert summary["loss_after"] < summary["loss_before"]
        assert set(summary["variants"]) == {"conv", "mbconv", "mbconv-1op",
                                            "mbconv-3layer"}
        assert (run_dir / "archspec.json").exists()
        assert (run_dir / "summary.json").exists()

    def test_classifier_scaling(self, tmp_path):
        summary, run_dir = run_preset("classifier-scaling", scale="toy",
                                      run_root=tmp_path)
        assert len(summary["rows"]) == 2
        assert all(r["flops"] > 0 for r in summary["rows"])
        assert (run_dir / "classifier-scaling.csv").exists()

    def test_unet_scaling(self, tmp_path):
        summary, run_dir = run_preset("unet-scaling", scale="toy",
                                      run_root=tmp_path)
        assert len(summary["rows"]) == 4
        assert (run_dir / "unet-scaling.csv").exists()
        flops = {r["config"]: r["flops"] for r in summary["rows"]}
        assert flops["unet-b8d2m2.0c1"] > flops["unet-b4d2m2.0c1"]

    def test_table1_reduced_pipeline(self, tmp_path):
        summary, run_dir = run_preset("table1-reduced", scale="toy",
                                      run_root=tmp_path)
        for key in ("psnr_gap_db", "ssim_gap", "accuracy_gap_pct",
                    "integrated", "sequential", "latency_ms"):
            assert key in summary
        assert (run_dir / "comparison.csv").exists()
        assert (run_dir / "report-integrated-reduced.json").exists()
        assert (run_dir / "report-sequential-reduced.json").exists()
        assert (run_dir / "comparison-psnr.png").stat().st_size > 0
        report = json.loads(
            (run_dir / "report-integrated-reduced.json").read_text())
        assert report["flops"] is not None
        assert report["latency_ms"] is not None
        assert (run_dir / "config.yaml").exists()
        assert (run_dir / "inputs.json").exists()
