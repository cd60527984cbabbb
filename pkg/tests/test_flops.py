import numpy as np
import pytest
import torch
import torch.nn as nn

from dcnas.errors import FlopsError
from dcnas.models import (
    UNET_PRESETS,
    classifier_preset,
    make_unet,
    random_archspec,
)
from dcnas.models.nas_models import build_dcnas
from dcnas.profiler import DEFAULT_CONVENTION, FlopsConvention, count_flops
from dcnas.search import get_search_space

from oracles import dcnas_macs, manual_classifier_macs, unet_macs


class TestHandCounts:
    def test_single_conv_hand_count(self):
        conv = nn.Conv2d(8, 12, 3, padding=1, bias=False)
        report = count_flops(conv, (1, 8, 32, 32))
        assert report.flops == 2 * 9 * 8 * 12 * 32 * 32  # 1,769,472
        assert report.flops == 1_769_472

    def test_unit_one_by_one_conv(self):
        conv = nn.Conv2d(1, 1, 1, bias=False)
        report = count_flops(conv, (1, 1, 1, 1))
        assert report.flops == 2
        assert count_flops(conv, (1, 1, 1, 1),
                           FlopsConvention(macs_to_flops=1)).flops == 1

    def test_depthwise_conv_uses_group_division(self):
        conv = nn.Conv2d(8, 8, 3, padding=1, groups=8, bias=False)
        report = count_flops(conv, (1, 8, 16, 16))
        assert report.macs == 9 * 1 * 8 * 16 * 16
        assert report.per_layer[0][1] == "depthwise_conv"

    def test_transposed_conv_cost(self):
        up = nn.ConvTranspose2d(6, 4, 2, stride=2, bias=False)
        report = count_flops(up, (1, 6, 8, 8))
        assert report.macs == 4 * 6 * 4 * 8 * 8
        assert report.per_layer[0][1] == "transposed_conv"

    def test_linear_cost(self):
        fc = nn.Linear(32, 10)
        report = count_flops(fc, (4, 32))
        assert report.macs == 4 * 32 * 10

    def test_norms_activations_pooling_ignored(self):
        model = nn.Sequential(nn.BatchNorm2d(4), nn.ReLU(), nn.MaxPool2d(2),
                              nn.AdaptiveAvgPool2d(1))
        report = count_flops(model, (1, 4, 8, 8))
        assert report.flops == 0


class TestEnumerationOracles:
    def test_unet_s_matches_per_layer_enumeration(self):
        model = make_unet(UNET_PRESETS["unet-s"])
        report = count_flops(model, (1, 1, 64, 64))
        assert report.macs == unet_macs(b=8, d=4, m=1.5, c=2, in_ch=1,
                                        out_ch=1, size=64)

    def test_unet_baseline_matches_enumeration(self):
        model = make_unet(UNET_PRESETS["unet-baseline"])
        report = count_flops(model, (1, 1, 64, 64))
        assert report.macs == unet_macs(b=64, d=5, m=2.0, c=2, in_ch=1,
                                        out_ch=1, size=64)

    def test_manual_classifier_matches_enumeration(self):
        model = classifier_preset("mb2.5-m")
        report = count_flops(model, (1, 1, 28, 28))
        assert report.macs == manual_classifier_macs("mbconv", 2.5, 0.75)

    def test_conv_classifier_matches_enumeration(self):
        model = classifier_preset("conv-l")
        report = count_flops(model, (1, 1, 28, 28))
        assert report.macs == manual_classifier_macs("conv", None, 1.0)

    def test_random_dcnas_matches_enumeration(self):
        space = get_search_space("size-8")
        spec = random_archspec("S", space, np.random.default_rng(17))
        model = build_dcnas(spec, num_classes=100, seed=0)
        report = count_flops(model, (1, 3, 224, 224))
        assert report.macs == dcnas_macs(spec.choices, width_factor=0.5,
                                         num_classes=100, size=224)


class TestProperties:
    def test_additive_over_composition(self):
        a = nn.Conv2d(3, 6, 3, padding=1)
        b = nn.Conv2d(6, 2, 1)
        combined = count_flops(nn.Sequential(a, b), (1, 3, 16, 16))
        alone_a = count_flops(a, (1, 3, 16, 16))
        alone_b = count_flops(b, (1, 6, 16, 16))
        assert combined.flops == alone_a.flops + alone_b.flops

    def test_batch_scales_counts(self):
        conv = nn.Conv2d(2, 2, 3, padding=1, bias=False)
        single = count_flops(conv, (1, 2, 8, 8))
        double = count_flops(conv, (2, 2, 8, 8))
        assert double.macs == 2 * single.macs

    def test_se_reduction_kind_recorded(self):
        from dcnas.models import MBConvConfig, make_mbconv

        block = make_mbconv(MBConvConfig(3, 3.0, se=True), 8, 8, 1)
        report = count_flops(block, (1, 8, 16, 16))
        kinds = report.by_kind()
        assert kinds.get("se_reduction", 0) > 0
        assert "conv" in kinds and "depthwise_conv" in kinds

    def test_unresolvable_shape_raises(self):
        model = make_unet(UNET_PRESETS["unet-s"])
        with pytest.raises(FlopsError):
            count_flops(model, (1, 1, 60, 60))

    def test_invalid_factor_rejected(self):
        with pytest.raises(FlopsError):
            FlopsConvention(macs_to_flops=3)

    def test_convention_recorded_in_report(self):
        conv = nn.Conv2d(1, 1, 1, bias=False)
        report = count_flops(conv, (1, 1, 4, 4))
        assert report.convention == DEFAULT_CONVENTION
        assert report.convention.macs_to_flops == 2
