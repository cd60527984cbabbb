import pytest
import torch

from dcnas.errors import ArchSpecError
from dcnas.models import CLASSIFIER_PRESETS, MBConv, classifier_preset, make_manual_classifier


class TestPresets:
    @pytest.mark.parametrize("name", sorted(CLASSIFIER_PRESETS))
    def test_all_presets_classify_crops(self, name):
        model = classifier_preset(name)
        out = model(torch.rand(3, 1, 28, 28))
        assert out.shape == (3, 10)

    def test_mb_preset_uses_mbconv_second_stage(self):
        model = classifier_preset("mb2.5-m")
        block = model.layer2[0]
        assert isinstance(block, MBConv)
        assert block.cfg.expansion == 2.5

    def test_conv_preset_uses_plain_conv(self):
        model = classifier_preset("conv-l")
        assert isinstance(model.layer2[0], torch.nn.Conv2d)
        assert model.layer1[0].out_channels == 32
        assert model.layer2[0].out_channels == 64

    def test_expansion_one_has_no_expand_conv(self):
        model = classifier_preset("mb1-s")
        assert model.layer2[0].expand is None

    def test_unknown_preset(self):
        with pytest.raises(ArchSpecError):
            classifier_preset("mb9-xxl")


class TestFactory:
    def test_unknown_kind(self):
        with pytest.raises(ArchSpecError):
            make_manual_classifier("transformer")

    def test_mbconv_requires_expansion(self):
        with pytest.raises(ArchSpecError):
            make_manual_classifier("mbconv", expansion=None)

    def test_width_scaling(self):
        small = make_manual_classifier("conv", width_scale=0.5)
        assert small.layer1[0].out_channels == 16
        assert small.fc.in_features == 32
