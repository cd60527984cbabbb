from .archspec import ARCHSPEC_VERSION, ArchSpec, random_archspec
from .blocks import ConvBlock, MBConv, MBConvConfig, SqueezeExcite, group_norm, make_mbconv, round_half_up
from .classifiers import CLASSIFIER_PRESETS, DigitClassifier, classifier_preset, make_manual_classifier
from .joint import (
    FeatureDigitHead,
    IntegratedJoint,
    SequentialJoint,
    crop_feature_boxes,
    crop_image_boxes,
    join_integrated,
    join_sequential,
)
from .macro import MACRO_PRESETS, LayerGeom, MacroConfig, StageSpec, cnas_macro, get_macro, tiny_macro
from .nas_models import (
    DECODER_VARIANTS,
    CNas,
    DCNas,
    DCNasSeq,
    DNas,
    NasDecoder,
    NasEncoder,
    build_cnas,
    build_dcnas,
    build_dcnas_seq,
    build_decoder_variant,
    build_dnas,
)
from .unet import UNET_PRESETS, UNet, UNetConfig, make_unet

__all__ = [
    "ARCHSPEC_VERSION", "ArchSpec", "random_archspec",
    "ConvBlock", "MBConv", "MBConvConfig", "SqueezeExcite", "group_norm",
    "make_mbconv", "round_half_up",
    "CLASSIFIER_PRESETS", "DigitClassifier", "classifier_preset", "make_manual_classifier",
    "FeatureDigitHead", "IntegratedJoint", "SequentialJoint",
    "crop_feature_boxes", "crop_image_boxes", "join_integrated", "join_sequential",
    "MACRO_PRESETS", "LayerGeom", "MacroConfig", "StageSpec", "cnas_macro", "get_macro", "tiny_macro",
    "DECODER_VARIANTS", "CNas", "DCNas", "DCNasSeq", "DNas", "NasDecoder", "NasEncoder",
    "build_cnas", "build_dcnas", "build_dcnas_seq", "build_decoder_variant", "build_dnas",
    "UNET_PRESETS", "UNet", "UNetConfig", "make_unet",
]
