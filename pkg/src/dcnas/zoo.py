"""Named model factory used by the CLI and presets.

Controlled-study names:

* ``unet-s`` / ``unet-m`` / ``unet-baseline`` — denoiser presets
* ``unet:b=8,d=4,m=1.5,c=2`` — custom denoiser hyperparameters
* ``conv-l``, ``mb2.5-m``, ... — manual digit classifiers
* ``dcnet-integrated-reduced`` / ``dcnet-sequential-reduced`` and their
  ``-baseline`` twins — joint models on the controlled data

Search-derived names take an architecture file: ``cnas:<spec.json>``,
``dnas:<spec.json>``, ``dcnas:<spec.json>``, ``dcnas-seq:<spec.json>``.
"""
from __future__ import annotations

import torch

from .errors import DcnasError
from .models import (
    ArchSpec,
    UNET_PRESETS,
    UNetConfig,
    build_cnas,
    build_dcnas,
    build_dcnas_seq,
    build_dnas,
    classifier_preset,
    join_integrated,
    join_sequential,
    make_unet,
)
from .models.classifiers import CLASSIFIER_PRESETS

JOINT_HEAD = dict(head_kind="mbconv", head_expansion=2.5, head_width_scale=0.75)


def _parse_unet(body: str) -> UNetConfig:
    kwargs = {}
    for item in body.split(","):
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in ("b", "d", "m", "c"):
            raise DcnasError(f"unknown UNet hyperparameter {key!r}")
        kwargs[key] = float(value) if key == "m" else int(value)
    return UNetConfig(**kwargs)


def resolve_model(name: str, num_classes: int = 10, in_ch: int = 1,
                  seed: int | None = None) -> torch.nn.Module:
    """Build a model by name; see the module docstring for the catalogue."""
    if seed is not None:
        torch.manual_seed(seed)
    key = name.lower()
    if key in UNET_PRESETS:
        return make_unet(UNET_PRESETS[key], in_ch=in_ch, out_ch=in_ch)
    if key.startswith("unet:"):
        return make_unet(_parse_unet(key.split(":", 1)[1]), in_ch=in_ch, out_ch=in_ch)
    if key in CLASSIFIER_PRESETS:
        return classifier_preset(key, in_ch=in_ch, num_classes=num_classes)
    if key.startswith("dcnet-"):
        parts = key.split("-")
        if len(parts) != 3 or parts[1] not in ("integrated", "sequential") \
                or parts[2] not in ("reduced", "baseline"):
            raise DcnasError(f"unknown joint model {name!r}")
        unet_name = "unet-s" if parts[2] == "reduced" else "unet-baseline"
        unet = make_unet(UNET_PRESETS[unet_name], in_ch=in_ch, out_ch=in_ch)
        if parts[1] == "integrated":
            return join_integrated(unet, num_classes=num_classes, **JOINT_HEAD)
        classifier = classifier_preset("mb2.5-m", in_ch=in_ch, num_classes=num_classes)
        return join_sequential(unet, classifier)
    nas_classes = 100 if num_classes == 10 else num_classes  # NAS default is 100-way
    for prefix, builder in (("dcnas-seq:", build_dcnas_seq), ("dcnas:", build_dcnas),
                            ("dnas:", build_dnas), ("cnas:", build_cnas)):
        if key.startswith(prefix):
            spec = ArchSpec.load(name[len(prefix):])
            if prefix == "dnas:":
                return build_dnas(spec)
            return builder(spec, num_classes=nas_classes)
    raise DcnasError(f"unknown model name {name!r}")
