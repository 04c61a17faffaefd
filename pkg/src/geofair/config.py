"""Flat key = value configuration files and the experiment configuration.

The file format is one assignment per line with ``#`` comments; every key
has a typed default below, and unknown keys are usage errors so typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

from .derivatives import DiffMode
from .errors import UsageError
from .losses import LossWeights
from .net import MlpSpec, ModelBundle, init
from .training import TrainConfig


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise UsageError(f"expected a boolean, got {s!r}")


def _parse_widths(s):
    try:
        return tuple(int(part) for part in s.split(","))
    except ValueError as err:
        raise UsageError(f"expected comma-separated widths, got {s!r}") from err


DEFAULTS = {
    "n": 2000,
    "seed": 7,
    "label_threshold": 2.0 * math.pi,
    "epochs": 500,
    "batch_size": 64,
    "learning_rate": 1e-3,
    "optimizer": "adam",
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    "sgd_momentum": 0.0,
    "w_recon": 1.0,
    "w_cls": 1.0,
    "w_align": 1.0,
    "lambda_geo": 20.0,
    "beta": 2.0,
    "squared_geo_norms": True,
    "geometry_mode": "stencil",
    "stencil_step": 1e-3,
    "hessian_step": 1e-2,
    "geometry_subsample": 0.5,
    "activation": "elu",
    "alpha": 1.0,
    "encoder_widths": (3, 128, 128, 2),
    "decoder_widths": (2, 128, 128, 3),
    "classifier_widths": (2, 16, 1),
}

_PARSERS = {
    "n": int,
    "seed": int,
    "label_threshold": float,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "optimizer": str,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "sgd_momentum": float,
    "w_recon": float,
    "w_cls": float,
    "w_align": float,
    "lambda_geo": float,
    "beta": float,
    "squared_geo_norms": _parse_bool,
    "geometry_mode": str,
    "stencil_step": float,
    "hessian_step": float,
    "geometry_subsample": float,
    "activation": str,
    "alpha": float,
    "encoder_widths": _parse_widths,
    "decoder_widths": _parse_widths,
    "classifier_widths": _parse_widths,
}


def parse_config_text(text):
    """Raw key -> string mapping from flat ``key = value`` lines."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def load_config_file(path):
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def resolve_settings(file_values=None, overrides=None):
    """DEFAULTS overlaid with a config file and then CLI overrides."""
    settings = dict(DEFAULTS)
    for source in (file_values or {},):
        for key, raw in source.items():
            if key not in _PARSERS:
                raise UsageError(f"unknown config key {key!r}")
            try:
                settings[key] = _PARSERS[key](raw)
            except UsageError:
                raise
            except ValueError as err:
                raise UsageError(f"bad value for {key!r}: {raw!r}") from err
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise UsageError(f"unknown setting {key!r}")
        settings[key] = value
    return settings


@dataclass
class ExperimentConfig:
    """Everything one comparison run needs: data, model and training."""

    n: int
    seed: int
    label_threshold: float
    train: TrainConfig
    encoder_widths: tuple
    decoder_widths: tuple
    classifier_widths: tuple
    activation: str
    alpha: float

    def make_bundle(self):
        specs = (
            MlpSpec(self.encoder_widths, self.activation, self.alpha),
            MlpSpec(self.decoder_widths, self.activation, self.alpha),
            MlpSpec(self.classifier_widths, self.activation, self.alpha),
        )
        enc, dec, cls = (
            init(s, self.seed * 4 + k) for k, s in enumerate(specs, 1)
        )
        return ModelBundle(encoder=enc, decoder=dec, classifier=cls)


def experiment_config(settings):
    mode_kind = settings["geometry_mode"]
    if mode_kind == "exact":
        mode = DiffMode.exact()
    elif mode_kind == "stencil":
        mode = DiffMode.stencil(settings["stencil_step"], settings["hessian_step"])
    else:
        raise UsageError(f"geometry_mode must be exact or stencil, got {mode_kind!r}")
    try:
        weights = LossWeights(
            w_recon=settings["w_recon"],
            w_cls=settings["w_cls"],
            w_align=settings["w_align"],
            lambda_geo=settings["lambda_geo"],
            beta=settings["beta"],
            squared_geo_norms=settings["squared_geo_norms"],
        )
        train = TrainConfig(
            epochs=settings["epochs"],
            batch_size=settings["batch_size"],
            learning_rate=settings["learning_rate"],
            optimizer=settings["optimizer"],
            adam_beta1=settings["adam_beta1"],
            adam_beta2=settings["adam_beta2"],
            adam_eps=settings["adam_eps"],
            sgd_momentum=settings["sgd_momentum"],
            seed=settings["seed"],
            weights=weights,
            geometry_mode=mode,
            geometry_subsample=settings["geometry_subsample"],
        )
    except ValueError as err:
        raise UsageError(str(err)) from err
    return ExperimentConfig(
        n=settings["n"],
        seed=settings["seed"],
        label_threshold=settings["label_threshold"],
        train=train,
        encoder_widths=settings["encoder_widths"],
        decoder_widths=settings["decoder_widths"],
        classifier_widths=settings["classifier_widths"],
        activation=settings["activation"],
        alpha=settings["alpha"],
    )
