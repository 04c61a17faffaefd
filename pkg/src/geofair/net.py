"""ELU multilayer perceptrons: encoder, decoder, classifier head.

Parameters live in flat float64 vectors (one per network) so the trainer
can treat a whole model as a single parameter vector. A store is
reconstructable bit-exactly from its (spec, seed) pair.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine
from .derivatives import Elu, LayerStack, Softplus
from .errors import FormatError, ShapeError

CHECKPOINT_FORMAT = "geofair-checkpoint/1"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (first = input dim, last = output dim) and activation."""

    widths: tuple
    activation: str = "elu"
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        if any(w <= 0 for w in self.widths):
            raise ValueError("layer widths must be positive")
        if self.activation not in ("elu", "softplus"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.alpha <= 0:
            raise ValueError("elu alpha must be positive")

    @property
    def d_in(self):
        return self.widths[0]

    @property
    def d_out(self):
        return self.widths[-1]

    def activation_fn(self):
        if self.activation == "softplus":
            return Softplus()
        return Elu(self.alpha)


def param_count(spec):
    """Total parameters: sum of fan_in*fan_out + fan_out over layers."""
    return sum(
        fi * fo + fo for fi, fo in zip(spec.widths[:-1], spec.widths[1:])
    )


def layer_slices(spec):
    """Per-layer (weight_slice, weight_shape, bias_slice) into a flat vector."""
    out = []
    offset = 0
    for fi, fo in zip(spec.widths[:-1], spec.widths[1:]):
        w_slice = slice(offset, offset + fi * fo)
        offset += fi * fo
        b_slice = slice(offset, offset + fo)
        offset += fo
        out.append((w_slice, (fi, fo), b_slice))
    return out


def init(spec, seed):
    """Fresh parameters: Glorot-uniform weights, zero biases, seeded PRNG."""
    rng = np.random.default_rng(seed)
    values = np.zeros(param_count(spec))
    for (w_slice, (fi, fo), _) in layer_slices(spec):
        limit = np.sqrt(6.0 / (fi + fo))
        values[w_slice] = rng.uniform(-limit, limit, size=fi * fo)
    return ParamStore(spec=spec, values=values, seed=int(seed))


@dataclass
class ParamStore:
    """Flat parameter vector for one MLP plus the seed that produced it."""

    spec: MlpSpec
    values: np.ndarray
    seed: int

    def __post_init__(self):
        self.values = engine.as_tensor(self.values, "parameters").ravel()
        if self.values.shape[0] != param_count(self.spec):
            raise ShapeError(
                f"parameter vector has {self.values.shape[0]} entries, "
                f"spec needs {param_count(self.spec)}"
            )

    def layers(self):
        return [
            (self.values[ws].reshape(shape), self.values[bs])
            for ws, shape, bs in layer_slices(self.spec)
        ]


def build_stack(spec, flat):
    """LayerStack over slices of ``flat`` (ndarray or engine Var)."""
    layers = []
    for ws, shape, bs in layer_slices(spec):
        layers.append((engine.reshape(flat[ws], shape), flat[bs]))
    return LayerStack(tuple(layers), spec.activation_fn())


def forward(spec, params, x):
    """Run the MLP on ``x`` (last axis = input dim); final layer is linear."""
    flat = params.values if isinstance(params, ParamStore) else params
    xv = engine.value_of(x)
    if xv.ndim == 0 or xv.shape[-1] != spec.d_in:
        raise ShapeError(
            f"input width {xv.shape[-1:]} does not match spec input {spec.d_in}"
        )
    stack = build_stack(spec, flat)
    if xv.ndim == 1:
        return stack.forward(engine.reshape(x, (1, spec.d_in)))[0]
    return stack.forward(x)


@dataclass
class ModelBundle:
    """Encoder, decoder and classifier over one shared latent space."""

    encoder: ParamStore
    decoder: ParamStore
    classifier: ParamStore

    def __post_init__(self):
        d_z = self.encoder.spec.d_out
        if self.decoder.spec.d_in != d_z or self.classifier.spec.d_in != d_z:
            raise ShapeError("decoder/classifier input must equal latent dim")
        if self.decoder.spec.d_out != self.encoder.spec.d_in:
            raise ShapeError("decoder output must equal encoder input dim")
        if self.classifier.spec.d_out != 1:
            raise ShapeError("classifier head must emit a single logit")

    @property
    def d_z(self):
        return self.encoder.spec.d_out

    @property
    def d_x(self):
        return self.encoder.spec.d_in

    def pack(self):
        """All parameters as one flat vector (encoder, decoder, classifier)."""
        return np.concatenate(
            [self.encoder.values, self.decoder.values, self.classifier.values]
        )

    def part_slices(self):
        n_e = self.encoder.values.shape[0]
        n_d = self.decoder.values.shape[0]
        n_c = self.classifier.values.shape[0]
        return (
            slice(0, n_e),
            slice(n_e, n_e + n_d),
            slice(n_e + n_d, n_e + n_d + n_c),
        )

    def with_params(self, flat):
        """A copy of this bundle with parameters taken from ``flat``."""
        flat = engine.as_tensor(flat, "parameters")
        se, sd, sc = self.part_slices()
        return ModelBundle(
            encoder=replace(self.encoder, values=flat[se].copy()),
            decoder=replace(self.decoder, values=flat[sd].copy()),
            classifier=replace(self.classifier, values=flat[sc].copy()),
        )

    def stacks(self, flat=None):
        """(encoder, decoder, classifier) LayerStacks, optionally over ``flat``."""
        if flat is None:
            return (
                build_stack(self.encoder.spec, self.encoder.values),
                build_stack(self.decoder.spec, self.decoder.values),
                build_stack(self.classifier.spec, self.classifier.values),
            )
        se, sd, sc = self.part_slices()
        return (
            build_stack(self.encoder.spec, flat[se]),
            build_stack(self.decoder.spec, flat[sd]),
            build_stack(self.classifier.spec, flat[sc]),
        )


DEFAULT_ENCODER_WIDTHS = (3, 128, 128, 2)
DEFAULT_DECODER_WIDTHS = (2, 128, 128, 3)
DEFAULT_CLASSIFIER_WIDTHS = (2, 16, 1)


def default_bundle(seed, activation="elu", alpha=1.0):
    """The stock architecture, initialized from per-network child seeds."""
    specs = (
        MlpSpec(DEFAULT_ENCODER_WIDTHS, activation, alpha),
        MlpSpec(DEFAULT_DECODER_WIDTHS, activation, alpha),
        MlpSpec(DEFAULT_CLASSIFIER_WIDTHS, activation, alpha),
    )
    enc, dec, cls = (init(s, int(seed) * 4 + k) for k, s in enumerate(specs, 1))
    return ModelBundle(encoder=enc, decoder=dec, classifier=cls)


def encode(bundle, x):
    return forward(bundle.encoder.spec, bundle.encoder, x)


def decode(bundle, z):
    return forward(bundle.decoder.spec, bundle.decoder, z)


def predict(bundle, z):
    """Probability of the positive class from a latent point or batch."""
    logit = forward(bundle.classifier.spec, bundle.classifier, z)
    p = engine.sigmoid(logit)
    if isinstance(p, engine.Var):
        return p
    if engine.value_of(z).ndim == 1:
        return float(p[0])
    return p[:, 0]


def _store_to_json(store):
    return {
        "widths": list(store.spec.widths),
        "activation": store.spec.activation,
        "alpha": store.spec.alpha,
        "seed": store.seed,
        "values": [float(v) for v in store.values],
    }


def _store_from_json(obj):
    spec = MlpSpec(tuple(obj["widths"]), obj["activation"], obj["alpha"])
    values = np.asarray(obj["values"], dtype=np.float64)
    return ParamStore(spec=spec, values=values, seed=int(obj["seed"]))


def save_checkpoint(bundle, path):
    """Write a versioned JSON checkpoint; floats round-trip bit-exactly."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "nets": {
            "encoder": _store_to_json(bundle.encoder),
            "decoder": _store_to_json(bundle.decoder),
            "classifier": _store_to_json(bundle.classifier),
        },
    }
    write_atomic(path, json.dumps(doc))


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(
            f"unsupported checkpoint format {doc.get('format')!r}"
        )
    nets = doc["nets"]
    return ModelBundle(
        encoder=_store_from_json(nets["encoder"]),
        decoder=_store_from_json(nets["decoder"]),
        classifier=_store_from_json(nets["classifier"]),
    )


def write_atomic(path, text):
    """Write via a temp file and rename so readers never see partial files."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
