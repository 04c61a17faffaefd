"""Mini-batch training with deterministic shuffling, checkpointing and a
best-validation snapshot.

Two independent PRNG streams are derived from the run seed: one for epoch
shuffles, one for picking the geometric subsample inside each batch. The
geometric stream is consumed only when the geometric term is active, so a
run with lambda_geo = 0 follows the exact baseline trajectory.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine
from .derivatives import DiffMode
from .errors import FormatError, NumericError, TrainingDiverged
from .losses import Batch, LossWeights, total_loss_node
from .net import MlpSpec, ModelBundle, ParamStore, write_atomic
from .scm import records_arrays

TRAINSTATE_FORMAT = "geofair-trainstate/1"
_SHUFFLE_STREAM, _GEO_STREAM = 101, 202


def default_geometry_mode():
    # stencil training keeps parameter differentiation first-order; the
    # second-derivative step is wider because its noise scales as step**-2
    return DiffMode.stencil(step=1e-3, hessian_step=1e-2)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sgd_momentum: float = 0.0
    seed: int = 7
    weights: LossWeights = field(default_factory=LossWeights)
    geometry_mode: DiffMode = field(default_factory=default_geometry_mode)
    geometry_subsample: float = 0.5

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0.0 < self.learning_rate < 1.0:
            raise ValueError("learning_rate must lie in (0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 < self.geometry_subsample <= 1.0:
            raise ValueError("geometry_subsample must lie in (0, 1]")


@dataclass
class TrainState:
    """Parameters plus optimizer moment buffers after ``step`` updates."""

    params: np.ndarray
    step: int = 0
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None
    sgd_vel: np.ndarray | None = None


def _optimizer_update(state, grad, config):
    t = state.step + 1
    if config.optimizer == "adam":
        m = state.adam_m if state.adam_m is not None else np.zeros_like(grad)
        v = state.adam_v if state.adam_v is not None else np.zeros_like(grad)
        m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad
        v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad * grad
        m_hat = m / (1.0 - config.adam_beta1**t)
        v_hat = v / (1.0 - config.adam_beta2**t)
        params = state.params - config.learning_rate * m_hat / (
            np.sqrt(v_hat) + config.adam_eps
        )
        return TrainState(params=params, step=t, adam_m=m, adam_v=v)
    vel = state.sgd_vel if state.sgd_vel is not None else np.zeros_like(grad)
    vel = config.sgd_momentum * vel + grad
    params = state.params - config.learning_rate * vel
    return TrainState(params=params, step=t, sgd_vel=vel)


def _loss_and_grad(batch, state, config, bundle, geo_rows):
    p = engine.leaf(state.params)
    total, parts = total_loss_node(
        batch, bundle, config.weights, config.geometry_mode, p, geo_rows
    )
    if not math.isfinite(parts.total):
        raise NumericError("non-finite training loss")
    grad = engine.backward(total, [p])[0]
    return grad, parts


def train_step(batch, state, config, bundle, geo_rows=None):
    """One optimizer update; returns (state, bundle, LossBreakdown)."""
    grad, parts = _loss_and_grad(batch, state, config, bundle, geo_rows)
    new_state = _optimizer_update(state, grad, config)
    return new_state, bundle.with_params(new_state.params), parts


class Trainer:
    """Epoch loop with resumable, bit-reproducible state."""

    def __init__(self, config, dataset, bundle):
        if config.batch_size > len(dataset.train):
            raise ValueError("batch_size exceeds the training split")
        self.config = config
        self.dataset = dataset
        self.bundle = bundle
        self.train_batch = Batch.from_records(dataset.train)
        self.val_batch = (
            Batch.from_records(dataset.validation) if dataset.validation else None
        )
        self.state = TrainState(params=bundle.pack())
        self.rng_shuffle = np.random.default_rng([config.seed, _SHUFFLE_STREAM])
        self.rng_geo = np.random.default_rng([config.seed, _GEO_STREAM])
        self.epoch = 0
        self.perm = None
        self.cursor = 0
        self.log = []
        self.val_history = []
        self.best_params = None
        self.best_val = math.inf
        self.best_step = -1

    @property
    def n_train(self):
        return len(self.train_batch)

    @property
    def steps_per_epoch(self):
        return math.ceil(self.n_train / self.config.batch_size)

    def _geo_rows(self, batch_len):
        cfg = self.config
        if cfg.weights.lambda_geo <= 0 or cfg.geometry_subsample >= 1.0:
            return None
        k = max(1, int(round(cfg.geometry_subsample * batch_len)))
        return np.sort(self.rng_geo.choice(batch_len, size=k, replace=False))

    def _one_step(self):
        if self.perm is None:
            self.perm = self.rng_shuffle.permutation(self.n_train)
            self.cursor = 0
        rows = self.perm[self.cursor : self.cursor + self.config.batch_size]
        batch = self.train_batch.subset(rows)
        geo_rows = self._geo_rows(len(rows))
        try:
            grad, parts = _loss_and_grad(
                batch, self.state, self.config, self.bundle, geo_rows
            )
        except NumericError as err:
            raise TrainingDiverged(
                f"aborting at step {self.state.step}: {err}"
            ) from err
        self.state = _optimizer_update(self.state, grad, self.config)
        self.log.append((self.state.step, parts))
        self.cursor += self.config.batch_size
        if self.cursor >= self.n_train:
            self.perm = None
            self.epoch += 1
            self._end_epoch()
        return parts

    def _end_epoch(self):
        if self.val_batch is None:
            self.best_params = self.state.params.copy()
            self.best_step = self.state.step
            return
        try:
            _, parts = total_loss_node(
                self.val_batch,
                self.bundle,
                self.config.weights,
                self.config.geometry_mode,
                self.state.params,
            )
        except NumericError as err:
            raise TrainingDiverged(
                f"validation diverged after epoch {self.epoch}: {err}"
            ) from err
        self.val_history.append((self.epoch, parts))
        if parts.total < self.best_val:
            self.best_val = parts.total
            self.best_params = self.state.params.copy()
            self.best_step = self.state.step

    def run(self, epochs=None):
        """Advance ``epochs`` full epochs (defaults to the config's count)."""
        target = self.epoch + (self.config.epochs if epochs is None else epochs)
        while self.epoch < target:
            self._one_step()
        return self.log

    def run_steps(self, k):
        for _ in range(k):
            self._one_step()
        return self.log

    def best_bundle(self):
        params = (
            self.best_params if self.best_params is not None else self.state.params
        )
        return self.bundle.with_params(params)

    def current_bundle(self):
        return self.bundle.with_params(self.state.params)

    # -- persistence ------------------------------------------------------

    def save_state(self, path):
        doc = {
            "format": TRAINSTATE_FORMAT,
            "config": config_to_json(self.config),
            "dataset_digest": dataset_digest(self.dataset),
            "architecture": _architecture_to_json(self.bundle),
            "epoch": self.epoch,
            "cursor": self.cursor,
            "perm": None if self.perm is None else [int(i) for i in self.perm],
            "step": self.state.step,
            "params": _floats(self.state.params),
            "adam_m": _floats(self.state.adam_m),
            "adam_v": _floats(self.state.adam_v),
            "sgd_vel": _floats(self.state.sgd_vel),
            "rng_shuffle": _rng_state_to_json(self.rng_shuffle),
            "rng_geo": _rng_state_to_json(self.rng_geo),
            "best": None
            if self.best_params is None
            else {
                "params": _floats(self.best_params),
                "val_total": self.best_val,
                "step": self.best_step,
            },
        }
        write_atomic(path, json.dumps(doc))

    @classmethod
    def load_state(cls, path, dataset):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != TRAINSTATE_FORMAT:
            raise FormatError(
                f"unsupported training-state format {doc.get('format')!r}"
            )
        if doc["dataset_digest"] != dataset_digest(dataset):
            raise FormatError("training state was saved against another dataset")
        config = config_from_json(doc["config"])
        bundle = _architecture_from_json(doc["architecture"])
        trainer = cls(config, dataset, bundle)
        trainer.epoch = int(doc["epoch"])
        trainer.cursor = int(doc["cursor"])
        trainer.perm = None if doc["perm"] is None else np.array(doc["perm"])
        trainer.state = TrainState(
            params=_array(doc["params"]),
            step=int(doc["step"]),
            adam_m=_array(doc["adam_m"]),
            adam_v=_array(doc["adam_v"]),
            sgd_vel=_array(doc["sgd_vel"]),
        )
        _rng_state_from_json(trainer.rng_shuffle, doc["rng_shuffle"])
        _rng_state_from_json(trainer.rng_geo, doc["rng_geo"])
        if doc["best"] is not None:
            trainer.best_params = _array(doc["best"]["params"])
            trainer.best_val = float(doc["best"]["val_total"])
            trainer.best_step = int(doc["best"]["step"])
        return trainer


def train(config, dataset, bundle, log_path=None, state_path=None):
    """Run a full training; returns (best-validation bundle, loss log).

    On divergence the exception propagates after the last epoch-boundary
    state file (when requested) has been kept intact on disk.
    """
    trainer = Trainer(config, dataset, bundle)
    target = trainer.epoch + config.epochs
    while trainer.epoch < target:
        before = trainer.epoch
        while trainer.epoch == before:
            trainer._one_step()
        if state_path is not None:
            trainer.save_state(state_path)
    if log_path is not None:
        write_training_log(trainer.log, log_path)
    return trainer.best_bundle(), trainer.log


def write_training_log(log, path):
    from .losses import LossBreakdown

    lines = [LossBreakdown.CSV_HEADER]
    for step, parts in log:
        lines.append(parts.csv_row(step))
    write_atomic(path, "\n".join(lines) + "\n")


# -- serialization helpers ------------------------------------------------


def _floats(arr):
    return None if arr is None else [float(v) for v in arr]


def _array(vals):
    return None if vals is None else np.asarray(vals, dtype=np.float64)


def _rng_state_to_json(rng):
    state = rng.bit_generator.state
    return json.loads(json.dumps(state))


def _rng_state_from_json(rng, doc):
    rng.bit_generator.state = doc


def config_to_json(config):
    w = config.weights
    return {
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "optimizer": config.optimizer,
        "adam_beta1": config.adam_beta1,
        "adam_beta2": config.adam_beta2,
        "adam_eps": config.adam_eps,
        "sgd_momentum": config.sgd_momentum,
        "seed": config.seed,
        "weights": {
            "w_recon": w.w_recon,
            "w_cls": w.w_cls,
            "w_align": w.w_align,
            "lambda_geo": w.lambda_geo,
            "beta": w.beta,
            "squared_geo_norms": w.squared_geo_norms,
        },
        "geometry_mode": {
            "kind": config.geometry_mode.kind,
            "step": config.geometry_mode.step,
            "hessian_step": config.geometry_mode.hessian_step,
        },
        "geometry_subsample": config.geometry_subsample,
    }


def config_from_json(doc):
    mode = doc["geometry_mode"]
    return TrainConfig(
        epochs=int(doc["epochs"]),
        batch_size=int(doc["batch_size"]),
        learning_rate=float(doc["learning_rate"]),
        optimizer=doc["optimizer"],
        adam_beta1=float(doc["adam_beta1"]),
        adam_beta2=float(doc["adam_beta2"]),
        adam_eps=float(doc["adam_eps"]),
        sgd_momentum=float(doc["sgd_momentum"]),
        seed=int(doc["seed"]),
        weights=LossWeights(**doc["weights"]),
        geometry_mode=DiffMode(
            kind=mode["kind"],
            step=float(mode["step"]),
            hessian_step=None
            if mode["hessian_step"] is None
            else float(mode["hessian_step"]),
        ),
        geometry_subsample=float(doc["geometry_subsample"]),
    )


def config_digest(config):
    text = json.dumps(config_to_json(config), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def dataset_digest(dataset):
    h = hashlib.sha256()
    h.update(
        f"{dataset.seed},{dataset.n},{dataset.label_threshold}".encode()
    )
    for part in (dataset.train, dataset.validation, dataset.test):
        for arr in records_arrays(part):
            h.update(arr.tobytes())
    return h.hexdigest()


def _architecture_to_json(bundle):
    def spec_doc(store):
        return {
            "widths": list(store.spec.widths),
            "activation": store.spec.activation,
            "alpha": store.spec.alpha,
            "seed": store.seed,
        }

    return {
        "encoder": spec_doc(bundle.encoder),
        "decoder": spec_doc(bundle.decoder),
        "classifier": spec_doc(bundle.classifier),
    }


def _architecture_from_json(doc):
    def store(part):
        spec = MlpSpec(tuple(part["widths"]), part["activation"], part["alpha"])
        from .net import init

        return init(spec, int(part["seed"]))

    return ModelBundle(
        encoder=store(doc["encoder"]),
        decoder=store(doc["decoder"]),
        classifier=store(doc["classifier"]),
    )
