"""Training objective: task terms, counterfactual alignment, and the
geometric penalty tying factual and counterfactual decoder geometry.

All terms run on plain parameters (reporting) or on an engine Var
parameter vector (training); zero-weighted optional terms are skipped
outright so a run with lambda_geo = 0 and w_align = 0 is bit-identical to
the plain task objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .derivatives import jacobian_hessian_batch
from .scm import records_arrays

BCE_CLAMP = 1e-7


@dataclass
class Batch:
    """Dense columns for a set of counterfactually paired samples."""

    x: np.ndarray
    x_cf: np.ndarray
    y: np.ndarray

    @classmethod
    def from_records(cls, records):
        _, _, _, y, x, x_cf = records_arrays(records)
        return cls(x=x, x_cf=x_cf, y=y.astype(np.float64))

    def subset(self, rows):
        return Batch(x=self.x[rows], x_cf=self.x_cf[rows], y=self.y[rows])

    def __len__(self):
        return self.x.shape[0]


@dataclass(frozen=True)
class LossWeights:
    """Term weights; the stock geometric configuration unless overridden.

    Squared Frobenius norms are the training default: the plain norm has a
    constant-magnitude gradient that leaves the discrepancies jittering at
    an optimizer-noise floor instead of decaying, which pilot runs showed
    costs well over an order of magnitude of final invariance.
    """

    w_recon: float = 1.0
    w_cls: float = 1.0
    w_align: float = 1.0
    lambda_geo: float = 20.0
    beta: float = 2.0
    squared_geo_norms: bool = True

    def __post_init__(self):
        for name in ("w_recon", "w_cls", "w_align", "lambda_geo", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def baseline(cls):
        """Plain autoencoder + classifier: no alignment, no geometry."""
        return cls(w_align=0.0, lambda_geo=0.0)


@dataclass
class LossBreakdown:
    total: float
    recon_mse: float
    cls_bce: float
    align: float
    geo_metric: float
    geo_curvature: float
    batch_size: int

    CSV_HEADER = "step,total,recon_mse,cls_bce,align,geo_metric,geo_curvature"

    def csv_row(self, step):
        vals = (
            self.total,
            self.recon_mse,
            self.cls_bce,
            self.align,
            self.geo_metric,
            self.geo_curvature,
        )
        return ",".join([str(step)] + [repr(float(v)) for v in vals])


def _require_rows(batch):
    if len(batch) == 0:
        raise ValueError("empty batch")


def _task_terms(batch, enc_stack, dec_stack, cls_stack):
    n = len(batch)
    z = enc_stack.forward(batch.x)
    x_hat = dec_stack.forward(z)
    diff = x_hat - batch.x
    recon = engine.reduce_mean(engine.reduce_sum(engine.mul(diff, diff), axis=1))
    logit = engine.reshape(cls_stack.forward(z), (n,))
    p = engine.clip(engine.sigmoid(logit), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = batch.y
    bce = -engine.reduce_mean(y * engine.log(p) + (1.0 - y) * engine.log(1.0 - p))
    return recon, bce


def _align_term(batch, enc_stack):
    gap = enc_stack.forward(batch.x) - enc_stack.forward(batch.x_cf)
    return engine.reduce_mean(engine.reduce_sum(engine.mul(gap, gap), axis=1))


def _geo_terms(batch, enc_stack, dec_stack, beta, mode, squared):
    z = enc_stack.forward(batch.x)
    z_cf = enc_stack.forward(batch.x_cf)
    J, H = jacobian_hessian_batch(dec_stack, z, mode)
    Jc, Hc = jacobian_hessian_batch(dec_stack, z_cf, mode)
    G = engine.matmul(engine.transpose(J, (0, 2, 1)), J)
    Gc = engine.matmul(engine.transpose(Jc, (0, 2, 1)), Jc)
    dG = G - Gc
    dH = H - Hc
    if squared:
        metric = engine.reduce_mean(engine.reduce_sum(engine.mul(dG, dG), axis=(1, 2)))
        curvature = engine.reduce_mean(
            engine.reduce_sum(engine.mul(dH, dH), axis=(1, 2, 3))
        )
    else:
        metric = engine.reduce_mean(engine.norm_trailing(dG, 2))
        curvature = engine.reduce_mean(
            engine.reduce_sum(engine.norm_trailing(dH, 2), axis=1)
        )
    return metric, curvature


def task_loss(batch, bundle):
    """(reconstruction MSE, clamped classification BCE) over the batch."""
    _require_rows(batch)
    enc, dec, cls = bundle.stacks()
    recon, bce = _task_terms(batch, enc, dec, cls)
    return float(recon), float(bce)


def align_loss(batch, bundle):
    """Mean squared latent gap between factual and counterfactual inputs."""
    _require_rows(batch)
    enc, _, _ = bundle.stacks()
    return float(_align_term(batch, enc))


def geo_loss(batch, bundle, beta, mode, squared=False):
    """(metric, curvature) discrepancy means over the batch.

    ``beta`` only weights the curvature term inside the combined penalty;
    both raw means are returned so reports can show them separately.
    """
    _require_rows(batch)
    enc, dec, _ = bundle.stacks()
    metric, curvature = _geo_terms(batch, enc, dec, beta, mode, squared)
    return float(metric), float(curvature)


def total_loss(batch, bundle, weights, mode, geo_rows=None):
    """Weighted combination of all terms as a LossBreakdown."""
    total, parts = total_loss_node(batch, bundle, weights, mode, None, geo_rows)
    return parts


def total_loss_node(batch, bundle, weights, mode, params=None, geo_rows=None):
    """Core composition shared by reporting and training.

    With ``params`` a Var (the packed parameter vector) the returned total
    stays on the tape; the accompanying LossBreakdown always holds floats.
    """
    _require_rows(batch)
    enc, dec, cls = bundle.stacks(params)
    recon, bce = _task_terms(batch, enc, dec, cls)
    total = weights.w_recon * recon + weights.w_cls * bce

    align = 0.0
    if weights.w_align > 0:
        align = _align_term(batch, enc)
        total = total + weights.w_align * align

    metric, curvature = 0.0, 0.0
    if weights.lambda_geo > 0:
        geo_batch = batch if geo_rows is None else batch.subset(geo_rows)
        metric, curvature = _geo_terms(
            geo_batch, enc, dec, weights.beta, mode, weights.squared_geo_norms
        )
        total = total + weights.lambda_geo * (metric + weights.beta * curvature)

    parts = LossBreakdown(
        total=float(engine.value_of(total)),
        recon_mse=float(engine.value_of(recon)),
        cls_bce=float(engine.value_of(bce)),
        align=float(engine.value_of(align)),
        geo_metric=float(engine.value_of(metric)),
        geo_curvature=float(engine.value_of(curvature)),
        batch_size=len(batch),
    )
    return total, parts
