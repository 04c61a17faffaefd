"""Loss terms: hand cases, reductions, and gradient checks."""

import numpy as np
import pytest

from geofair import engine, net
from geofair.derivatives import DiffMode
from geofair.losses import (
    Batch,
    LossWeights,
    align_loss,
    geo_loss,
    task_loss,
    total_loss,
    total_loss_node,
)
from geofair.scm import sample_dataset

from oracles import central_difference, relative_error

STENCIL = DiffMode.stencil(1e-3, 1e-2)


def _small_bundle(seed=0):
    return net.ModelBundle(
        encoder=net.init(net.MlpSpec((3, 4, 2)), seed + 1),
        decoder=net.init(net.MlpSpec((2, 4, 3)), seed + 2),
        classifier=net.init(net.MlpSpec((2, 3, 1)), seed + 3),
    )


def _batch(n=8, seed=1):
    return Batch.from_records(sample_dataset(max(10, n), seed).train[:n])


def test_task_loss_perfect_reconstruction():
    # identity encoder/decoder on 2-D data reconstructs exactly
    enc = net.ParamStore(
        net.MlpSpec((2, 2)), np.concatenate([np.eye(2).ravel(), np.zeros(2)]), 0
    )
    dec = net.ParamStore(
        net.MlpSpec((2, 2)), np.concatenate([np.eye(2).ravel(), np.zeros(2)]), 0
    )
    bundle = net.ModelBundle(
        encoder=enc, decoder=dec, classifier=net.init(net.MlpSpec((2, 3, 1)), 1)
    )
    x = np.random.default_rng(0).standard_normal((5, 2))
    batch = Batch(x=x, x_cf=x.copy(), y=np.zeros(5))
    recon, _ = task_loss(batch, bundle)
    assert recon == 0.0


def test_task_loss_chance_bce_is_ln2():
    bundle = _small_bundle()
    bundle.classifier.values[:] = 0.0  # logit 0 -> p = 0.5 everywhere
    batch = _batch(16)
    _, bce = task_loss(batch, bundle)
    assert abs(bce - np.log(2.0)) < 1e-12


def test_task_loss_empty_batch():
    bundle = _small_bundle()
    with pytest.raises(ValueError):
        task_loss(Batch(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)), bundle)


def test_align_loss_zero_when_pairs_equal():
    bundle = _small_bundle()
    batch = _batch(6)
    same = Batch(x=batch.x, x_cf=batch.x.copy(), y=batch.y)
    assert align_loss(same, bundle) == 0.0


def test_align_loss_zero_for_constant_encoder():
    bundle = _small_bundle()
    bundle.encoder.values[:] = 0.0  # constant (zero) map collapses everything
    batch = _batch(6)
    assert align_loss(batch, bundle) == 0.0


def test_align_loss_hand_case():
    # single-layer identity encoder, one pair at distance sqrt(2)
    enc = net.ParamStore(
        net.MlpSpec((2, 2)), np.concatenate([np.eye(2).ravel(), np.zeros(2)]), 0
    )
    bundle = net.ModelBundle(
        encoder=enc,
        decoder=net.init(net.MlpSpec((2, 3, 2)), 1),
        classifier=net.init(net.MlpSpec((2, 3, 1)), 2),
    )
    batch = Batch(
        x=np.array([[0.0, 0.0]]), x_cf=np.array([[1.0, 1.0]]), y=np.zeros(1)
    )
    assert abs(align_loss(batch, bundle) - 2.0) < 1e-15


def test_geo_loss_zero_when_pairs_identical():
    bundle = _small_bundle()
    batch = _batch(5)
    same = Batch(x=batch.x, x_cf=batch.x.copy(), y=batch.y)
    metric, curvature = geo_loss(same, bundle, beta=0.5, mode=DiffMode.exact())
    assert metric == 0.0 and curvature == 0.0


def test_geo_loss_zero_for_linear_decoder():
    rng = np.random.default_rng(7)
    dec = net.ParamStore(
        net.MlpSpec((2, 3)),
        np.concatenate([rng.standard_normal(6), rng.standard_normal(3)]),
        0,
    )
    bundle = net.ModelBundle(
        encoder=net.init(net.MlpSpec((3, 4, 2)), 1),
        decoder=dec,
        classifier=net.init(net.MlpSpec((2, 3, 1)), 2),
    )
    batch = _batch(6)
    metric, curvature = geo_loss(batch, bundle, beta=0.5, mode=DiffMode.exact())
    assert metric == 0.0 and curvature == 0.0
    ms, cs = geo_loss(batch, bundle, beta=0.5, mode=STENCIL)
    assert ms < 1e-9 and cs < 1e-9


def test_total_loss_zero_weights():
    bundle = _small_bundle()
    batch = _batch(4)
    weights = LossWeights(w_recon=0, w_cls=0, w_align=0, lambda_geo=0)
    parts = total_loss(batch, bundle, weights, STENCIL)
    assert parts.total == 0.0


def test_total_loss_reduces_to_task_loss():
    bundle = _small_bundle()
    batch = _batch(8)
    weights = LossWeights(lambda_geo=0.0, w_align=0.0)
    parts = total_loss(batch, bundle, weights, STENCIL)
    recon, bce = task_loss(batch, bundle)
    assert abs(parts.total - (recon + bce)) < 1e-12
    # gradients match bit-for-bit because the skipped terms never run
    p0 = bundle.pack()
    leaf1 = engine.leaf(p0)
    node1, _ = total_loss_node(batch, bundle, weights, STENCIL, leaf1)
    g1 = engine.backward(node1, [leaf1])[0]

    def task_only(q):
        enc, dec, cls = bundle.stacks(q)
        from geofair.losses import _task_terms

        recon_n, bce_n = _task_terms(batch, enc, dec, cls)
        return 1.0 * recon_n + 1.0 * bce_n

    leaf2 = engine.leaf(p0)
    g2 = engine.backward(task_only(leaf2), [leaf2])[0]
    assert np.abs(g1 - g2).max() < 1e-10


def test_total_loss_breakdown_identity():
    bundle = _small_bundle()
    batch = _batch(8)
    weights = LossWeights(lambda_geo=0.3, beta=0.7, w_align=0.5, w_recon=2.0, w_cls=1.5)
    parts = total_loss(batch, bundle, weights, STENCIL)
    recomposed = (
        weights.w_recon * parts.recon_mse
        + weights.w_cls * parts.cls_bce
        + weights.w_align * parts.align
        + weights.lambda_geo * (parts.geo_metric + weights.beta * parts.geo_curvature)
    )
    assert abs(parts.total - recomposed) < 1e-12
    for value in (
        parts.recon_mse,
        parts.cls_bce,
        parts.align,
        parts.geo_metric,
        parts.geo_curvature,
    ):
        assert value >= 0.0


def test_total_loss_gradient_matches_finite_differences():
    bundle = _small_bundle(3)
    batch = _batch(6, seed=4)
    weights = LossWeights(lambda_geo=0.5, beta=0.5, w_align=1.0)
    for mode in (STENCIL, DiffMode.exact()):
        p0 = bundle.pack()

        def f(q):
            _, parts = total_loss_node(batch, bundle, weights, mode, params=np.asarray(q))
            return parts.total

        leaf = engine.leaf(p0)
        node, _ = total_loss_node(batch, bundle, weights, mode, params=leaf)
        g = engine.backward(node, [leaf])[0]
        fd = central_difference(f, p0)
        assert relative_error(g, fd) < 1e-5


def test_total_loss_gradient_with_squared_norms():
    bundle = _small_bundle(5)
    batch = _batch(5, seed=6)
    weights = LossWeights(lambda_geo=1.0, beta=2.0, squared_geo_norms=True)
    p0 = bundle.pack()

    def f(q):
        _, parts = total_loss_node(batch, bundle, weights, STENCIL, params=np.asarray(q))
        return parts.total

    leaf = engine.leaf(p0)
    node, _ = total_loss_node(batch, bundle, weights, STENCIL, params=leaf)
    g = engine.backward(node, [leaf])[0]
    assert relative_error(g, central_difference(f, p0)) < 1e-5


def test_geo_rows_subsampling():
    bundle = _small_bundle(7)
    batch = _batch(8, seed=8)
    weights = LossWeights(lambda_geo=1.0, squared_geo_norms=False)
    full = total_loss(batch, bundle, weights, DiffMode.exact())
    rows = np.array([0, 2, 5])
    sub = total_loss(batch, bundle, weights, DiffMode.exact(), geo_rows=rows)
    manual_m, manual_c = geo_loss(batch.subset(rows), bundle, 0.5, DiffMode.exact())
    assert abs(sub.geo_metric - manual_m) < 1e-15
    assert abs(sub.geo_curvature - manual_c) < 1e-15
    assert sub.geo_metric != full.geo_metric


def test_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(w_recon=-0.1)
    with pytest.raises(ValueError):
        LossWeights(lambda_geo=-1.0)
