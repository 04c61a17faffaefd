"""Pullback metric, Hessian stacks, and discrepancy measures."""

import numpy as np
import pytest

from geofair import geometry, net
from geofair.derivatives import DiffMode
from geofair.errors import ShapeError


def _min_eig_2x2(g):
    tr = g[0, 0] + g[1, 1]
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    return 0.5 * (tr - np.sqrt(max(tr * tr - 4.0 * det, 0.0)))


def test_pullback_identity():
    assert np.array_equal(geometry.pullback_metric(np.eye(2)), np.eye(2))


def test_pullback_hand_example():
    J = np.array([[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    assert np.array_equal(geometry.pullback_metric(J), np.diag([4.0, 9.0]))


def test_pullback_orthonormal_columns():
    # rotation embedding: orthonormal columns give the identity metric
    theta = 0.7
    J = np.array(
        [
            [np.cos(theta), -np.sin(theta)],
            [np.sin(theta), np.cos(theta)],
            [0.0, 0.0],
        ]
    )
    assert np.abs(geometry.pullback_metric(J) - np.eye(2)).max() < 1e-15


def test_pullback_requires_matrix():
    with pytest.raises(ShapeError):
        geometry.pullback_metric(np.ones(3))


def _identity_decoder_bundle():
    dec_spec = net.MlpSpec((2, 2))
    dec = net.ParamStore(
        dec_spec, np.concatenate([np.eye(2).ravel(), np.zeros(2)]), seed=0
    )
    return net.ModelBundle(
        encoder=net.init(net.MlpSpec((2, 4, 2)), 1),
        decoder=dec,
        classifier=net.init(net.MlpSpec((2, 3, 1)), 2),
    )


def test_geometry_at_identity_decoder():
    bundle = _identity_decoder_bundle()
    g = geometry.geometry_at(bundle, np.array([0.4, -1.1]))
    assert np.array_equal(g.G, np.eye(2))
    assert np.array_equal(g.H, np.zeros((2, 2, 2)))


def test_geometry_at_linear_decoder_everywhere():
    rng = np.random.default_rng(5)
    dec_spec = net.MlpSpec((2, 3))
    w = rng.standard_normal((2, 3))
    dec = net.ParamStore(
        dec_spec, np.concatenate([w.ravel(), np.zeros(3)]), seed=0
    )
    bundle = net.ModelBundle(
        encoder=net.init(net.MlpSpec((3, 4, 2)), 1),
        decoder=dec,
        classifier=net.init(net.MlpSpec((2, 3, 1)), 2),
    )
    ref = None
    for _ in range(10):
        g = geometry.geometry_at(bundle, rng.uniform(-3, 3, 2))
        assert np.array_equal(g.H, np.zeros((3, 2, 2)))
        assert np.array_equal(g.J, w.T)
        ref = g.G if ref is None else ref
        assert np.array_equal(g.G, ref)


def test_geometry_at_modes_agree():
    from oracles import sample_away_from_kinks

    bundle = net.default_bundle(3)
    rng = np.random.default_rng(1)
    layers = bundle.decoder.layers()
    for z in sample_away_from_kinks(rng, layers, 10, bound=2.0):
        ge = geometry.geometry_at(bundle, z, DiffMode.exact())
        gs = geometry.geometry_at(bundle, z, DiffMode.stencil(1e-3))
        assert np.abs(ge.J - gs.J).max() < 1e-4
        assert np.abs(ge.H - gs.H).max() < 1e-3


def test_bundle_invariants_on_random_model():
    bundle = net.default_bundle(11)
    rng = np.random.default_rng(2)
    for _ in range(50):
        g = geometry.geometry_at(bundle, rng.uniform(-3, 3, 2))
        assert np.abs(g.G - g.J.T @ g.J).max() < 1e-12
        assert np.abs(g.G - g.G.T).max() < 1e-12
        assert _min_eig_2x2(g.G) >= -1e-9
        assert np.abs(g.H - g.H.transpose(0, 2, 1)).max() < 1e-10


def test_metric_discrepancy_examples():
    assert geometry.metric_discrepancy(np.eye(2), np.eye(2)) == 0.0
    ga = np.diag([4.0, 9.0])
    gb = np.diag([4.0, 4.0])
    assert abs(geometry.metric_discrepancy(ga, gb) - 5.0) < 1e-15


def test_curvature_discrepancy_examples():
    ha = np.zeros((3, 2, 2))
    hb = np.zeros((3, 2, 2))
    assert geometry.curvature_discrepancy(ha, hb) == 0.0
    hb[1, 0, 1] = 3.0
    assert abs(geometry.curvature_discrepancy(ha, hb) - 3.0) < 1e-15


def test_discrepancy_shape_checks():
    with pytest.raises(ShapeError):
        geometry.metric_discrepancy(np.eye(2), np.eye(3))
    with pytest.raises(ShapeError):
        geometry.curvature_discrepancy(np.zeros((2, 2, 2)), np.zeros((3, 2, 2)))


def test_discrepancies_are_metrics_on_random_triples():
    rng = np.random.default_rng(3)
    for _ in range(100):
        A, B, C = (rng.standard_normal((2, 2)) for _ in range(3))
        dab = geometry.metric_discrepancy(A, B)
        dba = geometry.metric_discrepancy(B, A)
        assert dab == dba
        assert dab >= 0.0
        assert geometry.metric_discrepancy(A, A) == 0.0
        dac = geometry.metric_discrepancy(A, C)
        dcb = geometry.metric_discrepancy(C, B)
        assert dab <= dac + dcb + 1e-12
    for _ in range(100):
        A, B, C = (rng.standard_normal((3, 2, 2)) for _ in range(3))
        dab = geometry.curvature_discrepancy(A, B)
        assert dab == geometry.curvature_discrepancy(B, A)
        assert dab >= 0.0
        assert geometry.curvature_discrepancy(A, A) == 0.0
        assert dab <= geometry.curvature_discrepancy(A, C) + geometry.curvature_discrepancy(C, B) + 1e-12


def test_discrepancy_zero_iff_equal():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((2, 2))
    B = A + 1e-9
    assert geometry.metric_discrepancy(A, B) > 0.0
    assert geometry.metric_discrepancy(A, A.copy()) == 0.0


def test_decoder_scaling_law():
    # scaling the decoder by c scales G by c^2 and each H slice by c
    bundle = net.default_bundle(19)
    z = np.array([0.3, -0.6])
    g1 = geometry.geometry_at(bundle, z)
    scaled = bundle.with_params(bundle.pack())
    ws, _, bs = net.layer_slices(scaled.decoder.spec)[-1]
    scaled.decoder.values[ws] *= 2.0
    scaled.decoder.values[bs] *= 2.0
    g2 = geometry.geometry_at(scaled, z)
    assert np.abs(g2.G - 4.0 * g1.G).max() < 1e-8
    assert np.abs(g2.H - 2.0 * g1.H).max() < 1e-8
