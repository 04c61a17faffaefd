"""Input Jacobians/Hessians: exact propagation vs central-difference stencils."""

import numpy as np
import pytest

from geofair.derivatives import (
    DiffMode,
    Elu,
    LayerStack,
    input_hessian,
    input_jacobian,
)
from geofair import net

from oracles import random_layers, sample_away_from_kinks


def _random_elu_stack(rng, widths, alpha=1.0):
    return LayerStack(tuple(random_layers(rng, widths)), Elu(alpha))


def _sample_away_from_kinks(rng, stack, count, margin=1e-2, bound=3.0):
    return sample_away_from_kinks(rng, stack.layers, count, margin, bound)


def test_linear_net_jacobian_is_weight_matrix():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((2, 3))
    stack = LayerStack(((w, np.zeros(3)),), None)
    for _ in range(10):
        z = rng.uniform(-3, 3, 2)
        J = input_jacobian(stack, z, DiffMode.exact())
        assert np.array_equal(J, w.T)


def test_linear_net_hessian_is_zero():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((2, 3))
    stack = LayerStack(((w, rng.standard_normal(3)),), None)
    H = input_hessian(stack, np.array([0.5, -1.0]), DiffMode.exact())
    assert np.array_equal(H, np.zeros((3, 2, 2)))


def test_multilayer_linear_jacobian_constant_across_points():
    rng = np.random.default_rng(2)
    stack = LayerStack(tuple(random_layers(rng, (2, 5, 3))), None)
    ref = input_jacobian(stack, np.zeros(2), DiffMode.exact())
    for _ in range(10):
        J = input_jacobian(stack, rng.uniform(-3, 3, 2), DiffMode.exact())
        assert np.array_equal(J, ref)


def test_scalar_elu_net_closed_form():
    # single 1->1 layer with unit weight: derivative and second derivative
    # at -1 are both e^-1
    stack = LayerStack(
        ((np.array([[1.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1))),
        Elu(1.0),
    )
    z = np.array([-1.0])
    J = input_jacobian(stack, z, DiffMode.exact())
    H = input_hessian(stack, z, DiffMode.exact())
    assert abs(J[0, 0] - np.exp(-1.0)) < 1e-15
    assert abs(H[0, 0, 0] - np.exp(-1.0)) < 1e-15


def test_hand_quadratic_hessian_via_stencil():
    # D1(z) = z1^2 + z1 z2 has constant Hessian [[2, 1], [1, 0]]
    f = lambda z: np.array([z[0] ** 2 + z[0] * z[1]])
    H = input_hessian(f, np.array([0.4, -0.9]), DiffMode.stencil(1e-3))
    assert np.allclose(H[0], np.array([[2.0, 1.0], [1.0, 0.0]]), atol=1e-8)


def test_exact_mode_refuses_plain_callables():
    f = lambda z: np.array([z[0] ** 2])
    with pytest.raises(TypeError):
        input_jacobian(f, np.array([0.1]), DiffMode.exact())


def test_mode_agreement_on_random_elu_mlps():
    rng = np.random.default_rng(7)
    stack = _random_elu_stack(rng, (2, 12, 8, 3))
    mode_s = DiffMode.stencil(1e-3)
    worst_j = worst_h = 0.0
    for z in _sample_away_from_kinks(rng, stack, 100):
        J_e = input_jacobian(stack, z, DiffMode.exact())
        J_s = input_jacobian(stack, z, mode_s)
        H_e = input_hessian(stack, z, DiffMode.exact())
        H_s = input_hessian(stack, z, mode_s)
        worst_j = max(worst_j, np.abs(J_e - J_s).max())
        worst_h = max(worst_h, np.abs(H_e - H_s).max())
    assert worst_j < 1e-4
    assert worst_h < 1e-3


def test_hessian_symmetry_both_modes():
    rng = np.random.default_rng(9)
    stack = _random_elu_stack(rng, (3, 10, 4))
    for z in _sample_away_from_kinks(rng, stack, 20):
        H_e = input_hessian(stack, z, DiffMode.exact())
        H_s = input_hessian(stack, z, DiffMode.stencil(1e-3))
        assert np.abs(H_e - H_e.transpose(0, 2, 1)).max() < 1e-10
        assert np.abs(H_s - H_s.transpose(0, 2, 1)).max() < 1e-6


def test_softplus_stack_derivatives_agree():
    rng = np.random.default_rng(13)
    spec = net.MlpSpec((2, 8, 3), activation="softplus")
    store = net.init(spec, 4)
    stack = net.build_stack(spec, store.values)
    for _ in range(20):
        z = rng.uniform(-3, 3, 2)
        J_e = input_jacobian(stack, z, DiffMode.exact())
        J_s = input_jacobian(stack, z, DiffMode.stencil(1e-3))
        H_e = input_hessian(stack, z, DiffMode.exact())
        H_s = input_hessian(stack, z, DiffMode.stencil(1e-3))
        assert np.abs(J_e - J_s).max() < 1e-4
        assert np.abs(H_e - H_s).max() < 1e-3


def test_stencil_step_bounds_enforced():
    with pytest.raises(ValueError):
        DiffMode.stencil(1e-7)
    with pytest.raises(ValueError):
        DiffMode.stencil(0.5)
    with pytest.raises(ValueError):
        DiffMode.stencil(1e-3, hessian_step=1.0)


def test_separate_hessian_step_is_used():
    # a coarser second-derivative step changes nothing for a quadratic
    f = lambda z: np.array([3.0 * z[0] ** 2])
    H1 = input_hessian(f, np.array([0.2]), DiffMode.stencil(1e-3))
    H2 = input_hessian(f, np.array([0.2]), DiffMode.stencil(1e-3, hessian_step=5e-2))
    assert abs(H1[0, 0, 0] - 6.0) < 1e-7
    assert abs(H2[0, 0, 0] - 6.0) < 1e-9
