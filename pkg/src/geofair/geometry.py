"""Riemannian quantities of the decoder at a latent point.

The decoder embeds the latent space into observation space; its Jacobian J
pulls the ambient inner product back to G = J^T J, and the per-output
Hessian stack captures local bending. Discrepancies between factual and
counterfactual geometry are Frobenius norms of differences; the curvature
discrepancy sums the slice norms over output dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine, net
from .derivatives import DiffMode, jacobian_hessian_batch
from .errors import ShapeError


@dataclass
class GeometryBundle:
    """Jacobian, pullback metric and Hessian stack at one latent point."""

    z: np.ndarray
    J: np.ndarray
    G: np.ndarray
    H: np.ndarray


def pullback_metric(J):
    """G = J^T J for a Jacobian shaped (d_out, d_in)."""
    J = engine.as_tensor(J, "jacobian")
    if J.ndim != 2:
        raise ShapeError("pullback metric needs a 2-D Jacobian")
    return J.T @ J


def geometry_at(bundle, z, mode=DiffMode.exact()):
    """Decoder geometry (J, G, H) of ``bundle`` at latent point ``z``."""
    z = engine.as_tensor(z, "latent point")
    if z.shape != (bundle.d_z,):
        raise ShapeError(f"latent point must have shape ({bundle.d_z},)")
    stack = net.build_stack(bundle.decoder.spec, bundle.decoder.values)
    J, H = jacobian_hessian_batch(stack, z[None, :], mode)
    return GeometryBundle(z=z, J=J[0], G=pullback_metric(J[0]), H=H[0])


def metric_discrepancy(ga, gb):
    """Frobenius norm of the difference of two pullback metrics."""
    ga, gb = engine.as_tensor(ga, "metric"), engine.as_tensor(gb, "metric")
    if ga.shape != gb.shape:
        raise ShapeError(f"metric shapes disagree: {ga.shape} vs {gb.shape}")
    return float(np.sqrt(np.sum((ga - gb) ** 2)))


def curvature_discrepancy(ha, hb):
    """Sum over output slices of Frobenius norms of Hessian differences."""
    ha, hb = engine.as_tensor(ha, "hessian"), engine.as_tensor(hb, "hessian")
    if ha.shape != hb.shape:
        raise ShapeError(f"hessian shapes disagree: {ha.shape} vs {hb.shape}")
    diff = ha - hb
    return float(np.sum(np.sqrt(np.sum(diff * diff, axis=(-2, -1)))))
