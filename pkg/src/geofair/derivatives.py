"""First- and second-order input derivatives of layered networks.

Two independent routes are provided and cross-validate each other:

* ``exact`` — closed-form forward propagation of the value, Jacobian and
  Hessian through each affine layer and elementwise activation.
* ``stencil`` — central finite differences over primal evaluations. The
  stencil output is a fixed linear combination of network evaluations, so
  a training objective containing it needs only first-order parameter
  gradients, which :mod:`geofair.engine` supplies.

Both routes run on plain arrays (evaluation) or engine Vars (training);
the exact route additionally differentiates through its own propagation
rules, since those are compositions of engine primitives.

ELU note: with the standard parameterization the second derivative jumps
at 0 (0 on the positive side, ``alpha`` on the negative side). Hessians
here are the almost-everywhere values, using the negative-side limit at
the kink itself; softplus is available where true smoothness matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import select, value_of
from .errors import ShapeError

STENCIL_STEP_MIN = 1e-6
STENCIL_STEP_MAX = 1e-1


@dataclass(frozen=True)
class DiffMode:
    """How input derivatives are computed.

    ``step`` is the central-difference half-step for first derivatives;
    ``hessian_step`` (defaulting to ``step``) is used for second
    derivatives, whose rounding noise scales as step**-2.
    """

    kind: str  # "exact" | "stencil"
    step: float = 1e-3
    hessian_step: float | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "stencil"):
            raise ValueError(f"unknown differentiation mode {self.kind!r}")
        if self.kind == "stencil":
            for s in (self.step, self.resolved_hessian_step):
                if not (STENCIL_STEP_MIN <= s <= STENCIL_STEP_MAX):
                    raise ValueError(
                        f"stencil step {s} outside "
                        f"[{STENCIL_STEP_MIN}, {STENCIL_STEP_MAX}]"
                    )

    @property
    def is_exact(self):
        return self.kind == "exact"

    @property
    def resolved_hessian_step(self):
        return self.step if self.hessian_step is None else self.hessian_step

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def stencil(cls, step=1e-3, hessian_step=None):
        return cls("stencil", step, hessian_step)


class Elu:
    """alpha * (e^x - 1) below zero, identity above."""

    def __init__(self, alpha=1.0):
        if alpha <= 0:
            raise ValueError("elu alpha must be positive")
        self.alpha = alpha

    def value(self, x):
        mask = value_of(x) > 0
        # exp argument is capped at 0 so the unused positive branch cannot
        # overflow before select() discards it
        return select(mask, x, self.alpha * engine.expm1(engine.clip(x, hi=0.0)))

    def d1(self, x):
        mask = value_of(x) > 0
        return select(mask, 1.0, self.alpha * engine.exp(engine.clip(x, hi=0.0)))

    def d2(self, x):
        mask = value_of(x) > 0
        return select(mask, 0.0, self.alpha * engine.exp(engine.clip(x, hi=0.0)))


class Softplus:
    """log(1 + e^x); smooth to all orders."""

    def value(self, x):
        return engine.softplus(x)

    def d1(self, x):
        return engine.sigmoid(x)

    def d2(self, x):
        s = engine.sigmoid(x)
        return s * (1.0 - s)


@dataclass(frozen=True)
class LayerStack:
    """An MLP as data: affine layers with one activation between them.

    ``layers`` holds (weight, bias) pairs with weights shaped (fan_in,
    fan_out) for row-vector inputs; the activation is applied after every
    layer except the last. Entries may be ndarrays or engine Vars.
    """

    layers: tuple
    activation: object = None

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a LayerStack needs at least one layer")
        prev = None
        for w, b in self.layers:
            wv, bv = value_of(w), value_of(b)
            if wv.ndim != 2 or bv.ndim != 1 or bv.shape[0] != wv.shape[1]:
                raise ShapeError("layer shapes must be (in,out) and (out,)")
            if prev is not None and wv.shape[0] != prev:
                raise ShapeError("consecutive layer widths disagree")
            prev = wv.shape[1]

    @property
    def d_in(self):
        return value_of(self.layers[0][0]).shape[0]

    @property
    def d_out(self):
        return value_of(self.layers[-1][0]).shape[1]

    def __call__(self, z):
        return self.forward(z)

    def forward(self, z):
        """Evaluate on inputs whose last axis is d_in."""
        h = z
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = engine.matmul(h, w) + b
            if i < last and self.activation is not None:
                h = self.activation.value(h)
        return h


def _propagate_exact(stack, Z, want_hessian):
    """Forward value/Jacobian/Hessian propagation for a batch of inputs.

    Layouts keep the derivative axes in front of the width axis so every
    affine layer is a single (broadcast) matmul:
      value (m, w) ; J (m, d, w) ; H (m, d, d, w)
    """
    m, d = value_of(Z).shape
    v = Z
    J = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    H = np.zeros((m, d, d, d)) if want_hessian else None
    last = len(stack.layers) - 1
    act = stack.activation

    for i, (w, b) in enumerate(stack.layers):
        pre = engine.matmul(v, w) + b
        Jp = engine.matmul(J, w)
        Hp = engine.matmul(H, w) if want_hessian else None
        if i < last and act is not None:
            d1 = act.d1(pre)
            v = act.value(pre)
            width = value_of(pre).shape[-1]
            d1_j = engine.reshape(d1, (m, 1, width))
            J = d1_j * Jp
            if want_hessian:
                d2_h = engine.reshape(act.d2(pre), (m, 1, 1, width))
                d1_h = engine.reshape(d1, (m, 1, 1, width))
                outer = engine.reshape(Jp, (m, d, 1, width)) * engine.reshape(
                    Jp, (m, 1, d, width)
                )
                H = d2_h * outer + d1_h * Hp
        else:
            v, J, H = pre, Jp, Hp
    return v, J, H


def _stencil_plan(d, step, hessian_step, want_hessian):
    """Offsets (P, d) plus combination matrices C_J (d, P), C_H (d*d, P).

    Hessian rows for (i, j) and (j, i) are the same linear combination, so
    stencil Hessians are symmetric by construction, not by luck.
    """
    h1, h2 = float(step), float(hessian_step)
    offsets = [np.zeros(d)]

    def push(vec):
        offsets.append(vec)
        return len(offsets) - 1

    jac_idx = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h1
        jac_idx.append((push(+e), push(-e)))

    hess_diag, hess_cross = [], {}
    if want_hessian:
        for i in range(d):
            e = np.zeros(d)
            e[i] = h2
            hess_diag.append((push(+e), push(-e)))
        for i in range(d):
            for j in range(i + 1, d):
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = h2
                ej[j] = h2
                hess_cross[(i, j)] = (
                    push(ei + ej),
                    push(ei - ej),
                    push(-ei + ej),
                    push(-ei - ej),
                )

    P = len(offsets)
    cj = np.zeros((d, P))
    for i, (plus, minus) in enumerate(jac_idx):
        cj[i, plus] = 1.0 / (2.0 * h1)
        cj[i, minus] = -1.0 / (2.0 * h1)

    ch = None
    if want_hessian:
        ch = np.zeros((d * d, P))
        for i, (plus, minus) in enumerate(hess_diag):
            row = ch[i * d + i]
            row[plus] = 1.0 / h2**2
            row[minus] = 1.0 / h2**2
            row[0] = -2.0 / h2**2
        for (i, j), (pp, pm, mp, mm) in hess_cross.items():
            for row in (ch[i * d + j], ch[j * d + i]):
                row[pp] = 1.0 / (4.0 * h2**2)
                row[mm] = 1.0 / (4.0 * h2**2)
                row[pm] = -1.0 / (4.0 * h2**2)
                row[mp] = -1.0 / (4.0 * h2**2)

    return np.stack(offsets), cj, ch


def _eval_points(net, points):
    """Evaluate ``net`` at points (m, P, d) -> (m, P, d_out)."""
    if isinstance(net, LayerStack):
        return net.forward(points)
    pts = value_of(points)
    m, P, d = pts.shape
    rows = [np.asarray(net(pts[s, p]), dtype=np.float64)
            for s in range(m) for p in range(P)]
    out = np.stack(rows).reshape(m, P, -1)
    engine.as_tensor(out, "network evaluation")
    return out


def _stencil_batch(net, Z, mode, want_hessian):
    m, d = value_of(Z).shape
    offsets, cj, ch = _stencil_plan(
        d, mode.step, mode.resolved_hessian_step, want_hessian
    )
    points = engine.reshape(Z, (m, 1, d)) + offsets
    outputs = _eval_points(net, points)  # (m, P, d_out)
    d_out = value_of(outputs).shape[-1]
    J = engine.matmul(cj, outputs)  # (m, d, d_out)
    H = None
    if want_hessian:
        H = engine.reshape(engine.matmul(ch, outputs), (m, d, d, d_out))
    return J, H


def jacobian_hessian_batch(net, Z, mode, want_hessian=True):
    """Batched decoder geometry core.

    Returns (J, H) with J shaped (m, d_out, d_in) and H shaped
    (m, d_out, d_in, d_in); H is None when not requested. Accepts Vars in
    ``Z`` and, for a LayerStack, in the parameters, in which case results
    stay on the differentiation tape.
    """
    if value_of(Z).ndim != 2:
        raise ShapeError("expected a batch of points shaped (m, d)")
    if mode.is_exact:
        if not isinstance(net, LayerStack):
            raise TypeError("exact mode requires a LayerStack network")
        _, J, H = _propagate_exact(net, Z, want_hessian)
    else:
        J, H = _stencil_batch(net, Z, mode, want_hessian)
    m, d = value_of(Z).shape
    Jt = engine.transpose(J, (0, 2, 1))
    Ht = engine.transpose(H, (0, 3, 1, 2)) if want_hessian else None
    return Jt, Ht


def input_jacobian(net, z, mode=DiffMode.exact()):
    """Jacobian (d_out, d_in) of ``net`` at the single point ``z``."""
    z = engine.as_tensor(z, "jacobian point")
    if z.ndim != 1:
        raise ShapeError("input_jacobian expects a 1-D point")
    J, _ = jacobian_hessian_batch(net, z[None, :], mode, want_hessian=False)
    return value_of(J)[0] if not isinstance(J, engine.Var) else J[0]


def input_hessian(net, z, mode=DiffMode.exact()):
    """Per-output Hessian stack (d_out, d_in, d_in) of ``net`` at ``z``."""
    z = engine.as_tensor(z, "hessian point")
    if z.ndim != 1:
        raise ShapeError("input_hessian expects a 1-D point")
    _, H = jacobian_hessian_batch(net, z[None, :], mode, want_hessian=True)
    return value_of(H)[0] if not isinstance(H, engine.Var) else H[0]
