"""Jet evaluation and hand-rolled reverse-mode differentiation.

A *field* is anything with ``jet_batch(X, order)``: scalar fields return a
:class:`JetBatch` (values, gradients, laplacians), vector fields return a
:class:`VectorJetBatch` (values, jacobian, divergence).  ``order`` selects
how much of the jet is computed: 0 values only, 1 adds first derivatives,
2 adds the Laplacian / divergence data.  Networks, analytic solutions, and
Fourier sums all implement this protocol, so the loss functionals in
:mod:`mixres.losses` never care which one they are integrating.

Gradients with respect to network parameters come from a
:class:`GradientTape`: watching a network yields a recording view whose jet
batches carry engine Nodes; any scalar built from those via
:mod:`mixres.autodiff.engine` helpers can be backpropagated to flat
parameter gradients for every watched network at once.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DimensionError, NonFiniteError
from ..networks import (
    ResNetSpec,
    TwoLayerSpec,
    pack_resnet,
    pack_two_layer,
    unpack_resnet,
    unpack_two_layer,
)
from . import backend, engine
from .engine import Node
from .jets import Jet, JetBatch, VectorJet, VectorJetBatch

__all__ = [
    "Jet",
    "JetBatch",
    "VectorJet",
    "VectorJetBatch",
    "Network",
    "TwoLayerStack",
    "GradientTape",
    "eval_jet",
    "eval_vector_jet",
    "loss_gradient",
    "backend",
    "engine",
]


class Network:
    """A spec plus its flat parameter vector, evaluable as a field."""

    def __init__(self, spec, params: np.ndarray):
        self.spec = spec
        self.params = np.asarray(params, dtype=float)
        self._check()

    def _check(self):
        # unpack validates length and finiteness
        if isinstance(self.spec, ResNetSpec):
            unpack_resnet(self.spec, self.params)
        elif isinstance(self.spec, TwoLayerSpec):
            unpack_two_layer(self.spec, self.params)
        else:
            raise TypeError(f"unsupported spec type {type(self.spec)!r}")

    @property
    def is_vector(self) -> bool:
        return isinstance(self.spec, ResNetSpec) and self.spec.output_dim > 1

    def with_params(self, params: np.ndarray) -> "Network":
        return Network(self.spec, params)

    def _validate_points(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise DimensionError(
                f"expected points of shape (n, {self.spec.input_dim}), got {X.shape}"
            )
        return np.ascontiguousarray(X)

    def _forward(self, X: np.ndarray, order: int, with_tape: bool):
        X = self._validate_points(X)
        if isinstance(self.spec, ResNetSpec):
            A, W, b, U = unpack_resnet(self.spec, self.params)
            return backend.resnet_forward(
                X, A, W, b, U, self.spec.activation.power, order, with_tape
            )
        c, a, Wm, bm = unpack_two_layer(self.spec, self.params)
        return backend.two_layer_forward(
            X, c, a, Wm, bm, self.spec.activation.power, order, with_tape
        )

    def jet_batch(self, X: np.ndarray, order: int = 2):
        """Evaluate the field and its derivatives on a batch of points."""
        Y, J, LAP, _ = self._forward(X, order, with_tape=False)
        return self._wrap(Y, J, LAP)

    def _wrap(self, Y, J, LAP):
        if isinstance(self.spec, TwoLayerSpec):
            return JetBatch(values=Y, gradients=J, laplacians=LAP)
        if self.spec.output_dim == 1:
            return JetBatch(
                values=Y[:, 0],
                gradients=J[:, :, 0] if J is not None else None,
                laplacians=LAP[:, 0] if LAP is not None else None,
            )
        div = None
        if J is not None and self.spec.output_dim == self.spec.input_dim:
            div = engine.jacobian_trace(J)
        return VectorJetBatch(values=Y, jacobian=J, divergence=div)

    def forward_tape(self, X: np.ndarray, order: int):
        """Forward pass that records intermediates for ``backward_tape``."""
        Y, J, LAP, tape = self._forward(X, order, with_tape=True)
        return Y, J, LAP, tape

    def backward_tape(self, tape, vbar, gbar, lbar) -> np.ndarray:
        """Flat parameter gradient from cotangents of a recorded forward.

        For scalar fields the cotangents have shapes (n,), (n, d), (n,); for
        vector fields (n, o), (n, d, o), (n, o).  Any of them may be None.
        """
        if isinstance(self.spec, TwoLayerSpec):
            c, a, Wm, bm = unpack_two_layer(self.spec, self.params)
            cb, ab, Wb, bb = backend.two_layer_backward(
                c, a, Wm, bm, self.spec.activation.power, tape, vbar, gbar, lbar
            )
            return pack_two_layer(cb, ab, Wb, bb)
        if self.spec.output_dim == 1:
            vbar = None if vbar is None else np.asarray(vbar).reshape(-1, 1)
            gbar = None if gbar is None else np.asarray(gbar)[:, :, None]
            lbar = None if lbar is None else np.asarray(lbar).reshape(-1, 1)
        A, W, b, U = unpack_resnet(self.spec, self.params)
        Ab, Wb, bb, Ub = backend.resnet_backward(
            A, W, b, U, self.spec.activation.power, tape, vbar, gbar, lbar
        )
        return pack_resnet(self.spec, Ab, Wb, bb, Ub)


class TwoLayerStack:
    """Vector field assembled from independent scalar component fields."""

    def __init__(self, components):
        self.components = tuple(components)
        dims = {c.spec.input_dim for c in self.components}
        if len(dims) != 1:
            raise DimensionError("all components must share the input dimension")
        self.input_dim = dims.pop()

    def jet_batch(self, X: np.ndarray, order: int = 2) -> VectorJetBatch:
        jets = [c.jet_batch(X, order=order) for c in self.components]
        values = np.stack([j.values for j in jets], axis=1)
        jac = div = None
        if order >= 1:
            jac = np.stack([j.gradients for j in jets], axis=2)
            if len(self.components) == self.input_dim:
                div = engine.jacobian_trace(jac)
        return VectorJetBatch(values=values, jacobian=jac, divergence=div)


def eval_jet(net, x: np.ndarray) -> Jet:
    """Value, gradient, and Laplacian of a scalar field at one point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"expected a single point of shape (d,), got {x.shape}")
    jb = net.jet_batch(x[None, :], order=2)
    if not isinstance(jb, JetBatch):
        raise DimensionError("eval_jet needs a scalar field; use eval_vector_jet")
    return Jet(
        value=float(jb.values[0]),
        gradient=np.array(jb.gradients[0]),
        laplacian=float(jb.laplacians[0]),
    )


def eval_vector_jet(net, x: np.ndarray) -> VectorJet:
    """Values, jacobian, and divergence of a vector field at one point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"expected a single point of shape (d,), got {x.shape}")
    jb = net.jet_batch(x[None, :], order=2)
    if not isinstance(jb, VectorJetBatch):
        raise DimensionError("eval_vector_jet needs a vector field; use eval_jet")
    div = None if jb.divergence is None else float(engine.value_of(jb.divergence)[0])
    return VectorJet(values=np.array(jb.values[0]), jacobian=np.array(jb.jacobian[0]), divergence=div)


class _RecordingField:
    """View of a watched network whose jet batches carry engine Nodes."""

    def __init__(self, net: Network, records: list):
        self.net = net
        self._records = records

    @property
    def spec(self):
        return self.net.spec

    def jet_batch(self, X: np.ndarray, order: int = 2):
        Y, J, LAP, tape = self.net.forward_tape(X, order)
        scalar = isinstance(self.net.spec, TwoLayerSpec) or self.net.spec.output_dim == 1
        if scalar and not isinstance(self.net.spec, TwoLayerSpec):
            Y, J, LAP = (
                Y[:, 0],
                J[:, :, 0] if J is not None else None,
                LAP[:, 0] if LAP is not None else None,
            )
        vnode = Node(Y)
        gnode = Node(J) if J is not None else None
        lnode = Node(LAP) if LAP is not None else None
        self._records.append((tape, vnode, gnode, lnode))
        if scalar:
            return JetBatch(values=vnode, gradients=gnode, laplacians=lnode)
        div = None
        if gnode is not None and self.net.spec.output_dim == self.net.spec.input_dim:
            div = engine.jacobian_trace(gnode)
        return VectorJetBatch(values=vnode, jacobian=gnode, divergence=div)


class GradientTape:
    """Collects jet evaluations of watched networks for backpropagation."""

    def __init__(self):
        self._watched: list[tuple[Network, list]] = []

    def watch(self, net: Network) -> _RecordingField:
        records: list = []
        self._watched.append((net, records))
        return _RecordingField(net, records)

    def gradient(self, loss: Node) -> list[np.ndarray]:
        """Flat parameter gradients of a scalar Node, one per watched net.

        A network evaluated several times (say on interior and boundary
        batches) gets the sum of the contributions.  Running this twice on
        the same loss gives identical arrays.
        """
        grads_map = engine.backward(loss)
        out = []
        for net, records in self._watched:
            total = np.zeros(net.spec.param_count)
            for tape, vnode, gnode, lnode in records:
                vbar = grads_map.get(id(vnode))
                gbar = grads_map.get(id(gnode)) if gnode is not None else None
                lbar = grads_map.get(id(lnode)) if lnode is not None else None
                if vbar is None and gbar is None and lbar is None:
                    continue
                total += net.backward_tape(tape, vbar, gbar, lbar)
            out.append(total)
        return out


def loss_gradient(net: Network, loss_eval) -> tuple[float, np.ndarray]:
    """Value and flat parameter gradient of ``loss_eval`` at ``net``.

    ``loss_eval`` receives a recording view of the network and must return
    a scalar engine Node built from its jet batches.

    Raises:
        NonFiniteError: if the loss value is NaN or infinite.
    """
    tape = GradientTape()
    field = tape.watch(net)
    node = loss_eval(field)
    if not isinstance(node, Node):
        raise TypeError("loss_eval must build its result from recorded jets")
    value = float(engine.value_of(node))
    if not np.isfinite(value):
        raise NonFiniteError("loss evaluated to a non-finite value")
    (grad,) = tape.gradient(node)
    return value, grad
