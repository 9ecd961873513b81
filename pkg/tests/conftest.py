"""Shared fixtures and helper fields for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from mixres.autodiff import kernels_np
from mixres.autodiff.jets import JetBatch, VectorJetBatch
from mixres.networks import ResNetSpec, unpack_resnet, unpack_two_layer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def kink_margins(net, X: np.ndarray) -> np.ndarray:
    """Per-sample distance of the nearest pre-activation to zero.

    Finite-difference oracles lose accuracy when a perturbation crosses an
    activation kink, so FD-based tests keep every |z| above a margin.
    """
    power = net.spec.activation.power
    if isinstance(net.spec, ResNetSpec):
        A, W, b, U = unpack_resnet(net.spec, net.params)
        *_, tape = kernels_np.resnet_forward(X, A, W, b, U, power, 0, True)
        Zs = tape[4]
        return np.min([np.abs(Z).min(axis=1) for Z in Zs], axis=0)
    c, a, Wm, bm = unpack_two_layer(net.spec, net.params)
    *_, tape = kernels_np.two_layer_forward(X, c, a, Wm, bm, power, 0, True)
    return np.abs(tape[1]).min(axis=1)


def sample_away_from_kinks(
    net,
    rng: np.random.Generator,
    n: int,
    margin: float = 1e-3,
    lo: float = 0.0,
    hi: float = 1.0,
    max_rounds: int = 200,
) -> np.ndarray:
    """Uniform points whose pre-activations all stay ``margin`` from zero.

    Offending rows are redrawn individually until the whole batch clears
    the margin.
    """
    dim = net.spec.input_dim
    X = rng.uniform(lo, hi, size=(n, dim))
    for _ in range(max_rounds):
        bad = kink_margins(net, X) <= margin
        if not bad.any():
            return X
        X[bad] = rng.uniform(lo, hi, size=(int(bad.sum()), dim))
    raise RuntimeError(f"could not clear kink margin {margin} in {max_rounds} rounds")


class ZeroScalarField:
    """phi == 0 with all derivatives zero; handy as a degenerate candidate."""

    def __init__(self, dim: int):
        self.dim = dim

    def jet_batch(self, X, order=2):
        n = X.shape[0]
        return JetBatch(
            values=np.zeros(n),
            gradients=np.zeros((n, self.dim)) if order >= 1 else None,
            laplacians=np.zeros(n) if order >= 2 else None,
        )


class ZeroVectorField:
    """psi == 0 with zero jacobian and divergence."""

    def __init__(self, dim: int):
        self.dim = dim

    def jet_batch(self, X, order=2):
        n, d = X.shape[0], self.dim
        return VectorJetBatch(
            values=np.zeros((n, d)),
            jacobian=np.zeros((n, d, d)) if order >= 1 else None,
            divergence=np.zeros(n) if order >= 1 else None,
        )


class ScaledField:
    """c times another field; scales every jet component linearly."""

    def __init__(self, base, c: float):
        self.base = base
        self.c = c

    def jet_batch(self, X, order=2):
        jets = self.base.jet_batch(X, order)
        c = self.c

        def scale(arr):
            return None if arr is None else c * arr

        if isinstance(jets, JetBatch):
            return JetBatch(
                values=c * jets.values,
                gradients=scale(jets.gradients),
                laplacians=scale(jets.laplacians),
            )
        return VectorJetBatch(
            values=c * jets.values,
            jacobian=scale(jets.jacobian),
            divergence=scale(jets.divergence),
        )


class ShiftedField:
    """base + constant; only the value component moves."""

    def __init__(self, base, shift: float):
        self.base = base
        self.shift = shift

    def jet_batch(self, X, order=2):
        jets = self.base.jet_batch(X, order)
        return JetBatch(
            values=jets.values + self.shift,
            gradients=jets.gradients,
            laplacians=jets.laplacians,
        )
