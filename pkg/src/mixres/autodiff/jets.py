"""Containers for value/gradient/Laplacian bundles.

A "jet" carries a field's value together with its first derivatives and the
trace of its second derivatives at a point; the batch variants hold one row
per sample.  In recording mode the array slots hold engine Nodes instead of
ndarrays, so validation only runs on plain arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..exceptions import DimensionError


@dataclass
class Jet:
    """Scalar field data at one point: u(x), grad u(x), Laplacian u(x)."""

    value: float
    gradient: np.ndarray
    laplacian: float


@dataclass
class VectorJet:
    """Vector field data at one point.

    ``jacobian[k, a]`` is the derivative of component ``a`` along coordinate
    ``k``.  ``divergence`` is the trace of the jacobian and is only defined
    for square jacobians.
    """

    values: np.ndarray
    jacobian: np.ndarray
    divergence: float | None


@dataclass
class JetBatch:
    """Scalar field over a batch: values (n,), gradients (n, d), laplacians (n,).

    Slots beyond the evaluation order are None.
    """

    values: Any
    gradients: Any = None
    laplacians: Any = None

    def __post_init__(self):
        if not isinstance(self.values, np.ndarray):
            return
        n = self.values.shape[0]
        if self.values.ndim != 1:
            raise DimensionError("JetBatch values must be one-dimensional")
        g = self.gradients
        if isinstance(g, np.ndarray) and (g.ndim != 2 or g.shape[0] != n):
            raise DimensionError("JetBatch gradients must have shape (n, d)")
        lam = self.laplacians
        if isinstance(lam, np.ndarray) and lam.shape != (n,):
            raise DimensionError("JetBatch laplacians must have shape (n,)")


@dataclass
class VectorJetBatch:
    """Vector field over a batch.

    ``values`` is (n, o), ``jacobian`` is (n, d, o) with axis 1 the input
    coordinate, ``divergence`` is (n,) and present only when o == d.
    """

    values: Any
    jacobian: Any = None
    divergence: Any = None

    def __post_init__(self):
        if not isinstance(self.values, np.ndarray):
            return
        if self.values.ndim != 2:
            raise DimensionError("VectorJetBatch values must have shape (n, o)")
        j = self.jacobian
        if isinstance(j, np.ndarray):
            n, o = self.values.shape
            if j.shape[0] != n or j.ndim != 3 or j.shape[2] != o:
                raise DimensionError("VectorJetBatch jacobian must have shape (n, d, o)")
