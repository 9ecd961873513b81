"""Model problems on the unit cube and the samplers that feed training.

Two second-order elliptic problems with known solutions:

* Dirichlet: -Laplace(u) = f on (0,1)^d, u = 0 on the boundary, with
  u*(x) = prod_i sin(pi x_i) and f = d pi^2 u*.
* Neumann: -Laplace(u) + u = f with zero normal flux on the boundary,
  u*(x) = sum_i cos(pi x_i) and f = (pi^2 + 1) u*.

The analytic solution and its gradient are exposed as fields (the same
``jet_batch`` protocol networks implement), so losses and error metrics can
consume either without caring.  The source term reuses the jet expressions
of the solution, which makes the strong-form residuals vanish to rounding
at the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff.jets import Jet, JetBatch, VectorJetBatch
from .exceptions import DimensionError

PI = math.pi


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass
class SampleBatch:
    """One training batch: interior points plus boundary points and normals."""

    interior: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray


def sample_interior(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. uniform points in the open cube (0,1)^dim."""
    return rng.uniform(0.0, 1.0, size=(n, dim))


def sample_boundary(
    n: int, dim: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """n points uniform on the cube surface, with outward unit normals.

    Each point picks one of the 2*dim faces uniformly (all faces have equal
    area), then a uniform point on that face.  Draw order is faces first,
    then the coordinate block, so a seeded generator reproduces batches.
    """
    faces = rng.integers(0, 2 * dim, size=n)
    X = rng.uniform(0.0, 1.0, size=(n, dim))
    axis = faces // 2
    side = (faces % 2).astype(float)
    rows = np.arange(n)
    X[rows, axis] = side
    normals = np.zeros((n, dim))
    normals[rows, axis] = 2.0 * side - 1.0
    return X, normals


def boundary_count_rule(n_interior: int, dim: int) -> int:
    """Boundary batch size paired with an interior batch of size n.

    Surface error terms need ~n/d^2 points to match the interior statistical
    error, never fewer than one.
    """
    return max(math.ceil(n_interior / dim**2), 1)


def sample_pde_batch(
    dim: int, n_interior: int, n_boundary: int, rng: np.random.Generator
) -> SampleBatch:
    """Interior then boundary draws from one generator, in that order."""
    interior = sample_interior(n_interior, dim, rng)
    boundary, normals = sample_boundary(n_boundary, dim, rng)
    return SampleBatch(interior=interior, boundary=boundary, normals=normals)


# ---------------------------------------------------------------------------
# Analytic fields
# ---------------------------------------------------------------------------


def _check_points(X: np.ndarray, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionError(f"expected points of shape (n, {dim}), got {X.shape}")
    return X


class _ProductSineField:
    """u(x) = prod_i sin(pi x_i) as a scalar field."""

    def __init__(self, dim: int):
        self.dim = dim

    def jet_batch(self, X: np.ndarray, order: int = 2) -> JetBatch:
        X = _check_points(X, self.dim)
        s = np.sin(PI * X)
        P = s.prod(axis=1)
        grad = lap = None
        if order >= 1:
            c = np.cos(PI * X)
            grad = np.empty_like(X)
            for k in range(self.dim):
                others = [j for j in range(self.dim) if j != k]
                grad[:, k] = PI * c[:, k] * s[:, others].prod(axis=1)
        if order >= 2:
            lap = -(self.dim * PI**2) * P
        return JetBatch(values=P, gradients=grad, laplacians=lap)


class _ProductSineGradient:
    """grad of prod_i sin(pi x_i) as a vector field with its jacobian."""

    def __init__(self, dim: int):
        self.dim = dim

    def jet_batch(self, X: np.ndarray, order: int = 2) -> VectorJetBatch:
        X = _check_points(X, self.dim)
        d = self.dim
        s = np.sin(PI * X)
        c = np.cos(PI * X)
        P = s.prod(axis=1)
        values = np.empty_like(X)
        for k in range(d):
            others = [j for j in range(d) if j != k]
            values[:, k] = PI * c[:, k] * s[:, others].prod(axis=1)
        jac = div = None
        if order >= 1:
            jac = np.empty((X.shape[0], d, d))
            for k in range(d):
                jac[:, k, k] = -(PI**2) * P
                for a in range(k + 1, d):
                    rest = [j for j in range(d) if j not in (k, a)]
                    mixed = PI**2 * c[:, k] * c[:, a] * s[:, rest].prod(axis=1)
                    jac[:, k, a] = mixed
                    jac[:, a, k] = mixed
            # Same float expression as the solution Laplacian, so the strong
            # residual of the oracle pair cancels exactly.
            div = -(d * PI**2) * P
        return VectorJetBatch(values=values, jacobian=jac, divergence=div)


class _SumCosineField:
    """u(x) = sum_i cos(pi x_i) as a scalar field."""

    def __init__(self, dim: int):
        self.dim = dim

    def jet_batch(self, X: np.ndarray, order: int = 2) -> JetBatch:
        X = _check_points(X, self.dim)
        c = np.cos(PI * X)
        val = c.sum(axis=1)
        grad = lap = None
        if order >= 1:
            grad = -PI * np.sin(PI * X)
        if order >= 2:
            lap = -(PI**2) * val
        return JetBatch(values=val, gradients=grad, laplacians=lap)


class _SumCosineGradient:
    """grad of sum_i cos(pi x_i); the jacobian is diagonal."""

    def __init__(self, dim: int):
        self.dim = dim

    def jet_batch(self, X: np.ndarray, order: int = 2) -> VectorJetBatch:
        X = _check_points(X, self.dim)
        values = -PI * np.sin(PI * X)
        jac = div = None
        if order >= 1:
            n, d = X.shape
            jac = np.zeros((n, d, d))
            c = np.cos(PI * X)
            idx = np.arange(d)
            jac[:, idx, idx] = -(PI**2) * c
            # Same float expression as the solution Laplacian (see above).
            div = -(PI**2) * c.sum(axis=1)
        return VectorJetBatch(values=values, jacobian=jac, divergence=div)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


class Problem:
    """A model PDE with analytic solution on the unit cube.

    Attributes:
        kind: "dirichlet" or "neumann".
        dim: Spatial dimension.
        solution: Scalar field for u*.
        flux: Vector field for grad u*.
        zero_order_term: Coefficient of u in the operator (0 or 1).
    """

    kind: str
    dim: int
    zero_order_term: float

    def source(self, X: np.ndarray) -> np.ndarray:
        """f(X), built from the solution jets so residuals cancel exactly."""
        jets = self.solution.jet_batch(X, order=2)
        return -jets.laplacians + self.zero_order_term * jets.values

    def exact_jet(self, x: np.ndarray) -> Jet:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionError(f"expected a point of shape ({self.dim},), got {x.shape}")
        jets = self.solution.jet_batch(x[None, :], order=2)
        return Jet(
            value=float(jets.values[0]),
            gradient=jets.gradients[0].copy(),
            laplacian=float(jets.laplacians[0]),
        )


class DirichletProblem(Problem):
    """-Laplace(u) = f, u = 0 on the boundary, u* = prod sin(pi x_i)."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DimensionError("dim must be positive")
        self.kind = "dirichlet"
        self.dim = dim
        self.zero_order_term = 0.0
        self.solution = _ProductSineField(dim)
        self.flux = _ProductSineGradient(dim)

    def boundary_value(self, Xb: np.ndarray) -> np.ndarray:
        """g2 on the boundary; identically zero for this problem."""
        Xb = _check_points(Xb, self.dim)
        return np.zeros(Xb.shape[0])


class NeumannProblem(Problem):
    """-Laplace(u) + u = f, zero normal flux, u* = sum cos(pi x_i)."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DimensionError("dim must be positive")
        self.kind = "neumann"
        self.dim = dim
        self.zero_order_term = 1.0
        self.solution = _SumCosineField(dim)
        self.flux = _SumCosineGradient(dim)

    def boundary_flux(self, Xb: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """g1 = grad u* . n on the boundary; identically zero here."""
        Xb = _check_points(Xb, self.dim)
        return np.zeros(Xb.shape[0])


def make_problem(kind: str, dim: int) -> Problem:
    kinds = {"dirichlet": DirichletProblem, "neumann": NeumannProblem}
    try:
        cls = kinds[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown problem kind {kind!r}; expected one of {sorted(kinds)}") from None
    return cls(dim)
