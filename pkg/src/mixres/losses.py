"""Loss functionals for the three solver families and the error metrics.

Three ways to fit a network to the model problems:

* ``mix_loss``: first-order system least squares over a scalar field phi
  (the solution candidate) and a vector field psi (the flux candidate),
  coupling them through a gradient-mismatch term.
* ``drm_loss``: the variational energy of the problem with a boundary
  penalty (Dirichlet) or a natural surface term (Neumann).
* ``dgm_loss``: the squared strong-form residual with a boundary penalty.

Every loss is written once against the helpers in ``autodiff.engine`` and
therefore runs in two modes: plain ndarrays in, floats out (analytic
oracles, quadrature references), or ``Node`` jets in, a differentiable
graph out (training).

``relative_errors`` reports the Monte-Carlo relative L2 errors of the
value, gradient, and Laplacian of a candidate field against the analytic
solution; ``expected_loss`` evaluates the population loss with tensor
Gauss-Legendre quadrature (d <= 3) or plain Monte-Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff.engine import add, multiply, nmean, nsum, square, subtract, value_of
from .domain import Problem, SampleBatch, sample_boundary, sample_interior
from .exceptions import NonFiniteError

METHODS = ("mix", "drm", "dgm")

#: Boundary penalty used by the energy loss on Dirichlet problems when the
#: caller does not pass explicit weights.  The energy term is O(1) while the
#: penalty must pin the trace, so it needs to be large.
DRM_DIRICHLET_BOUNDARY_WEIGHT = 500.0


@dataclass(frozen=True)
class Weights:
    """Term weights: total = r_g + lambda1 * r_e + lambda2 * r_b."""

    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")


def default_weights(method: str, problem_kind: str) -> Weights:
    """Per-method defaults; only the energy loss needs a nonunit penalty."""
    if method == "drm" and problem_kind == "dirichlet":
        return Weights(lambda2=DRM_DIRICHLET_BOUNDARY_WEIGHT)
    return Weights()


@dataclass
class LossBreakdown:
    """The three loss terms and their weighted sum.

    Fields hold floats when the loss was evaluated on plain arrays and
    graph nodes during training; ``floats()`` collapses either to numbers.
    """

    r_g: object
    r_e: object
    r_b: object
    total: object

    def floats(self) -> "LossBreakdown":
        return LossBreakdown(
            r_g=float(value_of(self.r_g)),
            r_e=float(value_of(self.r_e)),
            r_b=float(value_of(self.r_b)),
            total=float(value_of(self.total)),
        )


def _require_finite(samples, where: str) -> None:
    vals = np.atleast_1d(np.asarray(value_of(samples), dtype=float))
    finite = np.isfinite(vals)
    if not finite.all():
        index = int(np.flatnonzero(~finite)[0])
        raise NonFiniteError(f"non-finite {where} at sample {index}", sample_index=index)


# ---------------------------------------------------------------------------
# Per-sample residual terms, shared by empirical and quadrature paths
# ---------------------------------------------------------------------------


def _mix_mismatch(phi_jets, psi_jets):
    return nsum(square(subtract(phi_jets.gradients, psi_jets.values)), axis=1)


def _mix_equation(phi_jets, psi_jets, f, zero_order: float):
    # Sign does not matter once squared, so the residual is stored negated:
    # div psi + f (Dirichlet) or (div psi - phi) + f (Neumann).  Grouping
    # the field terms first lets the oracle pair cancel f exactly.
    if zero_order:
        res = add(subtract(psi_jets.divergence, multiply(phi_jets.values, zero_order)), f)
    else:
        res = add(psi_jets.divergence, f)
    return square(res)


def _dirichlet_boundary(values, g2):
    return square(subtract(values, g2))


def _flux_boundary(vectors, normals, g1):
    flux = nsum(multiply(vectors, normals), axis=1)
    return square(subtract(flux, g1))


def _drm_interior(phi_jets, f, zero_order: float):
    quad = nsum(square(phi_jets.gradients), axis=1)
    if zero_order:
        quad = add(quad, multiply(square(phi_jets.values), zero_order))
    return subtract(multiply(quad, 0.5), multiply(phi_jets.values, f))


def _dgm_interior(phi_jets, f, zero_order: float):
    if zero_order:
        res = subtract(
            add(multiply(phi_jets.laplacians, -1.0), multiply(phi_jets.values, zero_order)), f
        )
    else:
        res = add(phi_jets.laplacians, f)
    return square(res)


# ---------------------------------------------------------------------------
# Empirical losses over a sampled batch
# ---------------------------------------------------------------------------


def mix_loss(
    phi, psi, problem: Problem, batch: SampleBatch, weights: Weights | None = None
) -> LossBreakdown:
    """First-order system loss coupling a scalar and a vector field.

    r_g penalises grad(phi) - psi, r_e the first-order equation residual
    (with div psi standing in for the Laplacian), r_b the boundary data
    mismatch: phi against g2 for Dirichlet, psi . n against g1 for Neumann.
    """
    w = weights or default_weights("mix", problem.kind)
    phi_jets = phi.jet_batch(batch.interior, order=1)
    psi_jets = psi.jet_batch(batch.interior, order=1)
    f = problem.source(batch.interior)

    rg_samples = _mix_mismatch(phi_jets, psi_jets)
    re_samples = _mix_equation(phi_jets, psi_jets, f, problem.zero_order_term)
    if problem.kind == "dirichlet":
        bvals = phi.jet_batch(batch.boundary, order=0).values
        rb_samples = _dirichlet_boundary(bvals, problem.boundary_value(batch.boundary))
    else:
        bvecs = psi.jet_batch(batch.boundary, order=0).values
        g1 = problem.boundary_flux(batch.boundary, batch.normals)
        rb_samples = _flux_boundary(bvecs, batch.normals, g1)

    _require_finite(rg_samples, "gradient-mismatch residual")
    _require_finite(re_samples, "equation residual")
    _require_finite(rb_samples, "boundary residual")

    r_g = nmean(rg_samples)
    r_e = nmean(re_samples)
    r_b = nmean(rb_samples)
    total = add(r_g, add(multiply(r_e, w.lambda1), multiply(r_b, w.lambda2)))
    return LossBreakdown(r_g=r_g, r_e=r_e, r_b=r_b, total=total)


def drm_loss(
    phi, problem: Problem, batch: SampleBatch, weights: Weights | None = None
) -> LossBreakdown:
    """Variational energy loss.

    Dirichlet: mean[ 0.5 |grad phi|^2 - f phi ] + lambda2 * mean (phi - g2)^2.
    Neumann:   mean[ 0.5 (|grad phi|^2 + phi^2) - f phi ] - surface mean[g1 phi].
    The Neumann surface term belongs to the variational functional itself,
    so it enters with unit weight regardless of lambda2.  The energy term
    is signed; it approaches the (negative) minimum energy at the solution
    rather than zero.
    """
    w = weights or default_weights("drm", problem.kind)
    phi_jets = phi.jet_batch(batch.interior, order=1)
    f = problem.source(batch.interior)
    re_samples = _drm_interior(phi_jets, f, problem.zero_order_term)

    if problem.kind == "dirichlet":
        bvals = phi.jet_batch(batch.boundary, order=0).values
        rb_samples = _dirichlet_boundary(bvals, problem.boundary_value(batch.boundary))
        boundary_weight = w.lambda2
    else:
        bvals = phi.jet_batch(batch.boundary, order=0).values
        g1 = problem.boundary_flux(batch.boundary, batch.normals)
        rb_samples = multiply(bvals, -g1)
        boundary_weight = 1.0

    _require_finite(re_samples, "energy integrand")
    _require_finite(rb_samples, "boundary residual")

    r_e = nmean(re_samples)
    r_b = nmean(rb_samples)
    total = add(multiply(r_e, w.lambda1), multiply(r_b, boundary_weight))
    return LossBreakdown(r_g=0.0, r_e=r_e, r_b=r_b, total=total)


def dgm_loss(
    phi, problem: Problem, batch: SampleBatch, weights: Weights | None = None
) -> LossBreakdown:
    """Strong-form squared-residual loss.

    Dirichlet: mean (Laplace phi + f)^2 + lambda2 * mean (phi - g2)^2.
    Neumann:   mean (-Laplace phi + phi - f)^2
               + lambda2 * mean (dphi/dn - g1)^2.
    """
    w = weights or default_weights("dgm", problem.kind)
    phi_jets = phi.jet_batch(batch.interior, order=2)
    f = problem.source(batch.interior)
    re_samples = _dgm_interior(phi_jets, f, problem.zero_order_term)

    if problem.kind == "dirichlet":
        bvals = phi.jet_batch(batch.boundary, order=0).values
        rb_samples = _dirichlet_boundary(bvals, problem.boundary_value(batch.boundary))
    else:
        bjets = phi.jet_batch(batch.boundary, order=1)
        g1 = problem.boundary_flux(batch.boundary, batch.normals)
        rb_samples = _flux_boundary(bjets.gradients, batch.normals, g1)

    _require_finite(re_samples, "equation residual")
    _require_finite(rb_samples, "boundary residual")

    r_e = nmean(re_samples)
    r_b = nmean(rb_samples)
    total = add(multiply(r_e, w.lambda1), multiply(r_b, w.lambda2))
    return LossBreakdown(r_g=0.0, r_e=r_e, r_b=r_b, total=total)


def method_loss(
    method: str,
    phi,
    psi,
    problem: Problem,
    batch: SampleBatch,
    weights: Weights | None = None,
) -> LossBreakdown:
    """Dispatch on the method name; psi is only consulted for "mix"."""
    if method == "mix":
        if psi is None:
            raise ValueError("mix loss needs a flux field")
        return mix_loss(phi, psi, problem, batch, weights)
    if method == "drm":
        return drm_loss(phi, problem, batch, weights)
    if method == "dgm":
        return dgm_loss(phi, problem, batch, weights)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# Error metrics
# ---------------------------------------------------------------------------


def relative_errors(
    phi,
    psi,
    problem: Problem,
    n_quad: int = 10_000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    """Relative L2 errors (e0, e1, e2) of value, gradient, and Laplacian.

    Monte-Carlo on ``n_quad`` uniform points; numerator and denominator
    share the same points so the ratios are exact for scaled fields.  When
    ``psi`` is given (the mixed formulation) its values replace grad(phi)
    in e1 and its divergence replaces the Laplacian in e2.
    """
    if n_quad < 1:
        raise ValueError("n_quad must be positive")
    rng = rng or np.random.default_rng(0)
    X = sample_interior(n_quad, problem.dim, rng)
    exact = problem.solution.jet_batch(X, order=2)

    if psi is None:
        jets = phi.jet_batch(X, order=2)
        values, grads, laps = jets.values, jets.gradients, jets.laplacians
    else:
        values = phi.jet_batch(X, order=0).values
        flux = psi.jet_batch(X, order=1)
        grads, laps = flux.values, flux.divergence

    def ratio(num_sq: np.ndarray, den_sq: np.ndarray) -> float:
        den = float(np.sum(den_sq))
        if den <= 0.0:
            raise ValueError("zero reference norm in relative error")
        return math.sqrt(float(np.sum(num_sq)) / den)

    e0 = ratio(np.square(values - exact.values), np.square(exact.values))
    e1 = ratio(
        np.sum(np.square(grads - exact.gradients), axis=1),
        np.sum(np.square(exact.gradients), axis=1),
    )
    e2 = ratio(np.square(laps - exact.laplacians), np.square(exact.laplacians))
    return e0, e1, e2


# ---------------------------------------------------------------------------
# Population losses by quadrature
# ---------------------------------------------------------------------------


def _gauss_cube(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes and weights on [0,1]^dim (weights sum 1)."""
    t, w = np.polynomial.legendre.leggauss(order)
    x1 = 0.5 * (t + 1.0)
    w1 = 0.5 * w
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    X = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([w1] * dim), indexing="ij")
    W = np.ones(order**dim)
    for g in wgrids:
        W = W * g.reshape(-1)
    return X, W


def _gauss_boundary(dim: int, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Face-by-face tensor quadrature for surface means (weights sum 1)."""
    points, normals, weights = [], [], []
    if dim == 1:
        face_X = np.zeros((1, 0))
        face_W = np.ones(1)
    else:
        face_X, face_W = _gauss_cube(dim - 1, order)
    n_face = face_W.shape[0]
    for axis in range(dim):
        for side in (0.0, 1.0):
            X = np.empty((n_face, dim))
            free = [j for j in range(dim) if j != axis]
            X[:, free] = face_X
            X[:, axis] = side
            N = np.zeros((n_face, dim))
            N[:, axis] = 2.0 * side - 1.0
            points.append(X)
            normals.append(N)
            weights.append(face_W / (2 * dim))
    return np.vstack(points), np.vstack(normals), np.concatenate(weights)


def expected_loss(
    method: str,
    phi,
    psi,
    problem: Problem,
    weights: Weights | None = None,
    gauss_order: int = 64,
    n_mc: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> LossBreakdown:
    """Population loss under the uniform sampling measures.

    Tensor Gauss-Legendre with ``gauss_order`` points per axis for d <= 3;
    Monte-Carlo with ``n_mc`` points (interior and boundary) above that.
    Returned terms are plain floats.
    """
    w = weights or default_weights(method, problem.kind)
    if problem.dim <= 3:
        Xi, Wi = _gauss_cube(problem.dim, gauss_order)
        Xb, Nb, Wb = _gauss_boundary(problem.dim, gauss_order)
    else:
        rng = rng or np.random.default_rng(0)
        Xi = sample_interior(n_mc, problem.dim, rng)
        Wi = np.full(n_mc, 1.0 / n_mc)
        Xb, Nb = sample_boundary(n_mc, problem.dim, rng)
        Wb = np.full(n_mc, 1.0 / n_mc)

    f = problem.source(Xi)
    zero_order = problem.zero_order_term
    r_g = 0.0

    if method == "mix":
        phi_jets = phi.jet_batch(Xi, order=1)
        psi_jets = psi.jet_batch(Xi, order=1)
        r_g = float(Wi @ _mix_mismatch(phi_jets, psi_jets))
        r_e = float(Wi @ _mix_equation(phi_jets, psi_jets, f, zero_order))
        if problem.kind == "dirichlet":
            bvals = phi.jet_batch(Xb, order=0).values
            rb = _dirichlet_boundary(bvals, problem.boundary_value(Xb))
        else:
            bvecs = psi.jet_batch(Xb, order=0).values
            rb = _flux_boundary(bvecs, Nb, problem.boundary_flux(Xb, Nb))
        r_b = float(Wb @ rb)
        total = r_g + w.lambda1 * r_e + w.lambda2 * r_b
    elif method == "drm":
        phi_jets = phi.jet_batch(Xi, order=1)
        r_e = float(Wi @ _drm_interior(phi_jets, f, zero_order))
        if problem.kind == "dirichlet":
            bvals = phi.jet_batch(Xb, order=0).values
            r_b = float(Wb @ _dirichlet_boundary(bvals, problem.boundary_value(Xb)))
            total = w.lambda1 * r_e + w.lambda2 * r_b
        else:
            bvals = phi.jet_batch(Xb, order=0).values
            r_b = float(Wb @ (bvals * -problem.boundary_flux(Xb, Nb)))
            total = w.lambda1 * r_e + r_b
    elif method == "dgm":
        phi_jets = phi.jet_batch(Xi, order=2)
        r_e = float(Wi @ _dgm_interior(phi_jets, f, zero_order))
        if problem.kind == "dirichlet":
            bvals = phi.jet_batch(Xb, order=0).values
            r_b = float(Wb @ _dirichlet_boundary(bvals, problem.boundary_value(Xb)))
        else:
            bjets = phi.jet_batch(Xb, order=1)
            r_b = float(Wb @ _flux_boundary(bjets.gradients, Nb, problem.boundary_flux(Xb, Nb)))
        total = w.lambda1 * r_e + w.lambda2 * r_b
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

    return LossBreakdown(r_g=r_g, r_e=r_e, r_b=r_b, total=total)
