"""Complexity estimators, their theoretical envelopes, and gap curves."""

import math

import numpy as np
import pytest

from mixres.autodiff import Network, TwoLayerStack
from mixres.domain import DirichletProblem, sample_boundary, sample_interior
from mixres.domain import SampleBatch
from mixres.exceptions import DimensionError
from mixres.losses import expected_loss, method_loss
from mixres.networks import (
    ResNetSpec,
    TwoLayerSpec,
    init_resnet,
    pack_two_layer,
)
from mixres.rademacher import (
    ComplexityEstimate,
    linear_class_bound,
    network_class_bound,
    quadrature_gap,
    rc_finite_class,
    rc_linear_exact,
    rc_network_lower_bound,
)


class TestLinearExact:
    def test_single_point_oracle(self):
        # n=1, d=1, x=0.7: every sign pattern aligns w and b, sup = 0.7 + 1.
        est = rc_linear_exact(np.array([[0.7]]), n_eps=16)
        assert est.mean == pytest.approx(1.7, abs=1e-15)
        assert est.kind == "exact-sup"
        assert est.std_err == 0.0

    def test_exhaustive_matches_independent_enumeration(self):
        rng = np.random.default_rng(0)
        for n, d in ((5, 1), (9, 3), (12, 2)):
            X = rng.uniform(0.0, 1.0, size=(n, d))
            est = rc_linear_exact(X, n_eps=2**n)
            signs = np.array(
                [[1.0 if (i >> j) & 1 else -1.0 for j in range(n)] for i in range(2**n)]
            )
            sups = np.linalg.norm(signs @ X / n, axis=1) + np.abs(signs.mean(axis=1))
            assert est.mean == pytest.approx(float(sups.mean()), abs=1e-12)
            assert est.n_eps == 2**n
            assert est.std_err == 0.0

    def test_sampled_path_reports_error(self):
        X = np.random.default_rng(1).uniform(0.0, 1.0, size=(64, 2))
        est = rc_linear_exact(X, n_eps=512, rng=np.random.default_rng(2))
        assert est.n_eps == 512
        assert est.std_err > 0.0

    @pytest.mark.parametrize("d", [1, 2, 5, 10])
    def test_upper_bound_holds(self, d):
        for n in (10, 100, 1000):
            X = np.random.default_rng(d * 1000 + n).uniform(0.0, 1.0, size=(n, d))
            est = rc_linear_exact(X, n_eps=1024, rng=np.random.default_rng(n))
            assert est.mean <= linear_class_bound(n, d)

    def test_estimate_scales_like_inverse_sqrt(self):
        ns = [2**k for k in range(4, 13)]
        means = []
        for n in ns:
            X = np.random.default_rng(n).uniform(0.0, 1.0, size=(n, 2))
            means.append(rc_linear_exact(X, n_eps=2048, rng=np.random.default_rng(1)).mean)
        slope = np.polyfit(np.log(ns), np.log(means), 1)[0]
        assert -0.6 <= slope <= -0.4

    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionError):
            rc_linear_exact(np.zeros(5))
        with pytest.raises(ValueError):
            rc_linear_exact(np.zeros((5, 2)), n_eps=0)


class TestCalculationRules:
    """Sign-expectation rules checked exactly on enumerable families."""

    def setup_method(self):
        rng = np.random.default_rng(3)
        self.n = 8
        self.F = rng.uniform(-1.0, 1.0, size=(4, self.n))
        self.G = rng.uniform(-1.0, 1.0, size=(3, self.n))

    def _exact(self, table):
        return rc_finite_class(table, n_eps=2**self.n).mean

    def test_subadditive_under_sums(self):
        sums = (self.F[:, None, :] + self.G[None, :, :]).reshape(-1, self.n)
        assert self._exact(sums) <= self._exact(self.F) + self._exact(self.G) + 1e-12

    def test_homogeneous_under_scaling(self):
        assert self._exact(-2.5 * self.F) == pytest.approx(
            2.5 * self._exact(self.F), abs=1e-12
        )

    def test_fixed_function_bounded(self):
        g = self.F[:1]
        bound = float(np.max(np.abs(g)))
        assert self._exact(g) <= bound / math.sqrt(self.n) + 1e-12

    def test_rejects_bad_table(self):
        with pytest.raises(DimensionError):
            rc_finite_class(np.zeros(4))


class TestNetworkLowerBound:
    def test_degenerate_class_is_zero(self):
        spec = TwoLayerSpec(input_dim=2, width=8, bound=0.0)
        X = np.random.default_rng(0).uniform(0.0, 1.0, size=(50, 2))
        est = rc_network_lower_bound(
            spec, X, n_eps=2, restarts=1, rng=np.random.default_rng(1), steps=10
        )
        assert est.mean == 0.0
        assert est.kind == "ascent-lower-bound"

    def test_below_theoretical_bound(self):
        rng_data = np.random.default_rng(4)
        for d, n in ((2, 50), (3, 200)):
            X = rng_data.uniform(0.0, 1.0, size=(n, d))
            spec = TwoLayerSpec(input_dim=d, width=8, bound=1.5)
            est = rc_network_lower_bound(
                spec, X, n_eps=3, restarts=2, rng=np.random.default_rng(5), steps=60
            )
            assert est.mean <= network_class_bound(n, d, spec.bound)

    def test_doubling_bound_doubles_estimate(self):
        X = np.random.default_rng(6).uniform(0.0, 1.0, size=(100, 2))
        small = rc_network_lower_bound(
            TwoLayerSpec(input_dim=2, width=8, bound=1.0),
            X, n_eps=3, restarts=2, rng=np.random.default_rng(7), steps=100,
        )
        big = rc_network_lower_bound(
            TwoLayerSpec(input_dim=2, width=8, bound=2.0),
            X, n_eps=3, restarts=2, rng=np.random.default_rng(7), steps=100,
        )
        assert big.mean >= 1.8 * small.mean

    def test_dimension_mismatch_rejected(self):
        spec = TwoLayerSpec(input_dim=3, width=4)
        with pytest.raises(DimensionError):
            rc_network_lower_bound(spec, np.zeros((10, 2)), n_eps=1, restarts=1, steps=1)


class TestBounds:
    def test_linear_bound_formula(self):
        assert linear_class_bound(100, 2) == pytest.approx(
            (math.sqrt(4 * math.log(4)) + 1) / 10.0
        )
        with pytest.raises(ValueError):
            linear_class_bound(0, 2)

    def test_network_bound_formula(self):
        l1 = 2.0 * (math.sqrt(2.0) + 1.0)
        c1 = 16 * l1 + 2 + 16 * l1 * math.sqrt(4 * math.log(4.0))
        assert network_class_bound(25, 2, 3.0) == pytest.approx(c1 * 3.0 / 5.0)
        with pytest.raises(ValueError):
            network_class_bound(25, 2, -1.0)


def _fixed_mix_fields(dim=2):
    spec_phi = ResNetSpec(input_dim=dim, width=10, blocks=10, output_dim=1)
    spec_psi = ResNetSpec(input_dim=dim, width=20, blocks=10, output_dim=dim)
    rng = np.random.default_rng(11)
    return (
        Network(spec_phi, init_resnet(spec_phi, rng)),
        Network(spec_psi, init_resnet(spec_psi, rng)),
    )


class TestQuadratureGap:
    def test_gap_curve_shape_and_sign(self):
        phi, psi = _fixed_mix_fields()
        curve = quadrature_gap(
            phi, psi, "mix", DirichletProblem(2), n_values=[32, 128],
            trials=8, rng=np.random.default_rng(0),
        )
        assert curve.ns.shape == (2,)
        assert np.all(curve.gap_means >= 0.0)
        assert np.all(curve.gap_std_errs >= 0.0)

    def test_constant_fields_give_zero_gap(self):
        # Constant phi and zero psi make every loss term constant per sample
        # once the source is constant, so the empirical loss never moves.
        class ConstantSource(DirichletProblem):
            def source(self, X):
                return np.full(X.shape[0], 2.0)

        problem = ConstantSource(2)
        spec = TwoLayerSpec(input_dim=2, width=2, bound=1.0)
        W = np.zeros((2, 2))
        phi = Network(spec, pack_two_layer(0.3, np.zeros(2), W, np.zeros(2)))
        zero = Network(spec, pack_two_layer(0.0, np.zeros(2), W, np.zeros(2)))
        psi = TwoLayerStack([zero, zero])
        curve = quadrature_gap(
            phi, psi, "mix", problem, n_values=[8, 64, 256], trials=4,
            rng=np.random.default_rng(1),
        )
        assert np.all(curve.gap_means < 1e-12)

    def test_zero_gap_has_no_slope(self):
        from mixres.rademacher import GapCurve

        flat = GapCurve(
            ns=np.array([8.0, 16.0]),
            gap_means=np.array([0.0, 0.0]),
            gap_std_errs=np.zeros(2),
            reference=1.0,
        )
        with pytest.raises(ValueError):
            flat.fitted_slope()

    def test_same_nodes_give_zero_gap(self):
        # In the Monte-Carlo reference regime (d > 3) the reference and the
        # empirical loss are the same estimator, so identical nodes give an
        # exactly zero gap.
        phi, psi = _fixed_mix_fields(dim=4)
        problem = DirichletProblem(4)
        ref = expected_loss(
            "mix", phi, psi, problem, n_mc=400, rng=np.random.default_rng(9)
        )
        rng = np.random.default_rng(9)
        interior = sample_interior(400, 4, rng)
        boundary, normals = sample_boundary(400, 4, rng)
        batch = SampleBatch(interior=interior, boundary=boundary, normals=normals)
        empirical = method_loss("mix", phi, psi, problem, batch).floats()
        assert abs(empirical.total - float(ref.total)) < 1e-12

    def test_slope_near_inverse_sqrt(self):
        phi, psi = _fixed_mix_fields()
        curve = quadrature_gap(
            phi, psi, "mix", DirichletProblem(2),
            n_values=[2**k for k in range(5, 13)], trials=64,
            rng=np.random.default_rng(3),
        )
        assert -0.65 <= curve.fitted_slope() <= -0.35

    def test_rejects_bad_arguments(self):
        phi, psi = _fixed_mix_fields()
        problem = DirichletProblem(2)
        with pytest.raises(ValueError):
            quadrature_gap(phi, psi, "mix", problem, n_values=[], trials=4)
        with pytest.raises(ValueError):
            quadrature_gap(phi, psi, "mix", problem, n_values=[16], trials=0)


class TestComplexityEstimateType:
    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            ComplexityEstimate(mean=-0.1, std_err=0.0, n=4, n_eps=4, kind="exact-sup")
