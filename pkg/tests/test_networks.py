"""Parameter layout, counting, initialisation, and projection tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixres.activations import RECU, RELU, REQU, get_activation
from mixres.exceptions import DimensionError, NonFiniteError
from mixres.networks import (
    ResNetSpec,
    TwoLayerSpec,
    init_resnet,
    init_two_layer,
    matched_single_net_width,
    pack_resnet,
    pack_two_layer,
    project_two_layer,
    unpack_resnet,
    unpack_two_layer,
)


class TestParameterCounts:
    """The six published table entries, pinned exactly."""

    @pytest.mark.parametrize(
        "dim,width,expected",
        [(2, 10, 5410), (5, 25, 32650), (10, 50, 129050)],
    )
    def test_mixed_pair_counts(self, dim, width, expected):
        phi = ResNetSpec(input_dim=dim, width=width, blocks=10, output_dim=1)
        psi = ResNetSpec(input_dim=dim, width=2 * width, blocks=10, output_dim=dim)
        assert phi.param_count + psi.param_count == expected

    @pytest.mark.parametrize(
        "dim,width,expected",
        [(2, 23, 5589), (5, 57, 33402), (10, 113, 130063)],
    )
    def test_single_net_counts(self, dim, width, expected):
        spec = ResNetSpec(input_dim=dim, width=width, blocks=10, output_dim=1)
        assert spec.param_count == expected

    def test_count_formula(self):
        spec = ResNetSpec(input_dim=3, width=7, blocks=4, output_dim=2)
        assert spec.param_count == 7 * 3 + 4 * (49 + 7) + 2 * 7

    def test_two_layer_count(self):
        spec = TwoLayerSpec(input_dim=5, width=12)
        assert spec.param_count == 1 + 12 * (5 + 2)

    @pytest.mark.parametrize("width,expected", [(10, 23), (25, 57), (50, 113)])
    def test_matched_widths_table(self, width, expected):
        assert matched_single_net_width(width) == expected

    def test_matched_width_fallback(self):
        assert matched_single_net_width(7) == math.ceil(math.sqrt(5) * 7)


class TestPackUnpack:
    def test_resnet_roundtrip(self, rng):
        spec = ResNetSpec(input_dim=3, width=6, blocks=2, output_dim=3)
        theta = rng.normal(size=spec.param_count)
        A, W, b, U = unpack_resnet(spec, theta)
        assert A.shape == (6, 3) and W.shape == (2, 6, 6)
        assert b.shape == (2, 6) and U.shape == (3, 6)
        assert np.array_equal(pack_resnet(spec, A, W, b, U), theta)

    def test_two_layer_roundtrip(self, rng):
        spec = TwoLayerSpec(input_dim=4, width=9)
        theta = rng.normal(size=spec.param_count)
        c, a, W, b = unpack_two_layer(spec, theta)
        assert np.isscalar(c) or np.ndim(c) == 0
        assert a.shape == (9,) and W.shape == (9, 4) and b.shape == (9,)
        assert np.array_equal(pack_two_layer(c, a, W, b), theta)

    def test_wrong_length_raises(self):
        spec = ResNetSpec(input_dim=2, width=4, blocks=1, output_dim=1)
        with pytest.raises(DimensionError):
            unpack_resnet(spec, np.zeros(spec.param_count + 1))

    def test_non_finite_raises(self):
        spec = ResNetSpec(input_dim=2, width=4, blocks=1, output_dim=1)
        theta = np.zeros(spec.param_count)
        theta[5] = np.nan
        with pytest.raises(NonFiniteError):
            unpack_resnet(spec, theta)


class TestInitialisation:
    def test_resnet_init_deterministic(self):
        spec = ResNetSpec(input_dim=2, width=10, blocks=10, output_dim=1)
        t1 = init_resnet(spec, np.random.default_rng(7))
        t2 = init_resnet(spec, np.random.default_rng(7))
        assert np.array_equal(t1, t2)

    def test_resnet_init_biases_zero_weights_bounded(self):
        spec = ResNetSpec(input_dim=2, width=10, blocks=3, output_dim=1)
        theta = init_resnet(spec, np.random.default_rng(0))
        A, W, b, U = unpack_resnet(spec, theta)
        assert np.all(b == 0.0)
        # Lift and head are plain Glorot; block matrices carry an extra
        # 1/sqrt(blocks) factor to keep power activations from exploding
        # through the residual stack.
        for arr, fan_in, fan_out, scale in (
            (A, 2, 10, 1.0),
            (W, 10, 10, 1.0 / math.sqrt(3)),
            (U, 10, 1, 1.0),
        ):
            bound = scale * math.sqrt(6.0 / (fan_in + fan_out))
            assert np.max(np.abs(arr)) <= bound

    def test_resnet_block_scale_shrinks_with_depth(self):
        shallow = ResNetSpec(input_dim=2, width=10, blocks=1, output_dim=1)
        deep = ResNetSpec(input_dim=2, width=10, blocks=16, output_dim=1)
        _, W1, _, _ = unpack_resnet(shallow, init_resnet(shallow, np.random.default_rng(3)))
        _, W16, _, _ = unpack_resnet(deep, init_resnet(deep, np.random.default_rng(3)))
        assert np.max(np.abs(W16)) <= math.sqrt(6.0 / 20) / 4.0
        assert np.max(np.abs(W1)) > math.sqrt(6.0 / 20) / 4.0

    def test_resnet_init_mean_near_zero(self):
        # Sample mean of uniform weights stays within three standard errors.
        spec = ResNetSpec(input_dim=5, width=40, blocks=5, output_dim=1)
        theta = init_resnet(spec, np.random.default_rng(11))
        _, W, _, _ = unpack_resnet(spec, theta)
        bound = math.sqrt(6.0 / 80) / math.sqrt(5)
        se = bound / math.sqrt(3 * W.size)
        assert abs(W.mean()) < 3 * se

    def test_two_layer_init_in_boxes(self):
        spec = TwoLayerSpec(input_dim=3, width=50, bound=2.0)
        theta = init_two_layer(spec, np.random.default_rng(4))
        c, a, W, b = unpack_two_layer(spec, theta)
        assert abs(c) <= 2 * spec.bound
        assert np.max(np.abs(a)) <= 8 * spec.bound
        assert np.max(np.linalg.norm(W, axis=1)) <= 1.0 + 1e-12
        assert np.max(np.abs(b)) <= 1.0


class TestProjection:
    @given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 50.0))
    @settings(max_examples=40, deadline=None)
    def test_projection_idempotent_and_feasible(self, seed, scale):
        spec = TwoLayerSpec(input_dim=3, width=8, bound=1.5)
        theta = scale * np.random.default_rng(seed).normal(size=spec.param_count)
        once = project_two_layer(spec, theta)
        twice = project_two_layer(spec, once)
        assert np.array_equal(once, twice)
        c, a, W, b = unpack_two_layer(spec, once)
        B = spec.bound
        assert abs(c) <= 2 * B + 1e-12
        assert np.max(np.abs(a)) <= 8 * B + 1e-12
        assert np.max(np.linalg.norm(W, axis=1)) <= 1.0 + 1e-12
        assert np.max(np.abs(b)) <= 1.0 + 1e-12

    def test_projection_keeps_feasible_points(self, rng):
        spec = TwoLayerSpec(input_dim=2, width=5, bound=1.0)
        theta = init_two_layer(spec, rng)
        assert np.array_equal(project_two_layer(spec, theta), theta)


class TestActivations:
    def test_requ_values_and_derivatives(self):
        z = np.array([-1.0, 0.0, 0.5, 2.0])
        assert np.array_equal(REQU.value(z), np.array([0.0, 0.0, 0.25, 4.0]))
        assert np.array_equal(REQU.d1(z), np.array([0.0, 0.0, 1.0, 4.0]))
        assert np.array_equal(REQU.d2(z), np.array([0.0, 0.0, 2.0, 2.0]))

    def test_recu_values_and_derivatives(self):
        z = np.array([-2.0, 0.0, 1.0, 3.0])
        assert np.array_equal(RECU.value(z), np.array([0.0, 0.0, 1.0, 27.0]))
        assert np.array_equal(RECU.d1(z), np.array([0.0, 0.0, 3.0, 27.0]))
        assert np.array_equal(RECU.d2(z), np.array([0.0, 0.0, 6.0, 18.0]))
        assert np.array_equal(RECU.d3(z), np.array([0.0, 0.0, 6.0, 6.0]))

    def test_relu_cannot_propagate_jets(self):
        assert not RELU.supports_jets()
        assert REQU.supports_jets() and RECU.supports_jets()

    def test_lookup(self):
        assert get_activation("requ") is REQU
        assert get_activation("recu") is RECU
        with pytest.raises(ValueError):
            get_activation("tanh")
