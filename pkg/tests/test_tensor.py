import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pnsnet.tensor import (
    DegenerateRowError,
    DimensionError,
    LinearWeights,
    SplitError,
    as_tensor,
    channel_split,
    concat_channels,
    layer_norm_temporal,
    layer_norm_temporal_backward,
    linear_embed,
    rowwise_max,
    softmax_rows,
)

finite = st.floats(-50, 50, allow_nan=False, width=64)


class TestAsTensor:
    def test_rank_bounds(self):
        assert as_tensor(np.ones(3)).shape == (3,)
        with pytest.raises(DimensionError):
            as_tensor(np.float64(1.0))
        with pytest.raises(DimensionError):
            as_tensor(np.ones((1,) * 6))

    def test_zero_extent(self):
        with pytest.raises(DimensionError):
            as_tensor(np.ones((2, 0)))

    def test_row_major(self):
        t = as_tensor(np.arange(24.0).reshape(2, 3, 4))
        assert t.flags.c_contiguous
        assert t.strides == (96, 32, 8)
        assert t[1, 2, 3] == 1 * 12 + 2 * 4 + 3


class TestLinearEmbed:
    def test_identity_weights(self):
        w = LinearWeights(np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(linear_embed(np.ones((1, 1, 1, 2)), w), np.ones((1, 1, 1, 2)))

    def test_hand_sum(self):
        w = LinearWeights(np.array([[1.0], [1.0]]), np.array([0.5]))
        out = linear_embed(np.array([1.0, 2.0]).reshape(1, 1, 1, 2), w)
        assert out.reshape(-1).tolist() == [3.5]

    def test_zero_weight_gives_bias(self, rng):
        b = rng.normal(size=5)
        out = linear_embed(rng.normal(size=(2, 3, 3, 4)), LinearWeights(np.zeros((4, 5)), b))
        np.testing.assert_array_equal(out, np.broadcast_to(b, (2, 3, 3, 5)))

    def test_shape_mismatch_names_shapes(self, rng):
        w = LinearWeights(np.zeros((3, 2)), np.zeros(2))
        with pytest.raises(DimensionError, match=r"\(1, 2, 2, 4\).*\(3, 2\)|\(3, 2\).*\(1, 2, 2, 4\)"):
            linear_embed(np.zeros((1, 2, 2, 4)), w)

    def test_uniform_init_range(self, rng):
        w = LinearWeights.uniform(16, 8, rng)
        assert np.all(np.abs(w.weight) <= 0.25)
        assert np.all(w.bias == 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_linear_in_input(self, seed):
        r = np.random.default_rng(seed)
        w = LinearWeights(r.normal(size=(3, 4)), np.zeros(4))
        a, b = r.normal(size=(2, 2, 2, 3)), r.normal(size=(2, 2, 2, 3))
        np.testing.assert_allclose(linear_embed(a + 2 * b, w),
                                   linear_embed(a, w) + 2 * linear_embed(b, w), atol=1e-12)


class TestSplitConcat:
    def test_four_groups(self, rng):
        parts = channel_split(rng.normal(size=(1, 2, 2, 32)), 4)
        assert [p.shape[-1] for p in parts] == [8] * 4

    def test_single_group(self, rng):
        X = rng.normal(size=(1, 2, 2, 8))
        parts = channel_split(X, 1)
        assert len(parts) == 1
        np.testing.assert_array_equal(parts[0], X)

    def test_non_divisible(self):
        with pytest.raises(SplitError):
            channel_split(np.zeros((1, 1, 1, 6)), 4)

    def test_round_trip_bitwise(self, rng):
        X = rng.normal(size=(2, 4, 4, 8))
        assert np.array_equal(concat_channels(channel_split(X, 4)), X)

    def test_group_channel_ranges(self):
        X = np.arange(12.0).reshape(1, 1, 1, 12)
        parts = channel_split(X, 3)
        assert parts[1].reshape(-1).tolist() == [4, 5, 6, 7]

    def test_concat_two(self):
        out = concat_channels([np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]])])
        assert out.tolist() == [[1, 2, 3, 4]]

    def test_concat_mismatch(self):
        with pytest.raises(DimensionError):
            concat_channels([np.zeros((1, 2)), np.zeros((2, 2))])


class TestLayerNormTemporal:
    def test_constant_in_time(self):
        Q = np.broadcast_to(np.arange(6.0).reshape(1, 1, 2, 3), (4, 1, 2, 3))
        assert np.all(layer_norm_temporal(Q) == 0)

    def test_two_frames_no_eps(self):
        Q = np.array([1.0, -1.0]).reshape(2, 1, 1, 1)
        assert layer_norm_temporal(Q, eps=0).reshape(-1).tolist() == [1.0, -1.0]

    def test_single_frame(self, rng):
        assert np.all(layer_norm_temporal(rng.normal(size=(1, 3, 3, 2))) == 0)

    def test_biased_variance(self):
        Q = np.array([0.0, 1.0, 2.0]).reshape(3, 1, 1, 1)
        out = layer_norm_temporal(Q, eps=0).reshape(-1)
        np.testing.assert_allclose(out, [-np.sqrt(1.5), 0, np.sqrt(1.5)])

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (4, 2, 2, 3), elements=finite))
    def test_zero_mean_unit_var(self, Q):
        out = layer_norm_temporal(Q)
        np.testing.assert_allclose(out.mean(axis=0), 0, atol=1e-9)
        assert np.all(out.var(axis=0) <= 1 + 1e-9)

    def test_backward_kills_constant_direction(self, rng):
        Q = rng.normal(size=(5, 2, 2, 3))
        g = np.broadcast_to(rng.normal(size=(1, 2, 2, 3)), Q.shape)
        np.testing.assert_allclose(layer_norm_temporal_backward(Q, g), 0, atol=1e-12)


class TestSoftmaxRows:
    def test_symmetric(self):
        assert softmax_rows(np.zeros((1, 2))).tolist() == [[0.5, 0.5]]

    def test_large_logits(self):
        np.testing.assert_allclose(softmax_rows(np.full((1, 3), 1000.0)), 1 / 3)

    def test_masked(self):
        out = softmax_rows(np.zeros((1, 3)), np.array([True, True, False]))
        assert out.tolist() == [[0.5, 0.5, 0.0]]

    def test_fully_masked_row(self):
        mask = np.array([[True, False], [False, False]])
        with pytest.raises(DegenerateRowError):
            softmax_rows(np.zeros((2, 2)), mask)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (3, 7), elements=finite), st.floats(-100, 100))
    def test_rows_sum_and_shift(self, M, c):
        A = softmax_rows(M)
        np.testing.assert_allclose(A.sum(axis=1), 1, atol=1e-12)
        np.testing.assert_allclose(softmax_rows(M + c), A, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (4, 6), elements=finite), arrays(bool, (4, 6)))
    def test_masked_entries_exact_zero(self, M, mask):
        mask[:, 0] = True
        A = softmax_rows(M, mask)
        assert np.all(A[~mask] == 0)
        np.testing.assert_allclose(A.sum(axis=1), 1, atol=1e-12)


class TestRowwiseMax:
    def test_examples(self):
        out = rowwise_max(np.array([[0.1, 0.7, 0.2], [0.3, 0.3, 0.3]]))
        assert out.shape == (2, 1)
        assert out[:, 0].tolist() == [0.7, 0.3]

    def test_softmax_range(self, rng):
        m = rowwise_max(softmax_rows(rng.normal(size=(20, 9))))
        assert np.all((m > 0) & (m <= 1))
