import numpy as np
import pytest

from pnsnet.gradcheck import dense_attention_oracle, random_ns_params
from pnsnet.ns_block import (
    NsParams,
    aggregate,
    dilations,
    load_ns_params,
    ns_forward,
    ns_forward_cached,
    relevance,
    sample_neighborhood,
    save_ns_params,
    soft_attention_map,
)
from pnsnet.tensor import DimensionError, LinearWeights, SplitError, softmax_rows


def brute_sample(F, k, d):
    """Slot-by-slot gather, straight from the (t, jy, jx) enumeration."""
    T, H, W, C = F.shape
    S = T * (2 * k + 1) ** 2
    vals = np.zeros((H * W, S, C))
    valid = np.zeros((H * W, S), bool)
    for y in range(H):
        for x in range(W):
            j = 0
            for t in range(T):
                for jy in range(-k, k + 1):
                    for jx in range(-k, k + 1):
                        yy, xx = y + jy * d, x + jx * d
                        if 0 <= yy < H and 0 <= xx < W:
                            vals[y * W + x, j] = F[t, yy, xx]
                            valid[y * W + x, j] = True
                        j += 1
    return vals, valid


class TestSampling:
    def test_slot_count(self, rng):
        s = sample_neighborhood(rng.normal(size=(5, 8, 8, 2)), 3, 1)
        assert s.slots == 245
        assert s.values.shape == (64, 245, 2)

    def test_dilations(self):
        assert dilations(4) == [1, 3, 5, 7]
        assert dilations(1) == [1]

    def test_single_pixel_only_center_valid(self):
        s = sample_neighborhood(np.ones((1, 1, 1, 1)), 1, 1)
        assert s.slots == 9
        assert s.valid.sum() == 1 and s.valid[0, 4]

    @pytest.mark.parametrize("k,d", [(1, 1), (1, 3), (2, 2), (3, 5)])
    def test_matches_brute_force(self, rng, k, d):
        F = rng.normal(size=(2, 5, 6, 3))
        vals, valid = brute_sample(F, k, d)
        s = sample_neighborhood(F, k, d)
        assert np.array_equal(s.valid, valid)
        assert np.array_equal(s.values[valid], vals[valid])
        assert np.all(s.values[~valid] == 0)

    def test_bad_kernel(self, rng):
        with pytest.raises(ValueError):
            sample_neighborhood(rng.normal(size=(1, 2, 2, 1)), 0, 1)


class TestRelevance:
    def test_rows_sum_to_one_and_mask(self, rng):
        Qh = rng.normal(size=(3, 5, 4, 4))
        keys = sample_neighborhood(rng.normal(size=Qh.shape), 2, 3)
        A = relevance(Qh, keys, 4)
        assert A.shape == (3 * 20, keys.slots)
        np.testing.assert_allclose(A.sum(axis=1), 1, atol=1e-12)
        invalid = ~np.tile(keys.valid, (3, 1))
        assert np.all(A[invalid] == 0)

    def test_zero_queries_uniform(self, rng):
        keys = sample_neighborhood(rng.normal(size=(2, 3, 3, 2)), 1, 1)
        A = relevance(np.zeros((2, 3, 3, 2)), keys, 2)
        valid = np.tile(keys.valid, (2, 1))
        expected = valid / valid.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(A, expected, atol=1e-15)

    def test_logits_scaled_by_width(self):
        Qh = np.array([[[[1.0, 1.0]]], [[[-1.0, -1.0]]]])  # [2,1,1,2]
        keys = sample_neighborhood(Qh, 1, 1)
        A = relevance(Qh, keys, 2)
        # slot 4 is frame 0 centre, slot 13 is frame 1 centre
        z = 2.0 / np.sqrt(2.0)
        np.testing.assert_allclose(A[0, [4, 13]], softmax_rows(np.array([[z, -z]]))[0])

    def test_position_mismatch(self, rng):
        keys = sample_neighborhood(rng.normal(size=(1, 2, 2, 2)), 1, 1)
        with pytest.raises(DimensionError):
            relevance(rng.normal(size=(1, 3, 3, 2)), keys, 2)


class TestAggregate:
    def _setup(self, rng):
        V = rng.normal(size=(2, 3, 3, 2))
        return V, sample_neighborhood(V, 1, 1)

    def test_one_hot_selects(self, rng):
        V, vals = self._setup(rng)
        aff = np.zeros((18, vals.slots))
        aff[:, 13] = 1.0  # frame 1, centre
        out = aggregate(aff, vals)
        np.testing.assert_array_equal(out[:9], V[1].reshape(9, 2))
        np.testing.assert_array_equal(out[9:], V[1].reshape(9, 2))

    def test_constant_values(self, rng):
        V = np.broadcast_to(np.array([2.0, -1.0]), (2, 3, 3, 2)).copy()
        vals = sample_neighborhood(V, 1, 1)
        aff = softmax_rows(rng.normal(size=(18, vals.slots)), np.tile(vals.valid, (2, 1)))
        np.testing.assert_allclose(aggregate(aff, vals), np.broadcast_to([2.0, -1.0], (18, 2)))

    def test_average_of_two(self, rng):
        V, vals = self._setup(rng)
        aff = np.zeros((18, vals.slots))
        aff[:, 4] = aff[:, 13] = 0.5
        np.testing.assert_allclose(aggregate(aff, vals)[:9], (V[0] + V[1]).reshape(9, 2) / 2)

    def test_mismatch(self, rng):
        _, vals = self._setup(rng)
        with pytest.raises(DimensionError):
            aggregate(np.zeros((18, 5)), vals)


class TestSoftAttention:
    def test_one_hot(self):
        A = np.eye(4)[[0, 2, 1]]
        assert soft_attention_map([A]).reshape(-1).tolist() == [1.0, 1.0, 1.0]

    def test_uniform(self):
        assert np.all(soft_attention_map([np.full((3, 5), 0.2)]) == 0.2)

    def test_column_count(self, rng):
        T, k, N = 5, 3, 4
        groups = [softmax_rows(rng.normal(size=(T * 4, T * (2 * k + 1) ** 2))) for _ in range(N)]
        stacked = np.concatenate(groups, axis=1)
        assert stacked.shape[1] == 980
        np.testing.assert_array_equal(soft_attention_map(groups), stacked.max(axis=1, keepdims=True))

    def test_empty(self):
        with pytest.raises(ValueError):
            soft_attention_map([])


class TestNsForward:
    def test_zero_wt_identity_bitwise(self, rng):
        p = NsParams.init(8, 2, 2, rng, np.float64)
        X = rng.normal(size=(3, 5, 6, 8))
        assert np.array_equal(ns_forward(X, p), X)

    def test_default_shape(self, rng):
        p = random_ns_params(rng, 32, 4, 3).astype(np.float32)
        X = rng.normal(size=(5, 32, 56, 32)).astype(np.float32)
        Z = ns_forward(X, p)
        assert Z.shape == (5, 32, 56, 32) and Z.dtype == np.float32
        assert np.all(np.isfinite(Z))

    def test_full_window_matches_oracle(self, rng):
        p = random_ns_params(rng, 8, 1, 4)
        X = rng.normal(size=(2, 4, 4, 8))
        Z, D = ns_forward(X, p), dense_attention_oracle(X, p)
        assert np.max(np.abs(Z - D) / np.maximum(np.abs(D), 1e-6)) <= 1e-5

    def test_soft_attention_off(self, rng):
        p = random_ns_params(rng, 4, 1, 1)
        p.soft_attention = False
        X = rng.normal(size=(2, 3, 3, 4))
        Z, cache = ns_forward_cached(X, p)
        assert np.all(cache.MS == 1)
        np.testing.assert_allclose(Z, X + (cache.MT @ p.w_t.weight + p.w_t.bias).reshape(X.shape))

    def test_interior_translation(self, rng):
        """Away from the borders, shifting the input shifts the output."""
        p = random_ns_params(rng, 4, 1, 1)
        X = rng.normal(size=(2, 9, 9, 4))
        shifted = np.roll(X, 1, axis=2)
        a = ns_forward(X, p)[:, 2:7, 2:7]
        b = ns_forward(shifted, p)[:, 2:7, 3:8]
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_channel_mismatch(self, rng):
        p = random_ns_params(rng, 4, 1, 1)
        with pytest.raises(DimensionError):
            ns_forward(rng.normal(size=(2, 3, 3, 6)), p)

    def test_params_validation(self):
        w = LinearWeights.zeros(6, 6)
        with pytest.raises(SplitError):
            NsParams(w, w, w, w, 4, 1)
        with pytest.raises(DimensionError):
            NsParams(w, w, LinearWeights.zeros(6, 4), w, 1, 1)

    def test_save_load(self, tmp_path, rng):
        p = random_ns_params(rng, 8, 2, 2)
        save_ns_params(tmp_path, p)
        q = load_ns_params(tmp_path)
        assert (q.groups, q.kernel) == (2, 2)
        for name, arr in p.arrays().items():
            assert np.array_equal(q.arrays()[name], arr)
