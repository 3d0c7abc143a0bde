import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphtag import tensor as T
from helpers import max_rel_error, numeric_grad

RNG = np.random.default_rng(20240817)


def _gradcheck(build, arrays, tol=1e-5):
    """build(tensors...) -> scalar Tensor; checks every input's gradient."""
    tensors = [T.Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(*tensors)
    T.backward(loss)
    for i in range(len(arrays)):
        def f(x, i=i):
            args = [T.Tensor(arrays[j].copy() if j != i else x, requires_grad=False)
                    for j in range(len(arrays))]
            return float(build(*args).data)

        numeric = numeric_grad(f, arrays[i].copy())
        err = max_rel_error(tensors[i].grad, numeric)
        assert err < tol, f"input {i}: worst relative error {err}"


def _proj(out, seed=0):
    r = np.random.default_rng(seed).normal(size=out.shape)
    return T.tsum(T.mul(out, T.constant(r)))


class TestForwardValues:
    def test_softmax_uniform(self):
        out = T.softmax(T.constant(np.zeros(3)), axis=-1)
        np.testing.assert_allclose(out.data, [1 / 3] * 3)

    def test_softmax_sums_to_one(self):
        x = T.constant(RNG.normal(size=(4, 7)))
        out = T.softmax(x, axis=-1).data
        assert (out >= 0).all()
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)

    def test_matmul_identity(self):
        a = RNG.normal(size=(3, 3))
        out = T.matmul(T.constant(np.eye(3)), T.constant(a))
        np.testing.assert_allclose(out.data, a)

    def test_cross_entropy_uniform_logits(self):
        for k in (2, 5, 11):
            logits = T.constant(np.zeros((4, k)))
            out = T.cross_entropy(logits, np.array([0, 1, k - 1, 0]))
            np.testing.assert_allclose(out.data, math.log(k), rtol=1e-12)

    def test_layer_norm_normalizes(self):
        x = T.constant(RNG.normal(size=(10, 16)))
        out = T.layer_norm(x, T.ones(16), T.zeros(16)).data
        assert np.abs(out.mean(axis=-1)).max() < 1e-6
        assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-4

    def test_masked_fill_values(self):
        x = T.constant(np.arange(6, dtype=np.float64).reshape(2, 3))
        mask = np.array([[True, False, False], [False, False, True]])
        out = T.masked_fill(x, mask, -9.0)
        np.testing.assert_allclose(out.data, [[-9, 1, 2], [3, 4, -9]])

    def test_scale(self):
        x = T.constant(np.array([1.0, -2.0]))
        np.testing.assert_allclose(T.scale(x, -1.5).data, [-1.5, 3.0])


class TestShapeErrors:
    def test_matmul_mismatch_names_op(self):
        with pytest.raises(T.ShapeError, match="matmul"):
            T.matmul(T.zeros((2, 3)), T.zeros((4, 5)))

    def test_add_mismatch_names_op(self):
        with pytest.raises(T.ShapeError, match="add"):
            T.add(T.zeros((2, 3)), T.zeros((4,)))

    def test_layer_norm_gain_mismatch(self):
        with pytest.raises(T.ShapeError, match="layer_norm"):
            T.layer_norm(T.zeros((2, 4)), T.ones(3), T.zeros(4))

    def test_backward_requires_scalar(self):
        x = T.Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            T.backward(T.mul(x, x))

    def test_embedding_ids_out_of_range(self):
        with pytest.raises(IndexError):
            T.embedding_lookup(T.zeros((4, 2)), np.array([0, 4]))

    def test_cross_entropy_target_out_of_range(self):
        with pytest.raises(IndexError):
            T.cross_entropy(T.zeros((2, 3)), np.array([0, 3]))


class TestAutodiffBasics:
    def test_square_derivative(self, float64_mode):
        x = T.Tensor(np.array(3.0), requires_grad=True)
        y = T.mul(x, x)
        T.backward(y)
        np.testing.assert_allclose(x.grad, 6.0)

    def test_fanout_accumulates(self, float64_mode):
        x = T.Tensor(np.array(5.0), requires_grad=True)
        z = T.add(x, x)
        T.backward(z)
        np.testing.assert_allclose(x.grad, 2.0)


@pytest.mark.usefixtures("float64_mode")
class TestGradients:
    def test_matmul(self):
        a, b = RNG.normal(size=(3, 4)), RNG.normal(size=(4, 5))
        _gradcheck(lambda x, y: _proj(T.matmul(x, y)), [a, b])

    def test_matmul_broadcast_weight(self):
        a, b = RNG.normal(size=(2, 3, 4)), RNG.normal(size=(4, 5))
        _gradcheck(lambda x, y: _proj(T.matmul(x, y)), [a, b])

    def test_matmul_batched(self):
        a, b = RNG.normal(size=(2, 2, 3)), RNG.normal(size=(2, 3, 2))
        _gradcheck(lambda x, y: _proj(T.matmul(x, y)), [a, b])

    def test_add_broadcast(self):
        a, b = RNG.normal(size=(3, 4)), RNG.normal(size=(4,))
        _gradcheck(lambda x, y: _proj(T.add(x, y)), [a, b])

    def test_mul_broadcast(self):
        a, b = RNG.normal(size=(2, 1, 4)), RNG.normal(size=(3, 1))
        _gradcheck(lambda x, y: _proj(T.mul(x, y)), [a, b])

    def test_scale(self):
        a = RNG.normal(size=(3, 3))
        _gradcheck(lambda x: _proj(T.scale(x, -1.7)), [a])

    def test_softmax_last_axis(self):
        a = RNG.normal(size=(3, 5))
        _gradcheck(lambda x: _proj(T.softmax(x, axis=-1)), [a])

    def test_softmax_first_axis(self):
        a = RNG.normal(size=(4, 3))
        _gradcheck(lambda x: _proj(T.softmax(x, axis=0)), [a])

    def test_layer_norm(self):
        x, g, b = RNG.normal(size=(4, 6)), RNG.normal(size=6), RNG.normal(size=6)
        _gradcheck(lambda a, c, d: _proj(T.layer_norm(a, c, d)), [x, g, b], tol=1e-5)

    def test_relu_away_from_kink(self):
        a = RNG.normal(size=(4, 4))
        a = np.where(np.abs(a) < 0.1, a + 0.3, a)
        _gradcheck(lambda x: _proj(T.relu(x)), [a])

    def test_embedding_lookup_with_repeats(self):
        table = RNG.normal(size=(7, 4))
        ids = np.array([[0, 3, 3], [6, 0, 1]])
        _gradcheck(lambda t: _proj(T.embedding_lookup(t, ids)), [table])

    def test_concat(self):
        a, b, c = RNG.normal(size=(2, 3)), RNG.normal(size=(2, 2)), RNG.normal(size=(2, 4))
        _gradcheck(lambda x, y, z: _proj(T.concat([x, y, z], axis=1)), [a, b, c])

    def test_reshape(self):
        a = RNG.normal(size=(2, 6))
        _gradcheck(lambda x: _proj(T.reshape(x, (3, 4))), [a])

    def test_transpose_default(self):
        a = RNG.normal(size=(2, 3, 4))
        _gradcheck(lambda x: _proj(T.transpose(x)), [a])

    def test_transpose_inner_axes(self):
        a = RNG.normal(size=(2, 3, 4, 5))
        _gradcheck(lambda x: _proj(T.transpose(x, -3, -2)), [a])

    def test_masked_fill(self):
        # moderate fill value: with -1e9 the projected loss is ~1e9 and
        # central differences of O(1) perturbations drown in cancellation
        a = RNG.normal(size=(3, 4))
        mask = RNG.random((3, 4)) < 0.4
        _gradcheck(lambda x: _proj(T.masked_fill(x, mask, -3.0)), [a])

    def test_masked_fill_blocks_gradient(self):
        a = T.Tensor(RNG.normal(size=(2, 3)), requires_grad=True)
        mask = np.array([[True, False, False], [False, True, False]])
        T.backward(T.tsum(T.masked_fill(a, mask, -1e9)))
        np.testing.assert_array_equal(a.grad, (~mask).astype(a.data.dtype))

    def test_sum_all(self):
        a = RNG.normal(size=(3, 4))
        _gradcheck(lambda x: T.tsum(x), [a])

    def test_sum_axis_keepdims(self):
        a = RNG.normal(size=(3, 4, 2))
        _gradcheck(lambda x: _proj(T.tsum(x, axis=1, keepdims=True)), [a])

    def test_cross_entropy(self):
        logits = RNG.normal(size=(5, 7))
        targets = RNG.integers(0, 7, size=5)
        _gradcheck(lambda x: _proj(T.cross_entropy(x, targets), seed=3), [logits])


class TestBroadcastSemantics:
    @given(
        rows=st.integers(1, 4),
        cols=st.integers(1, 4),
        data=st.data(),
    )
    @settings(max_examples=30, deadline=None)
    def test_add_matches_tiling(self, rows, cols, data):
        a = np.array(
            data.draw(st.lists(st.floats(-5, 5), min_size=rows * cols, max_size=rows * cols))
        ).reshape(rows, cols)
        b = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=cols, max_size=cols)))
        out = T.add(T.constant(a), T.constant(b)).data
        np.testing.assert_allclose(out, a + np.tile(b, (rows, 1)))

    @given(rows=st.integers(1, 4), cols=st.integers(1, 4), data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_mul_matches_tiling(self, rows, cols, data):
        a = np.array(
            data.draw(st.lists(st.floats(-5, 5), min_size=rows * cols, max_size=rows * cols))
        ).reshape(rows, cols)
        b = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=rows, max_size=rows)))
        out = T.mul(T.constant(a), T.constant(b.reshape(-1, 1))).data
        np.testing.assert_allclose(out, a * np.tile(b.reshape(-1, 1), (1, cols)))


class TestRandom:
    def test_same_seed_identical(self):
        a = T.rng_normal((3, 4), seed=11, std=0.5)
        b = T.rng_normal((3, 4), seed=11, std=0.5)
        np.testing.assert_array_equal(a.data, b.data)

    def test_different_seed_differs(self):
        a = T.rng_normal((3, 4), seed=11, std=0.5)
        b = T.rng_normal((3, 4), seed=12, std=0.5)
        assert not np.array_equal(a.data, b.data)

    def test_moment_statistics(self):
        sample = T.rng_normal((1_000_000,), seed=7, std=2.0).data
        assert abs(sample.std() / 2.0 - 1.0) < 0.01
        assert abs(sample.mean()) < 0.01 * 2.0

    def test_requires_positive_std(self):
        with pytest.raises(ValueError):
            T.rng_normal((2,), seed=0, std=0.0)

    def test_zeros_ones(self):
        assert T.zeros((2, 3)).data.sum() == 0
        assert T.ones((2, 3)).data.sum() == 6
