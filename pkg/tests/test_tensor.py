import numpy as np
import pytest

from dyadkit.neural import tensor as T
from dyadkit.neural.tensor import Tensor


def finite_difference(build, arrays, seed_grad, h=1e-6):
    """Central-difference gradients of sum(build(arrays) * seed_grad)."""
    grads = []
    for target in arrays:
        grad = np.zeros_like(target)
        flat = target.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = float((build(*[Tensor(a) for a in arrays]).data * seed_grad).sum())
            flat[idx] = orig - h
            lo = float((build(*[Tensor(a) for a in arrays]).data * seed_grad).sum())
            flat[idx] = orig
            gflat[idx] = (up - lo) / (2 * h)
        grads.append(grad)
    return grads


def check_op(build, *shapes, rng=None):
    rng = rng or np.random.default_rng(99)
    arrays = [rng.standard_normal(s) for s in shapes]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = build(*tensors)
    seed_grad = rng.standard_normal(out.shape)
    out.backward(seed_grad)
    expected = finite_difference(build, arrays, seed_grad)
    for tensor, want in zip(tensors, expected):
        np.testing.assert_allclose(tensor.grad, want, rtol=1e-5, atol=1e-7)


class TestElementwise:
    def test_add_broadcast(self):
        check_op(lambda a, b: a + b, (3, 4), (4,))

    def test_mul_broadcast(self):
        check_op(lambda a, b: a * b, (2, 3, 4), (3, 1))

    def test_sub_and_div(self):
        check_op(lambda a, b: (a - b) / (b * b + 2.0), (3, 3), (3, 3))

    def test_scalar_arithmetic(self):
        check_op(lambda a: 2.0 * a + 1.0 - a / 4.0, (5,))

    def test_power(self):
        check_op(lambda a: T.power(a, 3.0), (4, 2))

    def test_activations(self):
        check_op(T.tanh, (3, 5))
        check_op(T.sigmoid, (3, 5))
        check_op(lambda a: T.exp(a * 0.5), (3, 5))
        check_op(lambda a: T.log(a * a + 1.0), (3, 5))
        check_op(T.relu, (7, 7))

    def test_softmax_rows_sum_to_one(self):
        x = Tensor(np.random.default_rng(0).standard_normal((5, 9)) * 50)
        out = T.softmax(x, axis=-1)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_gradient(self):
        check_op(lambda a: T.softmax(a, axis=-1), (4, 6))
        check_op(lambda a: T.log_softmax(a, axis=1), (4, 6))

    def test_softmax_is_shift_invariant(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 12))
        a = T.softmax(Tensor(x), axis=-1).data
        b = T.softmax(Tensor(x + 123.456), axis=-1).data
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestLinearAlgebra:
    def test_matmul(self):
        check_op(lambda a, b: a @ b, (4, 5), (5, 3))

    def test_matmul_batched(self):
        check_op(lambda a, b: a @ b, (2, 3, 4, 5), (5, 6))

    def test_matmul_broadcast_batch(self):
        check_op(lambda a, b: a @ b, (2, 1, 4, 5), (3, 5, 6))


class TestShapeOps:
    def test_reshape_transpose(self):
        check_op(lambda a: T.transpose(T.reshape(a, (4, 6)), (1, 0)), (2, 12))

    def test_transpose_axes(self):
        check_op(lambda a: T.transpose(a, (2, 0, 1)), (3, 4, 2))

    def test_slicing(self):
        check_op(lambda a: a[:, 1:4], (3, 6))
        check_op(lambda a: a[:, ::-1], (3, 6))

    def test_gather_with_repeats(self):
        idx = np.array([0, 2, 2, 1])
        check_op(lambda a: a[idx], (3, 4))

    def test_concat(self):
        check_op(lambda a, b: T.concat([a, b], axis=1), (3, 2), (3, 4))

    def test_reductions(self):
        check_op(lambda a: T.reduce_sum(a), (3, 4))
        check_op(lambda a: T.reduce_sum(a, 1, True), (3, 4, 2))
        check_op(lambda a: T.reduce_mean(a, (0, 2)), (3, 4, 2))
        check_op(lambda a: a.mean(axis=1), (3, 4))


class TestConvolution:
    def test_conv2d_same_padding(self):
        check_op(lambda x, w, b: T.conv2d(x, w, b, (1, 1)), (2, 3, 5, 6), (4, 3, 3, 3), (4,))

    def test_conv2d_tall_kernel(self):
        check_op(lambda x, w, b: T.conv2d(x, w, b, (4, 0)), (1, 2, 10, 4), (3, 2, 9, 1), (3,))

    def test_conv1d(self):
        check_op(lambda x, w, b: T.conv1d(x, w, b, 2), (2, 3, 9), (4, 3, 5), (4,))

    def test_maxpool2d(self):
        check_op(lambda x: T.maxpool2d(x, 2), (2, 3, 6, 8))

    def test_maxpool_drops_ragged_edge(self):
        x = Tensor(np.arange(2 * 1 * 5 * 5, dtype=np.float64).reshape(2, 1, 5, 5))
        out = T.maxpool2d(x, 2)
        assert out.shape == (2, 1, 2, 2)


class TestEngineBehavior:
    def test_gradients_accumulate_across_uses(self):
        a = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        out = (a * a + a).sum()  # d/da = 2a + 1
        out.backward()
        np.testing.assert_allclose(a.grad, [5.0, 7.0])

    def test_deep_graph_does_not_hit_recursion_limit(self):
        a = Tensor(np.ones(4) * 1.0001, requires_grad=True)
        x = a
        for _ in range(5000):
            x = x * 1.0
        x.sum().backward()
        np.testing.assert_allclose(a.grad, np.ones(4))

    def test_no_grad_tracking_without_requires_grad(self):
        a = Tensor(np.ones(3))
        out = (a * 2.0).sum()
        out.backward()
        assert a.grad is None

    def test_float32_mode_keeps_dtype(self):
        a = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
        b = Tensor(np.ones((2, 2), dtype=np.float32))
        out = T.relu(a @ b + 1.0)
        assert out.dtype == np.float32
        out.backward(np.ones((2, 2), dtype=np.float32))
        assert a.grad.dtype == np.float32

    def test_detach_cuts_graph(self):
        a = Tensor(np.ones(3), requires_grad=True)
        out = (a.detach() * 2.0).sum()
        out.backward()
        assert a.grad is None
