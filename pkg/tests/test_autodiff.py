import math

import numpy as np
import pytest

from gaitfuse import autodiff as ad
from gaitfuse.autodiff import (
    AdamState,
    Parameter,
    Tape,
    Tensor,
    adam_step,
    add,
    affine,
    backward,
    concat,
    conv2d,
    dropout,
    global_avg_pool,
    hadamard,
    relu,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    ssum,
)
from gaitfuse.errors import DataError

from gradcheck import check_gradients


def conv2d_loop_oracle(x, kernel, stride, padding):
    """Direct nested-loop cross-correlation."""
    n, c_in, h, w = x.shape
    c_out, _, k, _ = kernel.shape
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (w + 2 * padding - k) // stride + 1
    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((n, c_out, out_h, out_w))
    for b in range(n):
        for co in range(c_out):
            for oy in range(out_h):
                for ox in range(out_w):
                    acc = 0.0
                    for ci in range(c_in):
                        for ky in range(k):
                            for kx in range(k):
                                acc += (padded[b, ci, oy * stride + ky, ox * stride + kx]
                                        * kernel[co, ci, ky, kx])
                    out[b, co, oy, ox] = acc
    return out


class TestAffine:
    def test_identity(self):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
        y = affine(x, Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(y.values, x.values)

    def test_zero_input_gives_bias(self):
        b = np.array([1.0, -2.0])
        y = affine(Tensor(np.zeros((3, 5))), Tensor(np.zeros((5, 2))), Tensor(b))
        np.testing.assert_array_equal(y.values, np.tile(b, (3, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            affine(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))), Tensor(np.zeros(2)))

    def test_gradients(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        W = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
        b = Tensor(rng.normal(size=5), requires_grad=True)
        check_gradients(lambda: ssum(affine(x, W, b)), [x, W, b], rng=rng)


class TestConv2d:
    def test_one_by_one_identity(self):
        x = Tensor(np.random.default_rng(2).normal(size=(1, 3, 4, 4)))
        kernel = Tensor(np.eye(3).reshape(3, 3, 1, 1))
        y = conv2d(x, kernel, stride=1, padding=0)
        np.testing.assert_allclose(y.values, x.values, atol=1e-15)

    def test_ones_kernel_sums(self):
        y = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))),
                   stride=1, padding=0)
        assert y.values.shape == (1, 1, 1, 1)
        assert y.values[0, 0, 0, 0] == 9.0

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (2, 3)])
    def test_loop_oracle(self, stride, padding):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 3, 6, 5))
        kernel = rng.normal(size=(4, 3, 3, 3))
        y = conv2d(Tensor(x), Tensor(kernel), stride=stride, padding=padding)
        expected = conv2d_loop_oracle(x, kernel, stride, padding)
        np.testing.assert_allclose(y.values, expected, atol=1e-10)

    def test_kernel_larger_than_padded_input(self):
        with pytest.raises(DataError, match="larger than"):
            conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 5, 5))),
                   stride=1, padding=1)

    @pytest.mark.parametrize("stride,padding", [(1, 1), (2, 1)])
    def test_gradients(self, stride, padding):
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(2, 2, 5, 4)), requires_grad=True)
        kernel = Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True)
        check_gradients(
            lambda: ssum(conv2d(x, kernel, stride=stride, padding=padding)),
            [x, kernel], rng=rng,
        )


class TestElementwise:
    def test_relu_values(self):
        y = relu(Tensor(np.array([-1.0, 0.0, 2.0])))
        np.testing.assert_array_equal(y.values, [0.0, 0.0, 2.0])

    def test_relu_gradient(self):
        rng = np.random.default_rng(5)
        values = rng.normal(size=(4, 4))
        values[np.abs(values) < 0.1] += 0.3  # keep away from the kink
        x = Tensor(values, requires_grad=True)
        check_gradients(lambda: ssum(relu(x)), [x], rng=rng)

    def test_sigmoid_values(self):
        y = sigmoid(Tensor(np.array([0.0, 700.0, -700.0])))
        assert y.values[0] == 0.5
        assert y.values[1] == pytest.approx(1.0)
        assert y.values[2] == pytest.approx(0.0)
        assert np.all(np.isfinite(y.values))

    def test_sigmoid_gradient(self):
        rng = np.random.default_rng(6)
        x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        check_gradients(lambda: ssum(sigmoid(x)), [x], rng=rng)

    def test_add_broadcast_gradient(self):
        rng = np.random.default_rng(7)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(1, 4)), requires_grad=True)
        check_gradients(lambda: ssum(add(a, b)), [a, b], rng=rng)


class TestHadamard:
    def test_same_shape(self):
        rng = np.random.default_rng(8)
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
        np.testing.assert_array_equal(hadamard(Tensor(a), Tensor(b)).values, a * b)

    def test_channel_broadcast(self):
        rng = np.random.default_rng(9)
        maps = rng.normal(size=(2, 3, 4, 5))
        weights = rng.normal(size=(2, 3))
        y = hadamard(Tensor(maps), Tensor(weights))
        np.testing.assert_array_equal(y.values, maps * weights[:, :, None, None])

    def test_mismatch(self):
        with pytest.raises(DataError):
            hadamard(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))))

    def test_gradients_broadcast(self):
        rng = np.random.default_rng(10)
        maps = Tensor(rng.normal(size=(2, 3, 3, 2)), requires_grad=True)
        weights = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        check_gradients(lambda: ssum(hadamard(maps, weights)), [maps, weights], rng=rng)


class TestConcatPool:
    def test_concat_shapes_and_backward_split(self):
        rng = np.random.default_rng(11)
        a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
        with Tape() as tape:
            y = concat([a, b], axis=1)
            assert y.values.shape == (4, 8)
            loss = ssum(hadamard(y, Tensor(rng.normal(size=(4, 8)))))
        backward(loss, tape)
        assert a.grad.shape == (4, 3)
        assert b.grad.shape == (4, 5)
        check_gradients(lambda: ssum(concat([a, b], axis=1)), [a, b], rng=rng)

    def test_concat_axis_out_of_range(self):
        with pytest.raises(DataError, match="axis"):
            concat([Tensor(np.zeros((2, 2)))], axis=2)

    def test_gap_constant(self):
        y = global_avg_pool(Tensor(np.full((2, 3, 4, 5), 7.5)))
        np.testing.assert_array_equal(y.values, np.full((2, 3), 7.5))

    def test_gap_gradient(self):
        rng = np.random.default_rng(12)
        x = Tensor(rng.normal(size=(2, 3, 3, 4)), requires_grad=True)
        check_gradients(lambda: ssum(global_avg_pool(x)), [x], rng=rng)


class TestDropout:
    def test_rate_zero_identity(self):
        x = Tensor(np.ones((3, 3)))
        assert dropout(x, 0.0, True, np.random.default_rng(0)) is x

    def test_inference_identity(self):
        x = Tensor(np.ones((3, 3)))
        assert dropout(x, 0.9, False, None) is x

    def test_survivor_fraction(self):
        rng = np.random.default_rng(13)
        x = Tensor(np.ones(100_000))
        y = dropout(x, 0.35, True, rng)
        survived = np.count_nonzero(y.values)
        assert abs(survived / 100_000 - 0.65) < 0.01
        np.testing.assert_allclose(y.values[y.values != 0], 1.0 / 0.65)

    def test_gradient_uses_same_mask(self):
        rng = np.random.default_rng(14)
        x = Tensor(rng.normal(size=(50,)), requires_grad=True)
        with Tape() as tape:
            y = dropout(x, 0.5, True, np.random.default_rng(99))
            loss = ssum(y)
        backward(loss, tape)
        expected = np.where(y.values != 0, 2.0, 0.0)
        np.testing.assert_array_equal(x.grad, expected)

    def test_rate_validation(self):
        with pytest.raises(DataError):
            dropout(Tensor(np.ones(3)), 1.0, True, np.random.default_rng(0))


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        loss = softmax_cross_entropy(Tensor(np.zeros((3, 4))), np.array([0, 1, 2]))
        assert loss.values == pytest.approx(math.log(4.0), abs=1e-12)

    def test_confident_correct(self):
        logits = np.zeros((1, 3))
        logits[0, 1] = 50.0
        loss = softmax_cross_entropy(Tensor(logits), np.array([1]))
        assert loss.values < 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(DataError, match="labels"):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_gradient_formula_and_fd(self):
        rng = np.random.default_rng(15)
        logits = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
        labels = np.array([0, 2, 4, 1])
        with Tape() as tape:
            loss = softmax_cross_entropy(logits, labels)
        backward(loss, tape)
        probs = softmax(logits.values)
        expected = probs.copy()
        expected[np.arange(4), labels] -= 1.0
        np.testing.assert_allclose(logits.grad, expected / 4.0, atol=1e-12)
        check_gradients(lambda: softmax_cross_entropy(logits, labels), [logits], rng=rng)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(16)
        probs = softmax(rng.normal(scale=30.0, size=(20, 7)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = Tensor(np.random.default_rng(17).normal(size=(3, 4)), requires_grad=True)
        with Tape() as tape:
            loss = ssum(x)
        backward(loss, tape)
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_disconnected_parameter_zero_grad(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        w = Tensor(np.ones((2, 2)), requires_grad=True)
        with Tape() as tape:
            tape.watch(w)
            loss = ssum(x)
        backward(loss, tape)
        np.testing.assert_array_equal(w.grad, np.zeros((2, 2)))

    def test_branch_not_reaching_loss_zero_grad(self):
        x = Tensor(np.ones((2,)), requires_grad=True)
        w = Tensor(np.ones((2,)), requires_grad=True)
        with Tape() as tape:
            _unused = relu(w)
            loss = ssum(x)
        backward(loss, tape)
        np.testing.assert_array_equal(w.grad, np.zeros(2))

    def test_reused_tensor_accumulates(self):
        x = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        with Tape() as tape:
            loss = ssum(hadamard(x, x))  # d/dx sum(x*x) = 2x
        backward(loss, tape)
        np.testing.assert_allclose(x.grad, 2 * x.values, atol=1e-12)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with Tape() as tape:
            y = relu(x)
        with pytest.raises(DataError, match="scalar"):
            backward(y, tape)

    def test_forward_determinism(self):
        rng_values = np.random.default_rng(18).normal(size=(3, 6))
        a = relu(Tensor(rng_values)).values
        b = relu(Tensor(rng_values)).values
        assert np.array_equal(a, b)


class TestAdam:
    def test_zero_gradient_no_motion(self):
        p = Parameter("w", np.array([1.0, -2.0]))
        params = {"w": p}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
        np.testing.assert_array_equal(p.values, [1.0, -2.0])

    def test_weight_decay_only(self):
        p = Parameter("w", np.array([1.0]))
        params = {"w": p}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.zeros(1)}, state, lr=0.1, weight_decay=0.5)
        assert p.values[0] == pytest.approx(1.0 - 0.1 * 0.5 * 1.0)

    def test_descent_on_quadratic(self):
        p = Parameter("w", np.array([1.0]))
        params = {"w": p}
        state = AdamState.for_params(params)
        for _ in range(10):
            grad = 2.0 * p.values  # d/dw w^2
            adam_step(params, {"w": grad}, state, lr=0.05)
        assert abs(p.values[0]) < 1.0

    def test_deterministic_trajectories(self):
        def run():
            rng = np.random.default_rng(42)
            p = Parameter("w", rng.normal(size=(4, 4)))
            params = {"w": p}
            state = AdamState.for_params(params)
            traj = []
            for _ in range(5):
                grad = rng.normal(size=(4, 4))
                adam_step(params, {"w": grad}, state, lr=1e-2)
                traj.append(p.values.copy())
            return traj

        for a, b in zip(run(), run()):
            assert np.array_equal(a, b)

    def test_shape_mismatch(self):
        p = Parameter("w", np.zeros((2, 2)))
        params = {"w": p}
        state = AdamState.for_params(params)
        with pytest.raises(DataError):
            adam_step(params, {"w": np.zeros(3)}, state, lr=0.1)


class TestRandomizedGradientSweep:
    """Finite-difference checks over randomized shapes, many seeds."""

    @pytest.mark.parametrize("seed", range(10))
    def test_composed_ops(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        c = int(rng.integers(1, 4))
        h = int(rng.integers(3, 8))
        w = int(rng.integers(3, 6))
        c_out = int(rng.integers(1, 4))
        x = Tensor(rng.normal(size=(n, c, h, w)) + 0.5, requires_grad=True)
        kernel = Tensor(rng.normal(size=(c_out, c, 3, 3)) * 0.5, requires_grad=True)
        W = Tensor(rng.normal(size=(c_out, 3)) * 0.5, requires_grad=True)
        b = Tensor(rng.normal(size=3) * 0.1, requires_grad=True)

        def build():
            conv = conv2d(x, kernel, stride=1, padding=1)
            pooled = global_avg_pool(conv)
            logits = affine(sigmoid(pooled), W, b)
            return softmax_cross_entropy(logits, np.arange(n) % 3)

        check_gradients(build, [x, kernel, W, b], rng=rng, max_coords=6)
