import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from wsdt.autodiff import (
    Adam,
    Linear,
    Module,
    Parameter,
    Tensor,
    backward,
    concat,
    gelu,
    layer_norm,
    leaky_relu,
    masked_attention,
    matmul,
    no_grad,
    precision,
    sigmoid,
    silu,
    softplus,
)
from wsdt.autodiff.gradcheck import check_gradients, max_relative_error, numerical_gradient
from wsdt.exceptions import ConfigurationError, ContractError, DimensionError


class TensorArithmeticTests(SimpleTestCase):
    """Test cases for elementwise arithmetic and the tape"""

    def test_matmul_values(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = matmul(a, Tensor([[1.0], [1.0]]))
        np.testing.assert_allclose(out.data, [[3.0], [7.0]])
        eye = Tensor(np.eye(2))
        np.testing.assert_allclose(matmul(eye, eye).data, np.eye(2))

    def test_matmul_vector_operand(self):
        vector = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        weight = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        out = matmul(vector, weight)
        self.assertEqual(out.shape, (2,))
        np.testing.assert_allclose(out.data, [16.0, 22.0])
        backward(out.sum())
        np.testing.assert_allclose(vector.grad, [1.0, 5.0, 9.0])
        np.testing.assert_allclose(weight.grad, [[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        stacked = matmul(Tensor([1.0, 0.0]), Tensor(np.arange(8.0).reshape(2, 2, 2)))
        np.testing.assert_allclose(stacked.data, [[0.0, 1.0], [4.0, 5.0]])
        with self.assertRaises(DimensionError):
            matmul(Tensor([1.0, 2.0]), Tensor(np.ones((3, 2))))

    def test_product_rule(self):
        a = Tensor([[2.0]], requires_grad=True)
        b = Tensor([[3.0]], requires_grad=True)
        backward((a * b).sum())
        np.testing.assert_allclose(a.grad, [[3.0]])
        np.testing.assert_allclose(b.grad, [[2.0]])

    def test_sum_gives_ones(self):
        x = Tensor(np.arange(24.0).reshape(2, 3, 4), requires_grad=True)
        backward(x.sum())
        np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))

    def test_square_gradient(self):
        x = Tensor(3.0, requires_grad=True)
        backward(x ** 2)
        self.assertAlmostEqual(float(x.grad), 6.0)

    def test_shared_operand_accumulates(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        backward((x * x + x).sum())
        np.testing.assert_allclose(x.grad, [3.0, 5.0])

    def test_broadcast_gradient_is_reduced(self):
        a = Tensor(np.ones((2, 3)), requires_grad=True)
        b = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        backward((a * b).sum())
        np.testing.assert_allclose(a.grad, np.tile([1.0, 2.0, 3.0], (2, 1)))
        np.testing.assert_allclose(b.grad, [2.0, 2.0, 2.0])

    def test_numpy_on_left_defers_to_tensor(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        out = np.array([2.0, 2.0]) * x
        self.assertIsInstance(out, Tensor)
        backward(out.sum())
        np.testing.assert_allclose(x.grad, [2.0, 2.0])

    def test_repeated_index_accumulates(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        backward(x[np.array([0, 0, 1])].sum())
        np.testing.assert_allclose(x.grad, [2.0, 1.0, 0.0])

    def test_slice_gradient(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        backward(x[..., 1:].sum())
        np.testing.assert_allclose(x.grad, [[0, 1, 1], [0, 1, 1]])

    def test_backward_requires_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with self.assertRaises(ContractError):
            backward(x * 2.0)

    def test_backward_requires_history(self):
        with self.assertRaises(ContractError):
            backward(Tensor(1.0))

    def test_no_grad_skips_recording(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x * 2.0
        self.assertFalse(y.requires_grad)

    def test_detach_cuts_the_tape(self):
        x = Tensor([1.0], requires_grad=True)
        self.assertFalse((x.detach() * 2.0).requires_grad)

    def test_reshape_mismatch(self):
        with self.assertRaises(DimensionError):
            Tensor(np.zeros(6)).reshape(4, 2)

    def test_precision_switch(self):
        self.assertEqual(Tensor([1.0]).dtype, np.float32)
        with precision("float64"):
            self.assertEqual(Tensor([1.0]).dtype, np.float64)
        self.assertEqual(Tensor([1.0]).dtype, np.float32)
        with self.assertRaises(ContractError):
            with precision("float16"):
                pass


class FunctionalTests(SimpleTestCase):
    """Test cases for the differentiable operations"""

    def test_attention_single_token_returns_value(self):
        v = Tensor([[0.5, -1.0, 2.0]])
        out = masked_attention(Tensor([[1.0, 2.0, 3.0]]), Tensor([[3.0, 2.0, 1.0]]), v, np.ones((1, 1), bool))
        np.testing.assert_allclose(out.data, v.data, rtol=1e-6)

    def test_attention_hidden_key_has_zero_weight(self):
        rng = np.random.default_rng(0)
        q, k, v = (Tensor(rng.standard_normal((3, 4))) for _ in range(3))
        mask = np.ones((3, 3), bool)
        mask[1, 2] = False
        _, weights = masked_attention(q, k, v, mask, return_weights=True)
        self.assertEqual(weights[1, 2], 0.0)
        np.testing.assert_allclose(weights.sum(axis=-1), np.ones(3), rtol=1e-6)

    def test_attention_uniform_logits(self):
        q = Tensor(np.ones((4, 8)))
        v = Tensor(np.arange(32.0).reshape(4, 8))
        _, weights = masked_attention(q, q, v, np.ones((4, 4), bool), return_weights=True)
        np.testing.assert_allclose(weights, np.full((4, 4), 0.25), rtol=1e-6)

    def test_attention_rejects_empty_row(self):
        x = Tensor(np.ones((2, 4)))
        with self.assertRaises(ConfigurationError):
            masked_attention(x, x, x, np.array([[True, False], [False, False]]))

    def test_attention_rejects_wrong_mask_shape(self):
        x = Tensor(np.ones((2, 4)))
        with self.assertRaises(DimensionError):
            masked_attention(x, x, x, np.ones((3, 3), bool))

    def test_layer_norm_constant_token(self):
        out = layer_norm(Tensor(np.full((2, 8), 3.0)))
        np.testing.assert_allclose(out.data, np.zeros((2, 8)), atol=1e-6)

    def test_layer_norm_two_values(self):
        out = layer_norm(Tensor([[1.0, -1.0]]))
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-4)

    def test_layer_norm_shift_sets_mean(self):
        rng = np.random.default_rng(1)
        shift = Tensor(np.full(6, 0.7))
        out = layer_norm(Tensor(rng.standard_normal((5, 6))), Tensor(np.ones(6)), shift)
        np.testing.assert_allclose(out.data.mean(axis=-1), np.full(5, 0.7), atol=1e-5)

    def test_softplus_is_stable(self):
        out = softplus(Tensor([-1000.0, 0.0, 1000.0]))
        np.testing.assert_allclose(out.data, [0.0, np.log(2.0), 1000.0], rtol=1e-6)

    def test_leaky_relu_slope(self):
        np.testing.assert_allclose(leaky_relu(Tensor([-1.0, 2.0]), 0.2).data, [-0.2, 2.0])

    def test_concat_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))], axis=1)


class GradientCheckTests(SimpleTestCase):
    """Test cases comparing analytic gradients with central differences"""

    def assertGradientsMatch(self, errors, tolerance=1e-4):
        for name, error in errors.items():
            self.assertLess(error, tolerance, msg=f"{name}: relative error {error}")

    def test_elementwise_ops(self):
        with precision("float64"):
            rng = np.random.default_rng(2)
            x = Tensor(rng.standard_normal((3, 5)) + 0.05, requires_grad=True)
            weights = rng.standard_normal((3, 5))
            for op in (gelu, silu, softplus, sigmoid, lambda t: leaky_relu(t, 0.2), lambda t: t.tanh()):
                errors = check_gradients(lambda: (op(x) * weights).sum(), [("x", x)])
                self.assertGradientsMatch(errors)

    def test_layer_norm(self):
        with precision("float64"):
            rng = np.random.default_rng(3)
            x = Tensor(rng.standard_normal((2, 4, 8)), requires_grad=True)
            scale = Parameter(rng.standard_normal(8))
            shift = Parameter(rng.standard_normal(8))
            target = rng.standard_normal((2, 4, 8))
            errors = check_gradients(
                lambda: ((layer_norm(x, scale, shift) - target) ** 2).sum(),
                [("x", x), ("scale", scale), ("shift", shift)],
            )
            self.assertGradientsMatch(errors)

    def test_masked_attention(self):
        with precision("float64"):
            rng = np.random.default_rng(4)
            q, k, v = (Tensor(rng.standard_normal((2, 4, 8)), requires_grad=True) for _ in range(3))
            causal = np.tril(np.ones((4, 4), bool))
            weights = rng.standard_normal((2, 4, 8))
            errors = check_gradients(
                lambda: (masked_attention(q, k, v, causal) * weights).sum(),
                [("q", q), ("k", k), ("v", v)],
            )
            self.assertGradientsMatch(errors)

    def test_two_layer_mlp(self):
        with precision("float64"):
            rng = np.random.default_rng(5)

            class TwoLayer(Module):
                def __init__(self):
                    self.fc1 = Linear(6, 10, rng)
                    self.fc2 = Linear(10, 3, rng)

                def forward(self, x):
                    return self.fc2(gelu(self.fc1(x)))

            model = TwoLayer()
            x = rng.standard_normal((4, 6))
            y = rng.standard_normal((4, 3))
            errors = check_gradients(lambda: ((model(x) - y) ** 2).mean(), model.named_parameters())
            self.assertGradientsMatch(errors)

    def test_shape_ops(self):
        with precision("float64"):
            rng = np.random.default_rng(6)
            x = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
            y = Tensor(rng.standard_normal((2, 3, 2)), requires_grad=True)
            weights = rng.standard_normal((3, 2, 6))

            def loss():
                joined = concat([x, y], axis=-1).transpose((1, 0, 2))
                return (joined * weights).abs().mean() + joined[:, :, 1:4].exp().sum() * 0.1

            self.assertGradientsMatch(check_gradients(loss, [("x", x), ("y", y)]))

    def test_relative_error_floor(self):
        self.assertAlmostEqual(max_relative_error([0.0], [1e-7]), 0.01)
        self.assertEqual(max_relative_error([2.0], [2.0]), 0.0)

    def test_numerical_gradient_of_quadratic(self):
        with precision("float64"):
            x = Tensor([1.0, -2.0], requires_grad=True)
            estimate = numerical_gradient(lambda: (x * x).sum(), x)
            np.testing.assert_allclose(estimate, [2.0, -4.0], rtol=1e-6)


class ModuleTests(SimpleTestCase):
    """Test cases for parameter containers and the optimizer"""

    def setUp(self):
        """Build a small nested module"""
        rng = np.random.default_rng(7)

        class Stack(Module):
            def __init__(self):
                self.layers = [Linear(3, 4, rng), Linear(4, 2, rng, bias=False)]
                self.heads = {"a": Linear(2, 1, rng, zero=True)}

        self.module = Stack()

    def test_parameter_names(self):
        names = [name for name, _ in self.module.named_parameters()]
        self.assertEqual(
            names,
            ["layers.0.weight", "layers.0.bias", "layers.1.weight", "heads.a.weight", "heads.a.bias"],
        )
        self.assertEqual(self.module.num_parameters(), 12 + 4 + 8 + 2 + 1)

    def test_zero_initialisation(self):
        self.assertFalse(np.any(self.module.heads["a"].weight.data))

    def test_state_dict_round_trip(self):
        state = self.module.state_dict()
        for param in self.module.parameters():
            param.data = param.data + 1.0
        self.module.load_state_dict(state)
        for name, param in self.module.named_parameters():
            np.testing.assert_array_equal(param.data, state[name])

    def test_load_state_dict_rejects_mismatch(self):
        state = self.module.state_dict()
        state["layers.0.weight"] = np.zeros((2, 2))
        with self.assertRaises(DimensionError):
            self.module.load_state_dict(state)
        del state["layers.0.weight"]
        with self.assertRaises(DimensionError):
            self.module.load_state_dict(state)

    def test_adam_minimizes_quadratic(self):
        x = Parameter(np.array([0.0, 5.0]))
        optimizer = Adam([("x", x)], lr=0.02)
        for _ in range(2000):
            optimizer.zero_grad()
            backward(((x - 3.0) ** 2).sum())
            optimizer.step()
        np.testing.assert_allclose(x.data, [3.0, 3.0], atol=0.1)

    def test_adam_state_resumes_identically(self):
        def run(steps, optimizer, x):
            for _ in range(steps):
                optimizer.zero_grad()
                backward(((x - 1.0) ** 2).sum())
                optimizer.step()

        first = Parameter(np.array([4.0, -2.0]))
        reference = Adam([("x", first)], lr=0.05)
        run(6, reference, first)

        second = Parameter(np.array([4.0, -2.0]))
        partial = Adam([("x", second)], lr=0.05)
        run(3, partial, second)
        resumed_param = Parameter(second.data.copy())
        resumed = Adam([("x", resumed_param)], lr=0.05)
        resumed.load_state_dict(partial.state_dict(), partial.step_count)
        run(3, resumed, resumed_param)
        np.testing.assert_array_equal(resumed_param.data, first.data)


class BroadcastPropertyTests(SimpleTestCase):
    """Property tests for gradient reduction under broadcasting"""

    @settings(max_examples=25, deadline=None)
    @given(
        rows=st.integers(min_value=1, max_value=4),
        cols=st.integers(min_value=1, max_value=4),
        seed=st.integers(min_value=0, max_value=2**16),
    )
    def test_bias_gradient_is_column_sum(self, rows, cols, seed):
        rng = np.random.default_rng(seed)
        with precision("float64"):
            x = Tensor(rng.standard_normal((rows, cols)), requires_grad=True)
            bias = Tensor(rng.standard_normal(cols), requires_grad=True)
            weights = rng.standard_normal((rows, cols))
            backward(((x + bias) * weights).sum())
            np.testing.assert_allclose(bias.grad, weights.sum(axis=0))
            np.testing.assert_allclose(x.grad, weights)
