import numpy as np
import pytest

from volpinn.network import (
    DEFAULT_LAYER_SIZES,
    MLP,
    AdamState,
    adam_step,
    forward_batch,
    grad_loss,
    load_checkpoint,
    save_checkpoint,
    zero_gradient,
)


def flatten_grad(grad):
    return np.concatenate([g.ravel() for g in grad.weights]
                          + [g.ravel() for g in grad.biases])


def set_flat_params(net, flat):
    pos = 0
    for W in net.weights:
        W[...] = flat[pos:pos + W.size].reshape(W.shape)
        pos += W.size
    for b in net.biases:
        b[...] = flat[pos:pos + b.size]
        pos += b.size


def get_flat_params(net):
    return np.concatenate([W.ravel() for W in net.weights]
                          + [b.ravel() for b in net.biases])


class TestForward:
    def test_zero_network_outputs_zero(self):
        net = MLP.initialized((1, 8, 1), seed=0)
        for W in net.weights:
            W[...] = 0.0
        assert np.all(forward_batch(net, [-2.0, 0.0, 3.5]) == 0.0)

    def test_hand_computed_two_layer_net(self):
        net = MLP(
            layer_sizes=(1, 1, 1),
            weights=[np.array([[1.0]]), np.array([[2.0]])],
            biases=[np.array([-0.5]), np.array([1.0])],
            activation="relu",
        )
        assert forward_batch(net, [1.0])[0] == pytest.approx(2.0, abs=1e-15)
        # kink side: relu(1*0.25 - 0.5) = 0
        assert forward_batch(net, [0.25])[0] == pytest.approx(1.0, abs=1e-15)

    def test_seeded_default_net_regression_pins(self):
        net = MLP.initialized(DEFAULT_LAYER_SIZES, "relu", seed=0)
        # golden values captured once from the seeded initialization
        assert forward_batch(net, [0.0])[0] == 0.0
        assert forward_batch(net, [1.0])[0] == pytest.approx(
            -1.7073583080310804, abs=0.0)
        assert forward_batch(net, [0.25])[0] == pytest.approx(
            -0.4268395770077701, abs=0.0)

    def test_determinism_across_constructions(self):
        a = MLP.initialized(seed=123)
        b = MLP.initialized(seed=123)
        for Wa, Wb in zip(a.weights, b.weights):
            assert np.array_equal(Wa, Wb)
        xs = np.linspace(-1.0, 1.0, 7)
        assert np.array_equal(forward_batch(a, xs), forward_batch(b, xs))

    def test_relu_network_piecewise_linear(self):
        # on any window with no preactivation sign change, three collinear
        # inputs must give collinear outputs
        from volpinn.network import _forward_cached

        rng = np.random.default_rng(3)
        net = MLP.initialized((1, 20, 20, 1), seed=3)
        checked = 0
        for _ in range(50):
            x0 = rng.uniform(-1.0, 1.0)
            h = 1e-5
            xs = np.array([x0 - h, x0, x0 + h])
            y, _, zs = _forward_cached(net, xs)
            signs = [Z > 0.0 for Z in zs]
            same_pattern = all(
                np.array_equal(S[:, 0], S[:, 1]) and np.array_equal(S[:, 1], S[:, 2])
                for S in signs)
            if same_pattern:
                mid = 0.5 * (y[0] + y[2])
                assert abs(mid - y[1]) < 1e-10 * max(1.0, abs(y[1]))
                checked += 1
        assert checked >= 40     # tiny windows rarely straddle a kink

    def test_validation(self):
        with pytest.raises(ValueError):
            MLP((2, 5, 1), [np.zeros((5, 2)), np.zeros((1, 5))],
                [np.zeros(5), np.zeros(1)], "relu")
        with pytest.raises(ValueError):
            MLP.initialized((1, 5, 1), activation="sigmoid")
        with pytest.raises(ValueError):
            MLP((1, 5, 1), [np.full((5, 1), np.nan), np.zeros((1, 5))],
                [np.zeros(5), np.zeros(1)], "relu")


class TestGradLoss:
    def test_zero_upstream_gives_zero_gradient(self):
        net = MLP.initialized((1, 10, 1), seed=1)
        grad = grad_loss(net, np.zeros(5), np.linspace(0, 1, 5))
        assert np.all(flatten_grad(grad) == 0.0)

    def test_single_weight_chain_rule(self):
        # v(x) = w x with w = 3; L = v(2)^2 so dL/dw = 2 * 6 * 2 = 24
        net = MLP((1, 1), [np.array([[3.0]])], [np.array([0.0])], "relu")
        v = forward_batch(net, [2.0])[0]
        grad = grad_loss(net, [2.0 * v], [2.0])
        assert grad.weights[0][0, 0] == pytest.approx(24.0, abs=1e-13)
        assert grad.biases[0][0] == pytest.approx(2.0 * v, abs=1e-13)

    @pytest.mark.parametrize("shape", [(1, 5, 1), (1, 10, 10, 1)])
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_tanh_gradient_matches_finite_differences(self, shape, seed):
        net = MLP.initialized(shape, "tanh", seed=seed)
        xs = np.linspace(-1.0, 1.0, 11)

        def loss_value():
            v = forward_batch(net, xs)
            return float(np.sum(v * v))

        v = forward_batch(net, xs)
        grad = flatten_grad(grad_loss(net, 2.0 * v, xs))
        flat = get_flat_params(net)
        step = 1e-6
        fd = np.empty_like(flat)
        for i in range(flat.size):
            bumped = flat.copy()
            bumped[i] += step
            set_flat_params(net, bumped)
            up = loss_value()
            bumped[i] -= 2 * step
            set_flat_params(net, bumped)
            down = loss_value()
            fd[i] = (up - down) / (2 * step)
        set_flat_params(net, flat)
        mask = np.abs(grad) > 1e-8
        rel = np.abs(grad[mask] - fd[mask]) / np.abs(grad[mask])
        assert rel.max() < 1e-5

    def test_length_mismatch(self):
        net = MLP.initialized((1, 5, 1), seed=0)
        with pytest.raises(ValueError):
            grad_loss(net, [1.0, 2.0], [0.5])


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        net = MLP.initialized((1, 5, 1), seed=2)
        before = get_flat_params(net).copy()
        state = AdamState.for_network(net, learning_rate=0.1)
        adam_step(net, zero_gradient(net), state)
        assert np.array_equal(get_flat_params(net), before)
        assert state.step_count == 1

    def test_first_step_moves_by_learning_rate(self):
        # m-hat = g, v-hat = g^2, so the first step is lr * g / (|g| + eps)
        net = MLP((1, 1), [np.array([[0.0]])], [np.array([0.0])], "relu")
        state = AdamState.for_network(net, learning_rate=0.1)
        grad = zero_gradient(net)
        grad.weights[0][0, 0] = 1.0
        adam_step(net, grad, state)
        assert net.weights[0][0, 0] == pytest.approx(-0.1 / (1.0 + 1e-8), abs=1e-15)

    def test_constant_gradient_moves_monotonically(self):
        net = MLP((1, 1), [np.array([[0.0]])], [np.array([0.0])], "relu")
        state = AdamState.for_network(net, learning_rate=0.05)
        grad = zero_gradient(net)
        grad.weights[0][0, 0] = 2.5
        w_prev = 0.0
        for _ in range(2):
            adam_step(net, grad, state)
            assert net.weights[0][0, 0] < w_prev
            w_prev = net.weights[0][0, 0]

    def test_zero_learning_rate_freezes_parameters(self):
        net = MLP.initialized((1, 8, 1), seed=5)
        before = get_flat_params(net).copy()
        state = AdamState.for_network(net, learning_rate=0.0)
        rng = np.random.default_rng(0)
        for _ in range(3):
            grad = zero_gradient(net)
            for g in grad.weights:
                g[...] = rng.normal(size=g.shape)
            adam_step(net, grad, state)
        assert np.array_equal(get_flat_params(net), before)

    def test_hyperparameter_validation(self):
        net = MLP.initialized((1, 5, 1), seed=0)
        with pytest.raises(ValueError):
            AdamState.for_network(net, beta1=1.0)
        with pytest.raises(ValueError):
            AdamState.for_network(net, epsilon=0.0)

    def test_gradient_shape_mismatch_rejected(self):
        net = MLP.initialized((1, 5, 1), seed=0)
        other = MLP.initialized((1, 7, 1), seed=0)
        state = AdamState.for_network(net)
        with pytest.raises(ValueError):
            adam_step(net, zero_gradient(other), state)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        net = MLP.initialized((1, 13, 7, 1), "tanh", seed=42)
        path = tmp_path / "net.ckpt"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        assert loaded.layer_sizes == net.layer_sizes
        assert loaded.activation == net.activation
        for Wa, Wb in zip(net.weights, loaded.weights):
            assert np.array_equal(Wa, Wb)
        for ba, bb in zip(net.biases, loaded.biases):
            assert np.array_equal(ba, bb)
        xs = np.linspace(-2.0, 2.0, 9)
        assert np.array_equal(forward_batch(net, xs), forward_batch(loaded, xs))
