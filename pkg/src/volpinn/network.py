"""Small fully-connected networks with manual forward/backward passes and an
Adam optimizer.  One network maps a scalar time to one scalar output; a
system of N state variables trains N independent networks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .problems import EvaluationError

RELU = "relu"
TANH = "tanh"

DEFAULT_LAYER_SIZES = (1, 50, 50, 50, 50, 1)


@dataclass
class MLP:
    """Feed-forward net: scalar input, hidden layers with one activation,
    affine scalar output.  weights[i] has shape (sizes[i+1], sizes[i])."""

    layer_sizes: tuple
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = RELU

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or sizes[0] != 1 or sizes[-1] != 1:
            raise ValueError("network must map one scalar input to one scalar output")
        if self.activation not in (RELU, TANH):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer transition")
        for i, (nin, nout) in enumerate(zip(sizes[:-1], sizes[1:])):
            if self.weights[i].shape != (nout, nin):
                raise ValueError(f"weights[{i}] must have shape {(nout, nin)}")
            if self.biases[i].shape != (nout,):
                raise ValueError(f"biases[{i}] must have shape {(nout,)}")
            if not (np.all(np.isfinite(self.weights[i])) and np.all(np.isfinite(self.biases[i]))):
                raise ValueError(f"layer {i} parameters must be finite")
        self.layer_sizes = sizes

    @classmethod
    def initialized(cls, layer_sizes=DEFAULT_LAYER_SIZES, activation: str = RELU,
                    seed: int = 0) -> "MLP":
        """He-style init: weights ~ N(0, 2/fan_in), biases zero, seeded rng."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for nin, nout in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / nin), size=(nout, nin)))
            biases.append(np.zeros(nout))
        return cls(tuple(layer_sizes), weights, biases, activation)

    def copy(self) -> "MLP":
        return MLP(self.layer_sizes, [W.copy() for W in self.weights],
                   [b.copy() for b in self.biases], self.activation)

    @property
    def n_params(self) -> int:
        return sum(W.size for W in self.weights) + sum(b.size for b in self.biases)


@dataclass
class Gradient:
    """Per-layer loss gradients, shaped exactly like the network parameters."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_deriv(z: np.ndarray, kind: str) -> np.ndarray:
    # relu derivative at exactly 0 is taken as 0 (fixed for determinism)
    if kind == RELU:
        return (z > 0.0).astype(float)
    t = np.tanh(z)
    return 1.0 - t * t


def _forward_cached(net: MLP, xs: np.ndarray):
    """Forward pass keeping activations and pre-activations for backprop."""
    A = xs[None, :]
    acts = [A]
    zs = []
    L = len(net.weights)
    for i in range(L - 1):
        Z = net.weights[i] @ A + net.biases[i][:, None]
        zs.append(Z)
        A = _activate(Z, net.activation)
        acts.append(A)
    out = net.weights[-1] @ A + net.biases[-1][:, None]
    return out[0], acts, zs


def forward_batch(net: MLP, xs) -> np.ndarray:
    """Network outputs v(x_i) for a batch of scalar inputs."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out, _, _ = _forward_cached(net, xs)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("network produced a non-finite output", component=0)
    return out


def grad_loss(net: MLP, loss_grad_at_outputs, xs) -> Gradient:
    """Reverse-mode accumulation of dL/dtheta from dL/dv(x_i).

    Returns sum_j (dL/dv(x_j)) * (dv(x_j)/dtheta) over the batch.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    dout = np.atleast_1d(np.asarray(loss_grad_at_outputs, dtype=float))
    if dout.shape != xs.shape:
        raise ValueError("one upstream gradient per input is required")
    _, acts, zs = _forward_cached(net, xs)
    return _backprop(net, acts, zs, dout)


def _backprop(net: MLP, acts, zs, dout: np.ndarray) -> Gradient:
    L = len(net.weights)
    gW: List[np.ndarray] = [None] * L
    gb: List[np.ndarray] = [None] * L
    delta = dout[None, :]
    for i in range(L - 1, -1, -1):
        gW[i] = delta @ acts[i].T
        gb[i] = delta.sum(axis=1)
        if i > 0:
            delta = (net.weights[i].T @ delta) * _activate_deriv(zs[i - 1], net.activation)
    return Gradient(gW, gb)


def zero_gradient(net: MLP) -> Gradient:
    return Gradient([np.zeros_like(W) for W in net.weights],
                    [np.zeros_like(b) for b in net.biases])


@dataclass
class AdamState:
    """First/second moment estimates plus hyperparameters for one network."""

    m_weights: List[np.ndarray]
    v_weights: List[np.ndarray]
    m_biases: List[np.ndarray]
    v_biases: List[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.step_count < 0:
            raise ValueError("step_count must be nonnegative")

    @classmethod
    def for_network(cls, net: MLP, learning_rate: float = 1e-3, beta1: float = 0.9,
                    beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(W) for W in net.weights],
            v_weights=[np.zeros_like(W) for W in net.weights],
            m_biases=[np.zeros_like(b) for b in net.biases],
            v_biases=[np.zeros_like(b) for b in net.biases],
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon,
        )


def adam_step(net: MLP, grad: Gradient, state: AdamState):
    """One bias-corrected Adam update.  Mutates ``net`` and ``state`` in place
    and returns them; the caller must hold exclusive access to both."""
    if len(grad.weights) != len(net.weights):
        raise ValueError("gradient does not match network layout")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    lr, eps = state.learning_rate, state.epsilon
    for i in range(len(net.weights)):
        if grad.weights[i].shape != net.weights[i].shape:
            raise ValueError(f"gradient shape mismatch in layer {i}")
        state.m_weights[i] = b1 * state.m_weights[i] + (1.0 - b1) * grad.weights[i]
        state.v_weights[i] = b2 * state.v_weights[i] + (1.0 - b2) * grad.weights[i] ** 2
        net.weights[i] -= lr * (state.m_weights[i] / c1) / (
            np.sqrt(state.v_weights[i] / c2) + eps)
        state.m_biases[i] = b1 * state.m_biases[i] + (1.0 - b1) * grad.biases[i]
        state.v_biases[i] = b2 * state.v_biases[i] + (1.0 - b2) * grad.biases[i] ** 2
        net.biases[i] -= lr * (state.m_biases[i] / c1) / (
            np.sqrt(state.v_biases[i] / c2) + eps)
    return net, state


def save_checkpoint(net: MLP, path) -> None:
    """Write the network to a text checkpoint: a header line with the
    activation and layer sizes, then one parameter per line (17 significant
    digits, row-major, weights before bias per layer)."""
    lines = [net.activation + " " + " ".join(str(s) for s in net.layer_sizes)]
    for W, b in zip(net.weights, net.biases):
        for value in W.ravel():
            lines.append(f"{value:.17g}")
        for value in b:
            lines.append(f"{value:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> MLP:
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    header = lines[0].split()
    activation = header[0]
    sizes = tuple(int(s) for s in header[1:])
    values = iter(float(tok) for tok in lines[1:])
    weights, biases = [], []
    for nin, nout in zip(sizes[:-1], sizes[1:]):
        W = np.array([next(values) for _ in range(nin * nout)]).reshape(nout, nin)
        b = np.array([next(values) for _ in range(nout)])
        weights.append(W)
        biases.append(b)
    return MLP(sizes, weights, biases, activation)
