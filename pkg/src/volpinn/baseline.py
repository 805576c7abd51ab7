"""Classical strong-form PINN baseline for first-order systems.

Networks model the state variables directly; the loss combines the mean
squared ODE residual (using the exact derivative of each network with respect
to its input, propagated forward through the layers) with weighted
initial-condition penalties.  Serves as the failure-mode reference on stiff
problems.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import network
from .network import MLP, TANH, AdamState, Gradient, adam_step
from .problems import FirstOrderSystem, system_jacobian
from .quadrature import UniformGrid
from .training import TrainConfig, TrainingDivergedError, TrainReport, _snapshot, _restore


@dataclass(frozen=True)
class ClassicalPinnConfig(TrainConfig):
    """Strong-form training settings; ``ic_weights`` are the per-species
    initial-condition penalty factors (all 1.0 when omitted)."""

    activation: str = TANH
    ic_weights: Optional[tuple] = None

    def __post_init__(self):
        super().__post_init__()
        if self.ic_weights is not None:
            if any(w < 0.0 for w in self.ic_weights):
                raise ValueError("ic_weights must be nonnegative")


def _tangent_forward(net: MLP, xs: np.ndarray):
    """Propagate values and input-tangents through every layer.

    Returns (v, dv, caches) where dv is the exact derivative of the network
    output with respect to its scalar input at each batch point.
    """
    A = xs[None, :]
    T = np.ones_like(A)
    acts, tangents, zs, taus = [A], [T], [], []
    L = len(net.weights)
    for i in range(L - 1):
        Z = net.weights[i] @ A + net.biases[i][:, None]
        Tau = net.weights[i] @ T
        zs.append(Z)
        taus.append(Tau)
        A = network._activate(Z, net.activation)
        T = network._activate_deriv(Z, net.activation) * Tau
        acts.append(A)
        tangents.append(T)
    out = net.weights[-1] @ A + net.biases[-1][:, None]
    dout = net.weights[-1] @ T
    return out[0], dout[0], (acts, tangents, zs, taus)


def input_derivative(net: MLP, x: float) -> float:
    """dv/dx at ``x`` by forward-mode accumulation of the input tangent.

    Exact for tanh networks; exact almost everywhere for relu with the
    derivative-at-kink-equals-zero convention.
    """
    _, dout, _ = _tangent_forward(net, np.atleast_1d(np.asarray(x, dtype=float)))
    return float(dout[0])


def _tangent_backprop(net: MLP, caches, d_value: np.ndarray,
                      d_tangent: np.ndarray) -> Gradient:
    """Parameter gradients of a loss that reads both v and dv/dx."""
    acts, tangents, zs, taus = caches
    L = len(net.weights)
    gW = [None] * L
    gb = [None] * L
    ga = d_value[None, :]
    gt = d_tangent[None, :]
    for i in range(L - 1, -1, -1):
        if i == L - 1:
            gz = ga
            gtau = gt
        else:
            sp = network._activate_deriv(zs[i], net.activation)
            if net.activation == TANH:
                th = np.tanh(zs[i])
                spp = -2.0 * th * sp
            else:
                spp = 0.0
            gz = sp * ga + spp * taus[i] * gt
            gtau = sp * gt
        gW[i] = gz @ acts[i].T + gtau @ tangents[i].T
        gb[i] = gz.sum(axis=1)
        if i > 0:
            ga = net.weights[i].T @ gz
            gt = net.weights[i].T @ gtau
    return Gradient(gW, gb)


def _ic_weights(cfg_weights, dim: int) -> np.ndarray:
    if cfg_weights is None:
        return np.ones(dim)
    w = np.asarray(cfg_weights, dtype=float)
    if w.shape != (dim,):
        raise ValueError(f"need {dim} initial-condition weights")
    return w


def classical_loss(nets, sys: FirstOrderSystem, grid: UniformGrid,
                   ic_weights=None) -> float:
    """Mean squared strong-form residual plus weighted IC penalties:

        sum_i mean_j (u_i'(x_j) - q_i(u(x_j), x_j))^2
        + sum_i alpha_i (u_i(a) - mu_i)^2

    ``nets`` model the states u_i directly; accepts (value, derivative)
    callable pairs as stubs in place of networks.
    """
    if len(nets) != sys.dim:
        raise ValueError("one network per state variable is required")
    xs = grid.nodes()
    m = xs.size
    U = np.empty((sys.dim, m))
    dU = np.empty((sys.dim, m))
    for k, net in enumerate(nets):
        if isinstance(net, MLP):
            U[k], dU[k], _ = _tangent_forward(net, xs)
        else:
            value_fn, deriv_fn = net
            U[k] = np.asarray(value_fn(xs), dtype=float)
            dU[k] = np.asarray(deriv_fn(xs), dtype=float)
    Q = np.empty_like(U)
    for j in range(m):
        Q[:, j] = sys.rhs(U[:, j], xs[j])
    R = dU - Q
    alphas = _ic_weights(ic_weights, sys.dim)
    penalty = float(np.sum(alphas * (U[:, 0] - sys.init_values) ** 2))
    return float(np.sum(np.mean(R * R, axis=1)) + penalty)


def train_classical(sys: FirstOrderSystem, segment, ics,
                    cfg: ClassicalPinnConfig):
    """Train strong-form networks on one segment; returns the lowest-loss
    parameters and the loss history, mirroring the weak-form trainer."""
    start, end = float(segment[0]), float(segment[1])
    if not start < end:
        raise ValueError("segment must have positive length")
    ics = np.asarray(ics, dtype=float)
    sub = sys.restricted(start, end, ics)
    grid = UniformGrid(start, end, cfg.collocation_count)
    xs = grid.nodes()
    m = xs.size
    N = sys.dim
    alphas = _ic_weights(cfg.ic_weights, N)

    nets = [MLP.initialized(cfg.layer_sizes(), cfg.activation, cfg.seed)
            for _ in range(N)]
    opts = [AdamState.for_network(n, cfg.learning_rate, cfg.beta1, cfg.beta2,
                                  cfg.epsilon) for n in nets]

    history = np.empty(cfg.epochs)
    best = _snapshot(nets)
    best_loss = np.inf
    best_epoch = 0
    executed = 0
    t0 = time.perf_counter()
    U = np.empty((N, m))
    dU = np.empty((N, m))
    Q = np.empty((N, m))
    JR = np.empty((N, m))
    for epoch in range(1, cfg.epochs + 1):
        caches = []
        for k, net in enumerate(nets):
            U[k], dU[k], cache = _tangent_forward(net, xs)
            caches.append(cache)
        for j in range(m):
            Q[:, j] = sub.rhs(U[:, j], xs[j])
        R = dU - Q
        ic_err = U[:, 0] - ics
        value = float(np.sum(np.mean(R * R, axis=1)) + np.sum(alphas * ic_err ** 2))
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch}", epoch=epoch)
        history[epoch - 1] = value
        executed = epoch
        if value < best_loss:
            best_loss = value
            best_epoch = epoch
            best = _snapshot(nets)
        if value < cfg.loss_tolerance:
            break
        for j in range(m):
            J = system_jacobian(sub, U[:, j], xs[j])
            JR[:, j] = J.T @ R[:, j]
        for k, net in enumerate(nets):
            d_value = -(2.0 / m) * JR[k]
            d_value[0] += 2.0 * alphas[k] * ic_err[k]
            d_tangent = (2.0 / m) * R[k]
            grad = _tangent_backprop(net, caches[k], d_value, d_tangent)
            adam_step(net, grad, opts[k])
    _restore(nets, best)
    wall = time.perf_counter() - t0

    for k, net in enumerate(nets):
        U[k], dU[k], _ = _tangent_forward(net, xs)
    report = TrainReport(
        segment=(start, end),
        loss_history=history[:executed].copy(),
        initial_loss=float(history[0]),
        final_loss=best_loss,
        best_epoch=best_epoch,
        wall_time=wall,
        boundary_state=U[:, -1].copy(),
    )
    return nets, report


def classical_state_table(nets, grid: UniformGrid):
    """Sample trained strong-form networks into (grid, values, derivs) arrays."""
    xs = grid.nodes()
    U = np.empty((len(nets), xs.size))
    dU = np.empty_like(U)
    for k, net in enumerate(nets):
        U[k], dU[k], _ = _tangent_forward(net, xs)
    return xs, U.T, dU.T
