"""Training: the single-term integral-residual loss, per-segment optimization,
and the sequential scheme that chains segments through transferred initial
conditions for long-time and stiff integration.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import network
from .network import MLP, AdamState, adam_step
from .problems import (
    BenchmarkProblem,
    FirstOrderSystem,
    LinearIVP,
    StateTable,
    system_jacobian,
)
from .quadrature import (
    SIMPSON,
    TRAPEZOID,
    QuadratureRule,
    UniformGrid,
    prefix_trapezoid_matrix,
)
from .weakform import (
    SystemIntegralForm,
    VolterraForm,
    build_volterra,
    grid_residuals,
    kernel_prefix_matrix,
    reconstruct,
    reconstruct_grid,
    system_grid_residuals,
    system_state_grid,
)


class TrainingDivergedError(RuntimeError):
    """The loss became non-finite; ``epoch`` is the offending epoch index."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class SegmentDivergedError(RuntimeError):
    """A segment of a sequential run diverged.  ``segment_index`` identifies
    it; ``partial`` holds the reconstruction up to the previous boundary."""

    def __init__(self, message: str, segment_index: int,
                 partial: Optional[StateTable]):
        super().__init__(message)
        self.segment_index = segment_index
        self.partial = partial


@dataclass(frozen=True)
class TrainConfig:
    """Settings shared by every segment of a run."""

    collocation_count: int = 101
    epochs: int = 20000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss_tolerance: float = 1e-10
    seed: int = 0
    hidden_layers: tuple = (50, 50, 50, 50)
    activation: str = network.RELU
    transfer_quadrature: str = "auto"   # auto | trapezoid | simpson

    def __post_init__(self):
        if self.collocation_count < 2:
            raise ValueError("collocation_count must be at least 2")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.transfer_quadrature not in ("auto", TRAPEZOID, SIMPSON):
            raise ValueError("transfer_quadrature must be auto, trapezoid or simpson")

    def layer_sizes(self) -> tuple:
        return (1, *self.hidden_layers, 1)


@dataclass(frozen=True)
class SegmentPlan:
    """Partition of the time domain into training segments."""

    boundaries: tuple
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        bounds = tuple(float(b) for b in self.boundaries)
        if len(bounds) < 2:
            raise ValueError("a plan needs at least two boundaries")
        if any(b2 <= b1 for b1, b2 in zip(bounds[:-1], bounds[1:])):
            raise ValueError("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", bounds)

    @classmethod
    def single(cls, start: float, end: float, config: TrainConfig) -> "SegmentPlan":
        return cls((start, end), config)

    @classmethod
    def uniform(cls, start: float, end: float, segments: int,
                config: TrainConfig) -> "SegmentPlan":
        return cls(tuple(np.linspace(start, end, segments + 1)), config)

    @classmethod
    def logspaced(cls, start: float, end: float, segments: int,
                  config: TrainConfig) -> "SegmentPlan":
        if start <= 0.0:
            raise ValueError("log spacing requires a positive start")
        return cls(tuple(np.geomspace(start, end, segments + 1)), config)

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) - 1


@dataclass
class TrainReport:
    """Per-segment training record."""

    segment: tuple
    loss_history: np.ndarray
    initial_loss: float
    final_loss: float
    best_epoch: int
    wall_time: float
    boundary_state: np.ndarray

    @property
    def normalized_history(self) -> np.ndarray:
        return self.loss_history / self.initial_loss

    @property
    def normalized_final(self) -> float:
        return self.final_loss / self.initial_loss

    def to_csv(self, path) -> None:
        """Write ``epoch, loss, normalized_loss`` rows."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write("epoch,loss,normalized_loss\n")
            for i, value in enumerate(self.loss_history, start=1):
                fh.write(f"{i},{value:.17g},{value / self.initial_loss:.17g}\n")


def _net_values(net, xs) -> np.ndarray:
    """Evaluate an MLP or any callable stub on a batch of inputs."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if isinstance(net, MLP):
        return network.forward_batch(net, xs)
    return np.asarray(net(xs), dtype=float)


def loss(nets: Sequence, form_or_sif, grid: UniformGrid) -> float:
    """Mean squared integral residual, summed over state variables.

    ``nets`` holds one network (or callable stub) per state variable; the
    residuals come from the running prefix integrals on ``grid``.
    """
    xs = grid.nodes()
    if isinstance(form_or_sif, VolterraForm):
        if len(nets) != 1:
            raise ValueError("a scalar integral form takes exactly one network")
        R = grid_residuals(form_or_sif, _net_values(nets[0], xs), grid)
        return float(np.mean(R * R))
    sif = form_or_sif
    if len(nets) != sif.system.dim:
        raise ValueError("one network per state variable is required")
    V = np.stack([_net_values(net, xs) for net in nets])
    R = system_grid_residuals(sif, V, grid)
    return float(np.sum(np.mean(R * R, axis=1)))


def _snapshot(nets: List[MLP]) -> list:
    return [([W.copy() for W in n.weights], [b.copy() for b in n.biases]) for n in nets]


def _restore(nets: List[MLP], snap) -> None:
    for n, (Ws, bs) in zip(nets, snap):
        n.weights = [W.copy() for W in Ws]
        n.biases = [b.copy() for b in bs]


def train_segment(problem, segment, ics, cfg: TrainConfig):
    """Train the networks of one segment and report the loss history.

    ``problem`` is a LinearIVP, a FirstOrderSystem, or a catalog entry.
    Returns ``(nets, report)`` with the parameters of the lowest-loss epoch;
    Adam on stiff residuals oscillates, so the best-seen snapshot is kept
    rather than the last iterate.
    """
    if isinstance(problem, BenchmarkProblem):
        problem = problem.ivp if problem.ivp is not None else problem.system
    start, end = float(segment[0]), float(segment[1])
    if not start < end:
        raise ValueError("segment must have positive length")
    if isinstance(problem, LinearIVP):
        return _train_linear_segment(problem, start, end, ics, cfg)
    if isinstance(problem, FirstOrderSystem):
        return _train_system_segment(problem, start, end, ics, cfg)
    raise TypeError(f"cannot train a {type(problem).__name__}")


def _train_linear_segment(ivp: LinearIVP, start: float, end: float, ics,
                          cfg: TrainConfig):
    ics = np.atleast_1d(np.asarray(ics, dtype=float))
    if ics.size != ivp.order:
        raise ValueError("one initial value per derivative order is required")
    sub = ivp.restricted(start, end, ics)
    form = build_volterra(sub)
    grid = UniformGrid(start, end, cfg.collocation_count)
    xs = grid.nodes()
    m = xs.size
    K = kernel_prefix_matrix(form, grid)
    Kt = K.T.copy()
    g = np.asarray(form.forcing(xs), dtype=float) + np.zeros_like(xs)

    net = MLP.initialized(cfg.layer_sizes(), cfg.activation, cfg.seed)
    opt = AdamState.for_network(net, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    history = np.empty(cfg.epochs)
    best = _snapshot([net])
    best_loss = np.inf
    best_epoch = 0
    executed = 0
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        v, acts, zs = network._forward_cached(net, xs)
        R = v + K @ v - g
        value = float(np.mean(R * R))
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch}", epoch=epoch)
        history[epoch - 1] = value
        executed = epoch
        if value < best_loss:
            best_loss = value
            best_epoch = epoch
            best = _snapshot([net])
        if value < cfg.loss_tolerance:
            break
        dv = (2.0 / m) * (R + Kt @ R)
        grad = network._backprop(net, acts, zs, dv)
        adam_step(net, grad, opt)
    _restore([net], best)
    wall = time.perf_counter() - t0

    v = network.forward_batch(net, xs)
    boundary = _linear_boundary_state(form, net, v, grid, cfg)
    report = TrainReport(
        segment=(start, end),
        loss_history=history[:executed].copy(),
        initial_loss=float(history[0]),
        final_loss=best_loss,
        best_epoch=best_epoch,
        wall_time=wall,
        boundary_state=boundary,
    )
    return [net], report


def _train_system_segment(sys: FirstOrderSystem, start: float, end: float, ics,
                          cfg: TrainConfig):
    ics = np.asarray(ics, dtype=float)
    if ics.shape != (sys.dim,):
        raise ValueError(f"need {sys.dim} initial values")
    sub = sys.restricted(start, end, ics)
    sif = SystemIntegralForm(system=sub, lower_limit=start, init_values=ics)
    grid = UniformGrid(start, end, cfg.collocation_count)
    xs = grid.nodes()
    m = xs.size
    C = prefix_trapezoid_matrix(m, grid.spacing)
    Ct = C.T.copy()
    N = sys.dim

    # every species starts from the same seeded initial parameters
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
    V = np.empty((N, m))
    Q = np.empty((N, m))
    JR = np.empty((N, m))
    for epoch in range(1, cfg.epochs + 1):
        caches = []
        for k, net in enumerate(nets):
            v, acts, zs = network._forward_cached(net, xs)
            V[k] = v
            caches.append((acts, zs))
        U = ics[:, None] + V @ Ct
        for j in range(m):
            Q[:, j] = sub.rhs(U[:, j], xs[j])
        R = V - Q
        value = float(np.sum(np.mean(R * R, axis=1)))
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
            dv = (2.0 / m) * (R[k] - Ct @ JR[k])
            acts, zs = caches[k]
            grad = network._backprop(net, acts, zs, dv)
            adam_step(net, grad, opts[k])
    _restore(nets, best)
    wall = time.perf_counter() - t0

    for k, net in enumerate(nets):
        V[k] = network.forward_batch(net, xs)
    boundary = _system_boundary_state(sif, nets, V, grid, cfg)
    report = TrainReport(
        segment=(start, end),
        loss_history=history[:executed].copy(),
        initial_loss=float(history[0]),
        final_loss=best_loss,
        best_epoch=best_epoch,
        wall_time=wall,
        boundary_state=boundary,
    )
    return nets, report


def _use_simpson_transfer(cfg: TrainConfig, grid: UniformGrid) -> bool:
    if cfg.transfer_quadrature == SIMPSON:
        return True
    if cfg.transfer_quadrature == TRAPEZOID:
        return False
    # auto: fall back to the short-interval Simpson rule when the segment is
    # narrower than ten grid spacings (i.e. very few collocation points)
    return (grid.end - grid.start) < 10.0 * grid.spacing


def _linear_boundary_state(form: VolterraForm, net, v_values: np.ndarray,
                           grid: UniformGrid, cfg: TrainConfig) -> np.ndarray:
    if _use_simpson_transfer(cfg, grid):
        return higher_order_ic_transfer(
            [net], form, grid.end, quad=QuadratureRule(SIMPSON))
    n = form.source_order
    return np.array([reconstruct_grid(form, v_values, grid, k=k)[-1]
                     for k in range(n)])


def _system_boundary_state(sif: SystemIntegralForm, nets, V: np.ndarray,
                           grid: UniformGrid, cfg: TrainConfig) -> np.ndarray:
    if _use_simpson_transfer(cfg, grid):
        s, e = grid.start, grid.end
        mid = 0.5 * (s + e)
        va = np.array([_net_values(n, [s])[0] for n in nets])
        vm = np.array([_net_values(n, [mid])[0] for n in nets])
        vb = np.array([_net_values(n, [e])[0] for n in nets])
        return sif.init_values + (e - s) / 6.0 * (va + 4.0 * vm + vb)
    return system_state_grid(sif, V, grid)[:, -1]


def higher_order_ic_transfer(nets, form: VolterraForm, at: float,
                             quad: Optional[QuadratureRule] = None) -> np.ndarray:
    """Initial conditions (u, u', ..., u^(n-1)) at ``at`` for the successor
    segment, recovered from the trained v by iterated integration."""
    if quad is None:
        quad = QuadratureRule(TRAPEZOID, 101)
    net = nets[0]
    def v(t):
        return float(_net_values(net, [t])[0])
    n = form.source_order
    return np.array([reconstruct(form, v, k, at, quad) for k in range(n)])


def solve_sequential(problem, plan: SegmentPlan, on_segment=None):
    """Train one set of networks per segment, passing each segment's end state
    to the next as initial conditions, and concatenate the reconstructions.

    The first segment uses the problem's own initial conditions.  Returns
    ``(table, reports)``; the consumed initial conditions of segment i+1 are
    bitwise identical to ``reports[i].boundary_state``.  If a segment
    diverges the error carries the partial table built so far.  A plan may
    stop before the domain end (prefix runs of a long plan).

    ``on_segment(index, nets, report)``, when given, is called after each
    segment finishes, e.g. to checkpoint the trained networks.
    """
    if isinstance(problem, BenchmarkProblem):
        problem = problem.ivp if problem.ivp is not None else problem.system
    if isinstance(problem, LinearIVP):
        ics = np.asarray(problem.init_values, dtype=float)
        linear = True
    elif isinstance(problem, FirstOrderSystem):
        ics = problem.init_values.copy()
        linear = False
    else:
        raise TypeError(f"cannot solve a {type(problem).__name__}")
    a, b = problem.domain
    bounds = plan.boundaries
    scale = max(1.0, abs(a), abs(b))
    if abs(bounds[0] - a) > 1e-12 * scale:
        raise ValueError("plan must start where the initial conditions are defined")
    if bounds[-1] > b + 1e-12 * scale:
        raise ValueError("plan boundaries must stay inside the problem domain")

    cfg = plan.config
    reports: List[TrainReport] = []
    grids: List[np.ndarray] = []
    values: List[np.ndarray] = []
    derivs: List[np.ndarray] = []

    for i in range(plan.n_segments):
        start, end = bounds[i], bounds[i + 1]
        seg_cfg = dataclasses.replace(cfg, seed=cfg.seed + i)
        try:
            nets, report = train_segment(problem, (start, end), ics, seg_cfg)
        except TrainingDivergedError as exc:
            partial = _assemble_table(grids, values, derivs)
            raise SegmentDivergedError(
                f"segment {i} over [{start}, {end}] diverged: {exc}",
                segment_index=i, partial=partial) from exc

        grid = UniformGrid(start, end, seg_cfg.collocation_count)
        xs = grid.nodes()
        if linear:
            form = build_volterra(problem.restricted(start, end, ics))
            v = network.forward_batch(nets[0], xs)
            u = reconstruct_grid(form, v, grid, k=0)
            du = reconstruct_grid(form, v, grid, k=1) if problem.order > 1 else v
            seg_values = u[:, None]
            seg_derivs = du[:, None]
        else:
            sif = SystemIntegralForm(
                system=problem.restricted(start, end, ics),
                lower_limit=start, init_values=ics)
            V = np.stack([network.forward_batch(n, xs) for n in nets])
            U = system_state_grid(sif, V, grid)
            seg_values = U.T
            seg_derivs = V.T
        keep = slice(None) if i == 0 else slice(1, None)
        grids.append(xs[keep])
        values.append(seg_values[keep])
        derivs.append(seg_derivs[keep])
        reports.append(report)
        if on_segment is not None:
            on_segment(i, nets, report)
        ics = report.boundary_state
    table = _assemble_table(grids, values, derivs)
    return table, reports


def _assemble_table(grids, values, derivs) -> Optional[StateTable]:
    if not grids:
        return None
    return StateTable(
        grid=np.concatenate(grids),
        values=np.concatenate(values, axis=0),
        derivs=np.concatenate(derivs, axis=0),
    )
