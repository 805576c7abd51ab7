"""Stiff-ODE solving with neural networks trained on the residual of an
equivalent second-kind Volterra integral equation.

An initial value problem is recast so the unknown is the highest derivative
v = u^(n); initial conditions move into the forcing of the integral equation,
leaving a single residual term to minimize.  Small fully-connected networks
(one per state variable) are trained per time segment, and segments are
chained by passing reconstructed end states forward as initial conditions,
which keeps stiff problems tractable.  An implicit BDF integrator and the
benchmark closed forms provide ground truth.
"""

from .problems import (
    BenchmarkProblem,
    EvaluationError,
    FirstOrderSystem,
    LinearIVP,
    StateTable,
    eval_linear_ode,
    eval_rhs,
    get_problem,
    list_problems,
    to_first_order,
)
from .quadrature import (
    QuadratureRule,
    UniformGrid,
    cumulative_trapezoid,
    simpson3,
    trapezoid,
)
from .weakform import (
    SystemIntegralForm,
    VolterraForm,
    build_volterra,
    reconstruct,
    residual,
    system_residual,
)
from .network import MLP, AdamState, Gradient, adam_step, forward_batch, grad_loss
from .training import (
    SegmentPlan,
    TrainConfig,
    TrainReport,
    higher_order_ic_transfer,
    loss,
    solve_sequential,
    train_segment,
)
from .baseline import ClassicalPinnConfig, classical_loss, input_derivative, train_classical
from .oracles import BdfConfig, bdf_integrate, exact_case1, exact_case2, exact_case3

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BdfConfig",
    "BenchmarkProblem",
    "ClassicalPinnConfig",
    "EvaluationError",
    "FirstOrderSystem",
    "Gradient",
    "LinearIVP",
    "MLP",
    "QuadratureRule",
    "SegmentPlan",
    "StateTable",
    "SystemIntegralForm",
    "TrainConfig",
    "TrainReport",
    "UniformGrid",
    "VolterraForm",
    "adam_step",
    "bdf_integrate",
    "build_volterra",
    "classical_loss",
    "cumulative_trapezoid",
    "eval_linear_ode",
    "eval_rhs",
    "exact_case1",
    "exact_case2",
    "exact_case3",
    "forward_batch",
    "get_problem",
    "grad_loss",
    "higher_order_ic_transfer",
    "input_derivative",
    "list_problems",
    "loss",
    "reconstruct",
    "residual",
    "simpson3",
    "solve_sequential",
    "system_residual",
    "to_first_order",
    "train_classical",
    "train_segment",
    "trapezoid",
]
