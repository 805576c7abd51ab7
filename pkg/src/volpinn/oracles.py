"""Ground-truth providers: closed-form solutions of the benchmark cases and a
fixed-step implicit BDF integrator (orders 1 and 2) with Newton iteration for
stiff systems without closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import FirstOrderSystem, StateTable, eval_rhs, system_jacobian


class StepFailureError(RuntimeError):
    """Newton iteration failed to converge; ``time_point`` locates the step."""

    def __init__(self, message: str, time_point: float):
        super().__init__(message)
        self.time_point = time_point


class IntegrationDivergedError(RuntimeError):
    """The integrator state became non-finite."""

    def __init__(self, message: str, time_point: float):
        super().__init__(message)
        self.time_point = time_point


def exact_case1(x, c: float, d: float, mu0: float, mu1: float):
    """Damped-oscillator solution of u'' - 2c u' + (c^2 + d^2) u = 0:

        u(x) = ((mu1 - c mu0)/d) e^{cx} sin(dx) + mu0 e^{cx} cos(dx)
    """
    if d == 0.0:
        raise ValueError("d must be nonzero")
    x = np.asarray(x, dtype=float)
    amp = (mu1 - c * mu0) / d
    return np.exp(c * x) * (amp * np.sin(d * x) + mu0 * np.cos(d * x))


def exact_case2(x, lam: float, mu0: float):
    """Solution of u' - lam u = e^{-x}, u(0) = mu0:

        u(x) = (mu0 + 1/(1 + lam)) e^{lam x} - e^{-x}/(1 + lam)
    """
    if lam == -1.0:
        raise ValueError("lam = -1 is resonant with the forcing")
    x = np.asarray(x, dtype=float)
    amp = mu0 + 1.0 / (1.0 + lam)
    return amp * np.exp(lam * x) - np.exp(-x) / (1.0 + lam)


def exact_case3(x, lam1: float, lam2: float, mu1: float, mu2: float):
    """Two-species coupled decay with shared modes e^{lam1 x}, e^{lam2 x}:

        u1 = s e^{lam1 x} + r e^{lam2 x},  u2 = s e^{lam1 x} - r e^{lam2 x}

    where s = (mu1 + mu2)/2 and r = (mu1 - mu2)/2.
    """
    x = np.asarray(x, dtype=float)
    s = 0.5 * (mu1 + mu2)
    r = 0.5 * (mu1 - mu2)
    e1 = np.exp(lam1 * x)
    e2 = np.exp(lam2 * x)
    return s * e1 + r * e2, s * e1 - r * e2


@dataclass(frozen=True)
class BdfConfig:
    """Fixed-step backward-differentiation settings."""

    order: int = 2
    step_size: float = 1e-5
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")


def _newton_solve(sys: FirstOrderSystem, guess: np.ndarray, rhs_coeff: float,
                  constant: np.ndarray, x: float, cfg: BdfConfig) -> np.ndarray:
    """Solve y - rhs_coeff * q(y, x) - constant = 0 by damped-free Newton."""
    y = guess.copy()
    eye = np.eye(sys.dim)
    for _ in range(cfg.newton_max_iter):
        F = y - rhs_coeff * eval_rhs(sys, y, x) - constant
        J = eye - rhs_coeff * system_jacobian(sys, y, x)
        delta = np.linalg.solve(J, -F)
        y = y + delta
        if not np.all(np.isfinite(y)):
            raise IntegrationDivergedError(
                f"state became non-finite at x={x}", time_point=x)
        if np.max(np.abs(delta)) < cfg.newton_tol:
            return y
    raise StepFailureError(
        f"Newton failed to converge within {cfg.newton_max_iter} iterations at x={x}",
        time_point=x)


def bdf_integrate(sys: FirstOrderSystem, cfg: BdfConfig, span) -> StateTable:
    """Integrate u' = q(u, x) over ``span`` with fixed-step BDF.

    Order 1 is the backward Euler step; order 2 uses the two-step backward
    formula bootstrapped with a single order-1 step.  Each implicit step is
    solved by Newton iteration using the analytic Jacobian when the system
    provides one, finite differences otherwise.  The step count is chosen so
    the grid lands exactly on the span endpoints.
    """
    a, b = float(span[0]), float(span[1])
    if not a < b:
        raise ValueError("span must be a nondegenerate interval")
    lo, hi = sys.domain
    if a < lo - 1e-12 or b > hi + 1e-12:
        raise ValueError("span must lie inside the system domain")
    n_steps = max(1, round((b - a) / cfg.step_size))
    h = (b - a) / n_steps
    xs = np.linspace(a, b, n_steps + 1)
    states = np.empty((n_steps + 1, sys.dim))
    states[0] = sys.init_values

    # first step: backward Euler (also the bootstrap for order 2)
    states[1] = _newton_solve(sys, states[0], h, states[0], xs[1], cfg)
    if cfg.order == 1:
        for n in range(2, n_steps + 1):
            states[n] = _newton_solve(sys, states[n - 1], h, states[n - 1], xs[n], cfg)
    else:
        for n in range(2, n_steps + 1):
            constant = (4.0 * states[n - 1] - states[n - 2]) / 3.0
            states[n] = _newton_solve(sys, states[n - 1], 2.0 * h / 3.0,
                                      constant, xs[n], cfg)
    return StateTable(grid=xs, values=states)
