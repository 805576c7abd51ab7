"""Problem definitions: linear initial value problems of arbitrary order,
first-order (possibly nonlinear) systems, and the built-in benchmark catalog.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class EvaluationError(RuntimeError):
    """A right-hand side produced a non-finite value.

    ``component`` is the index of the offending state variable.
    """

    def __init__(self, message: str, component: int):
        super().__init__(message)
        self.component = component


# ---------------------------------------------------------------------------
# coefficient / forcing function library
#
# Coefficients are plain callables of x.  The named builders below cover the
# closed-form benchmark cases and are addressable from config files, where
# arbitrary code cannot appear ("const:2.0", "exp:1.0:-1.0", "zero").
# ---------------------------------------------------------------------------

def const_fn(value: float) -> Callable[[float], float]:
    def f(x):
        return value + 0.0 * np.asarray(x)
    f.spec = f"const:{value!r}"
    return f


def exp_fn(scale: float = 1.0, rate: float = -1.0) -> Callable[[float], float]:
    def f(x):
        return scale * np.exp(rate * np.asarray(x))
    f.spec = f"exp:{scale!r}:{rate!r}"
    return f


zero_fn = const_fn(0.0)
zero_fn.spec = "zero"


def coefficient_from_spec(spec: str) -> Callable[[float], float]:
    """Parse a coefficient descriptor like ``const:2.0`` or ``exp:1.0:-1.0``."""
    parts = spec.strip().split(":")
    kind = parts[0]
    if kind == "zero":
        return zero_fn
    if kind == "const":
        return const_fn(float(parts[1]))
    if kind == "exp":
        scale = float(parts[1]) if len(parts) > 1 else 1.0
        rate = float(parts[2]) if len(parts) > 2 else -1.0
        return exp_fn(scale, rate)
    raise ValueError(f"unknown coefficient spec {spec!r}")


# ---------------------------------------------------------------------------
# problem types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearIVP:
    """Order-n linear ODE u^(n) + c_1(x) u^(n-1) + ... + c_n(x) u = f(x)
    with n initial values (u, u', ..., u^(n-1)) at the left endpoint.

    ``coeffs[i]`` multiplies the derivative of order ``n - 1 - i``.
    """

    order: int
    coeffs: tuple
    forcing: Callable[[float], float]
    domain: tuple
    init_values: tuple

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if len(self.coeffs) != self.order:
            raise ValueError("need exactly one coefficient per derivative order")
        if len(self.init_values) != self.order:
            raise ValueError("need exactly one initial value per derivative order")
        a, b = self.domain
        if not a < b:
            raise ValueError("domain must be a nondegenerate interval")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        object.__setattr__(self, "domain", (float(a), float(b)))
        object.__setattr__(self, "init_values", tuple(float(v) for v in self.init_values))

    def restricted(self, start: float, end: float, init_values) -> "LinearIVP":
        """The same equation posed on a sub-interval with fresh initial values."""
        a, b = self.domain
        if start < a - 1e-12 or end > b + 1e-12:
            raise ValueError("sub-interval must lie inside the problem domain")
        return dataclasses.replace(
            self, domain=(start, end), init_values=tuple(float(v) for v in init_values)
        )


@dataclass(frozen=True)
class FirstOrderSystem:
    """N-dimensional first-order system u' = q(u, x) with u(a) given.

    ``jacobian(u, x)``, when supplied, returns the N x N matrix dq/du; the
    implicit integrator uses it for Newton iterations and the trainer for
    exact residual gradients.  Omitting it falls back to finite differences.
    """

    dim: int
    rhs: Callable[[np.ndarray, float], np.ndarray]
    domain: tuple
    init_values: np.ndarray
    jacobian: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        a, b = self.domain
        if not a < b:
            raise ValueError("domain must be a nondegenerate interval")
        ics = np.asarray(self.init_values, dtype=float)
        if ics.shape != (self.dim,):
            raise ValueError("init_values length must equal dim")
        object.__setattr__(self, "domain", (float(a), float(b)))
        object.__setattr__(self, "init_values", ics)

    def restricted(self, start: float, end: float, init_values) -> "FirstOrderSystem":
        a, b = self.domain
        if start < a - 1e-12 or end > b + 1e-12:
            raise ValueError("sub-interval must lie inside the problem domain")
        return dataclasses.replace(
            self, domain=(start, end), init_values=np.asarray(init_values, dtype=float)
        )


@dataclass
class StateTable:
    """A trajectory: strictly increasing time grid, per-point state vectors,
    and optional per-point first derivatives."""

    grid: np.ndarray
    values: np.ndarray
    derivs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.grid.size:
            self.values = self.values.T
        if self.values.shape[0] != self.grid.size:
            raise ValueError("values row count must equal grid length")
        if np.any(np.diff(self.grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.grid)) or not np.all(np.isfinite(self.values)):
            raise ValueError("state table entries must be finite")
        if self.derivs is not None:
            self.derivs = np.atleast_2d(np.asarray(self.derivs, dtype=float))
            if self.derivs.shape[0] != self.grid.size:
                self.derivs = self.derivs.T
            if self.derivs.shape != self.values.shape:
                raise ValueError("derivs shape must match values")

    @property
    def dim(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_linear_ode(ivp: LinearIVP, u_derivs, x: float) -> float:
    """Strong-form residual u^(n) + sum_j c_{n-j}(x) u^(j) - f(x).

    ``u_derivs`` lists u(x), u'(x), ..., u^(n)(x); the result is zero exactly
    when that derivative tuple satisfies the equation at x.
    """
    a, b = ivp.domain
    if x < a or x > b:
        raise ValueError(f"x={x} outside problem domain [{a}, {b}]")
    u_derivs = np.asarray(u_derivs, dtype=float)
    if u_derivs.size != ivp.order + 1:
        raise ValueError("u_derivs must list u and its first n derivatives")
    n = ivp.order
    total = u_derivs[n]
    for j in range(n):
        total += float(ivp.coeffs[n - j - 1](x)) * u_derivs[j]
    return float(total - ivp.forcing(x))


def eval_rhs(sys: FirstOrderSystem, u, x: float) -> np.ndarray:
    """Evaluate q(u, x), guarding against non-finite output."""
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.dim,):
        raise ValueError(f"state must have length {sys.dim}")
    out = np.asarray(sys.rhs(u, x), dtype=float)
    if out.shape != (sys.dim,):
        raise ValueError("rhs output length must equal dim")
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise EvaluationError(
            f"rhs component {bad[0]} is non-finite at x={x}", component=int(bad[0])
        )
    return out


def numerical_jacobian(sys: FirstOrderSystem, u, x: float) -> np.ndarray:
    """Forward-difference dq/du with step 1e-8 * max(1, |u_i|) per column."""
    u = np.asarray(u, dtype=float)
    base = eval_rhs(sys, u, x)
    J = np.empty((sys.dim, sys.dim))
    for i in range(sys.dim):
        step = 1e-8 * max(1.0, abs(u[i]))
        up = u.copy()
        up[i] += step
        J[:, i] = (eval_rhs(sys, up, x) - base) / step
    return J


def system_jacobian(sys: FirstOrderSystem, u, x: float) -> np.ndarray:
    """Analytic Jacobian when available, finite differences otherwise."""
    if sys.jacobian is not None:
        return np.asarray(sys.jacobian(np.asarray(u, dtype=float), x), dtype=float)
    return numerical_jacobian(sys, u, x)


def to_first_order(ivp: LinearIVP) -> FirstOrderSystem:
    """Companion first-order system for an order-n linear equation.

    State vector is (u, u', ..., u^(n-1)); the last row applies the ODE.
    """
    n = ivp.order
    coeffs = ivp.coeffs
    forcing = ivp.forcing

    def rhs(u, x):
        out = np.empty(n)
        out[:-1] = u[1:]
        acc = float(forcing(x))
        for j in range(n):
            acc -= float(coeffs[n - j - 1](x)) * u[j]
        out[-1] = acc
        return out

    def jacobian(u, x):
        J = np.zeros((n, n))
        for i in range(n - 1):
            J[i, i + 1] = 1.0
        for j in range(n):
            J[n - 1, j] = -float(coeffs[n - j - 1](x))
        return J

    return FirstOrderSystem(
        dim=n,
        rhs=rhs,
        domain=ivp.domain,
        init_values=np.asarray(ivp.init_values, dtype=float),
        jacobian=jacobian,
    )


# ---------------------------------------------------------------------------
# benchmark catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkProblem:
    """A named benchmark: the problem object, its exact solution when one is
    known in closed form, and default run settings."""

    name: str
    description: str
    ivp: Optional[LinearIVP]
    system: Optional[FirstOrderSystem]
    exact: Optional[Callable[[np.ndarray], np.ndarray]]
    default_boundaries: tuple
    default_epochs: int

    @property
    def n_outputs(self) -> int:
        """Number of state columns reported (1 for a scalar equation)."""
        return 1 if self.ivp is not None else self.system.dim


def _case1(c: float = -1.0, d: float = 10.0, mu0: float = 1.0, mu1: float = 10.0,
           domain=(0.0, 0.4)) -> BenchmarkProblem:
    from . import oracles

    ivp = LinearIVP(
        order=2,
        coeffs=(const_fn(-2.0 * c), const_fn(c * c + d * d)),
        forcing=zero_fn,
        domain=domain,
        init_values=(mu0, mu1),
    )

    def exact(xs):
        return oracles.exact_case1(np.asarray(xs, dtype=float), c, d, mu0, mu1)[:, None]

    mid = domain[0] + 0.25 * (domain[1] - domain[0])
    return BenchmarkProblem(
        name="case1",
        description=(f"mild second-order oscillator, c={c}, d={d}, "
                     f"u(a)=({mu0}, {mu1}), domain {domain}"),
        ivp=ivp, system=None, exact=exact,
        default_boundaries=(domain[0], mid, domain[1]),
        default_epochs=20000,
    )


def _case2(lam: float = -50.0, mu0: float = 2.0, domain=(0.0, 0.05)) -> BenchmarkProblem:
    from . import oracles

    ivp = LinearIVP(
        order=1,
        coeffs=(const_fn(-lam),),
        forcing=exp_fn(1.0, -1.0),
        domain=domain,
        init_values=(mu0,),
    )

    def exact(xs):
        return oracles.exact_case2(np.asarray(xs, dtype=float), lam, mu0)[:, None]

    return BenchmarkProblem(
        name="case2",
        description=f"stiff scalar first-order decay, lambda={lam}, u(a)={mu0}, domain {domain}",
        ivp=ivp, system=None, exact=exact,
        default_boundaries=tuple(domain),
        default_epochs=20000,
    )


def _case3(lam1: float = -20.0, lam2: float = -2.0, mu1: float = 2.0, mu2: float = 0.0,
           domain=(0.0, 1.0), segments: int = 5) -> BenchmarkProblem:
    from . import oracles

    p = 0.5 * (lam1 + lam2)
    q = 0.5 * (lam1 - lam2)
    A = np.array([[p, q], [q, p]])

    def rhs(u, x):
        return A @ u

    def jacobian(u, x):
        return A.copy()

    system = FirstOrderSystem(
        dim=2, rhs=rhs, domain=domain,
        init_values=np.array([mu1, mu2]), jacobian=jacobian,
    )

    def exact(xs):
        u1, u2 = oracles.exact_case3(np.asarray(xs, dtype=float), lam1, lam2, mu1, mu2)
        return np.stack([u1, u2], axis=1)

    bounds = tuple(np.linspace(domain[0], domain[1], int(segments) + 1))
    return BenchmarkProblem(
        name="case3",
        description=(f"stiff linear two-species system, rates ({lam1}, {lam2}), "
                     f"u(a)=({mu1}, {mu2}), domain {domain}"),
        ivp=None, system=system, exact=exact,
        default_boundaries=bounds,
        default_epochs=20000,
    )


def _rober(k1: float = 0.04, k2: float = 3.0e7, k3: float = 1.0e4,
           domain=(1.0e-5, 1.0e-1), segments: int = 250) -> BenchmarkProblem:
    def rhs(u, x):
        r1 = k1 * u[0]
        r2 = k2 * u[1] * u[1]
        r3 = k3 * u[1] * u[2]
        return np.array([-r1 + r3, r1 - r2 - r3, r2])

    def jacobian(u, x):
        return np.array([
            [-k1, k3 * u[2], k3 * u[1]],
            [k1, -2.0 * k2 * u[1] - k3 * u[2], -k3 * u[1]],
            [0.0, 2.0 * k2 * u[1], 0.0],
        ])

    system = FirstOrderSystem(
        dim=3, rhs=rhs, domain=domain,
        init_values=np.array([1.0, 0.0, 0.0]), jacobian=jacobian,
    )
    # decade-spanning problem: segment boundaries are log-spaced by default
    bounds = tuple(np.geomspace(domain[0], domain[1], int(segments) + 1))
    return BenchmarkProblem(
        name="rober",
        description=(f"Robertson autocatalytic kinetics, k=({k1}, {k2}, {k3}), "
                     f"u(a)=(1, 0, 0), domain {domain}, {segments} log-spaced segments"),
        ivp=None, system=system, exact=None,
        default_boundaries=bounds,
        default_epochs=5000,
    )


PROBLEM_BUILDERS = {
    "case1": _case1,
    "case2": _case2,
    "case3": _case3,
    "rober": _rober,
}


def get_problem(name: str, **overrides) -> BenchmarkProblem:
    """Build a catalog problem by name; keyword overrides replace parameters."""
    try:
        builder = PROBLEM_BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(PROBLEM_BUILDERS)}")
    return builder(**overrides)


def list_problems() -> list:
    """(name, description) pairs for every catalog entry with default parameters."""
    return [(name, PROBLEM_BUILDERS[name]().description)
            for name in sorted(PROBLEM_BUILDERS)]
