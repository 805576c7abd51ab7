"""Second-kind Volterra integral forms of initial value problems.

An order-n linear IVP for u is recast as an integral equation for
v = u^(n):

    v(x) + integral_a^x  psi(x, t) v(t) dt  =  g(x)

The kernel psi collects the ODE coefficients against powers of (x - t); the
forcing g absorbs both the ODE forcing and the initial conditions, so a
single residual drives the whole fit.  u and its lower derivatives are
recovered from v by iterated integration.  First-order nonlinear systems use
the analogous substitution v_i = u_i' with residual v_i - q_i(u(x), x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problems import FirstOrderSystem, LinearIVP, eval_rhs
from .quadrature import (
    SIMPSON,
    QuadratureRule,
    UniformGrid,
    cumulative_trapezoid,
    prefix_trapezoid_matrix,
    simpson3,
    trapezoid,
)


@dataclass(frozen=True)
class VolterraForm:
    """Integral form of one scalar equation of order ``source_order``.

    ``kernel(x, t)`` is a polynomial in (x - t) of degree source_order - 1
    with x-dependent coefficients; ``forcing(x)`` carries the ODE forcing and
    the initial-condition terms.
    """

    kernel: Callable[[float, float], float]
    forcing: Callable[[float], float]
    domain: tuple
    source_order: int
    coeffs: tuple = ()
    init_values: tuple = ()
    inv_factorials: tuple = field(default=(), repr=False)

    def __post_init__(self):
        a, b = self.domain
        if not a < b:
            raise ValueError("domain must be a nondegenerate interval")


@dataclass(frozen=True)
class SystemIntegralForm:
    """Integral form of a first-order system: u(x) = mu + integral of v."""

    system: FirstOrderSystem
    lower_limit: float
    init_values: np.ndarray

    def __post_init__(self):
        a, b = self.system.domain
        if not (a - 1e-12 <= self.lower_limit < b):
            raise ValueError("lower limit must lie inside the system domain")
        ics = np.asarray(self.init_values, dtype=float)
        if ics.shape != (self.system.dim,):
            raise ValueError("init_values length must equal system dimension")
        object.__setattr__(self, "init_values", ics)


def build_volterra(ivp: LinearIVP) -> VolterraForm:
    """Assemble the kernel and forcing of the integral form of ``ivp``.

    With coefficients c_1..c_n (c_i against u^(n-i)) and initial values
    mu_0..mu_{n-1} at x = a:

        psi(x, t) = sum_{k=0}^{n-1} c_{k+1}(x) (x - t)^k / k!
        g(x) = f(x) - sum_{j=0}^{n-1} sum_{i=0}^{n-j-1}
                      mu_{n-i-1} c_{n-j}(x) (x - a)^{n-j-i-1} / (n-j-i-1)!
    """
    n = ivp.order
    coeffs = ivp.coeffs
    mus = ivp.init_values
    a = ivp.domain[0]
    inv_fact = tuple(1.0 / math.factorial(k) for k in range(n + 1))

    def kernel(x, t):
        acc = 0.0
        for k in range(n):
            acc += coeffs[k](x) * (x - t) ** k * inv_fact[k]
        return acc

    forcing_fn = ivp.forcing

    def forcing(x):
        acc = forcing_fn(x) + 0.0 * np.asarray(x, dtype=float)
        for j in range(n):
            cj = coeffs[n - j - 1](x)
            for i in range(n - j):
                p = n - j - i - 1
                acc = acc - mus[n - i - 1] * cj * (np.asarray(x) - a) ** p * inv_fact[p]
        return acc

    return VolterraForm(
        kernel=kernel,
        forcing=forcing,
        domain=ivp.domain,
        source_order=n,
        coeffs=coeffs,
        init_values=mus,
        inv_factorials=inv_fact,
    )


def residual(form: VolterraForm, v: Callable, x: float, quad: QuadratureRule) -> float:
    """R(x) = v(x) + integral_a^x psi(x, t) v(t) dt - g(x).

    The integral is approximated with ``quad`` on [a, x]; at x = a it is
    exactly zero.
    """
    a, b = form.domain
    if x < a or x > b:
        raise ValueError(f"x={x} outside domain [{a}, {b}]")
    if x == a:
        return float(v(a) - form.forcing(a))
    if quad.kind == SIMPSON:
        mid = 0.5 * (a + x)
        integral = simpson3(
            form.kernel(x, a) * v(a),
            form.kernel(x, mid) * v(mid),
            form.kernel(x, x) * v(x),
            a, x,
        )
    else:
        if quad.points < 2:
            raise ValueError("residual needs at least 2 quadrature points")
        ts = np.linspace(a, x, quad.points)
        hs = np.array([form.kernel(x, t) * v(t) for t in ts], dtype=float)
        integral = trapezoid(hs, ts[1] - ts[0])
    return float(v(x) + integral - form.forcing(x))


def _power_moments(xs: np.ndarray, v_values: np.ndarray, spacing: float,
                   max_power: int, origin: float) -> np.ndarray:
    """Running integrals M_p(x_j) = integral over the prefix of (t - origin)^p v(t),
    p = 0..max_power.  Powers are taken about ``origin`` so the terms stay
    bounded by the interval width instead of the absolute time."""
    M = np.empty((max_power + 1, xs.size))
    shifted = xs - origin
    tp = np.ones_like(xs)
    for p in range(max_power + 1):
        M[p] = cumulative_trapezoid(tp * v_values, spacing)
        tp = tp * shifted
    return M


def _prefix_power_integrals(xs: np.ndarray, v_values: np.ndarray, spacing: float,
                            power: int, origin: float) -> np.ndarray:
    """Running integrals of (x_j - t)^power v(t) over the grid prefix, via the
    binomial expansion (x - t)^power = ((x - a) - (t - a))^power against
    origin-shifted moments."""
    M = _power_moments(xs, v_values, spacing, power, origin)
    out = np.zeros_like(xs)
    shifted = xs - origin
    for i in range(power + 1):
        out += math.comb(power, i) * (-1.0) ** i * shifted ** (power - i) * M[i]
    return out


def grid_residuals(form: VolterraForm, v_values, grid: UniformGrid) -> np.ndarray:
    """Residuals at every grid node in one pass.

    The running integral at each node uses the cumulative trapezoid weights of
    the grid prefix, so the whole collocation set costs O(n * order) instead
    of one quadrature per node.
    """
    xs = grid.nodes()
    v_values = np.asarray(v_values, dtype=float)
    if v_values.shape != xs.shape:
        raise ValueError("v_values must match the grid")
    n = form.source_order
    integral = np.zeros_like(xs)
    for k in range(n):
        ck = np.asarray(form.coeffs[k](xs), dtype=float) + np.zeros_like(xs)
        integral += ck * form.inv_factorials[k] * _prefix_power_integrals(
            xs, v_values, grid.spacing, k)
    return v_values + integral - np.asarray(form.forcing(xs), dtype=float)


def kernel_prefix_matrix(form: VolterraForm, grid: UniformGrid) -> np.ndarray:
    """Matrix K with (K @ v)_j = running integral of psi(x_j, .) v at node j.

    K[j, l] combines the prefix trapezoid weight of node l with the kernel
    value psi(x_j, x_l); it is lower triangular and fixed for a given grid,
    so residuals and their exact v-gradients are single mat-vecs.
    """
    xs = grid.nodes()
    C = prefix_trapezoid_matrix(grid.count, grid.spacing)
    n = form.source_order
    psi = np.zeros((grid.count, grid.count))
    diff = xs[:, None] - xs[None, :]
    for k in range(n):
        ck = np.asarray(form.coeffs[k](xs), dtype=float) + np.zeros_like(xs)
        psi += ck[:, None] * diff ** k * form.inv_factorials[k]
    return C * psi


def reconstruct(form_or_system, v: Callable, k: int, x: float,
                quad: QuadratureRule) -> float | np.ndarray:
    """Recover u^(k)(x) from v.

    For a scalar form of order n (0 <= k <= n-1):

        u^(k)(x) = integral_a^x (x-t)^{n-k-1}/(n-k-1)! v(t) dt
                   + sum_{i=0}^{n-k-1} mu_{n-i-1} (x-a)^{n-k-i-1}/(n-k-i-1)!

    For a system form, k must be 0 and v must return state-length vectors.
    """
    if isinstance(form_or_system, SystemIntegralForm):
        if k != 0:
            raise ValueError("system reconstruction is defined for k = 0 only")
        return _reconstruct_system(form_or_system, v, x, quad)
    form = form_or_system
    n = form.source_order
    if k < 0 or k >= n:
        raise ValueError(f"derivative order k={k} must satisfy 0 <= k < {n}")
    a, b = form.domain
    if x < a or x > b:
        raise ValueError(f"x={x} outside domain [{a}, {b}]")
    p = n - k - 1
    taylor = 0.0
    for i in range(n - k):
        q = n - k - i - 1
        taylor += form.init_values[n - i - 1] * (x - a) ** q * form.inv_factorials[q]
    if x == a:
        return float(taylor)
    if quad.kind == SIMPSON:
        mid = 0.5 * (a + x)
        end_value = v(x) if p == 0 else 0.0   # (x - t)^p vanishes at t = x for p > 0
        integral = simpson3(
            (x - a) ** p * v(a), (x - mid) ** p * v(mid), end_value, a, x)
    else:
        ts = np.linspace(a, x, quad.points)
        hs = np.array([(x - t) ** p * v(t) for t in ts], dtype=float)
        integral = trapezoid(hs, ts[1] - ts[0])
    return float(integral * form.inv_factorials[p] + taylor)


def _reconstruct_system(sif: SystemIntegralForm, v: Callable, x: float,
                        quad: QuadratureRule) -> np.ndarray:
    a = sif.lower_limit
    if x == a:
        return sif.init_values.copy()
    if quad.kind == SIMPSON:
        mid = 0.5 * (a + x)
        va, vm, vb = (np.asarray(v(t), dtype=float) for t in (a, mid, x))
        integral = (x - a) / 6.0 * (va + 4.0 * vm + vb)
    else:
        ts = np.linspace(a, x, quad.points)
        vs = np.array([v(t) for t in ts], dtype=float)
        dt = ts[1] - ts[0]
        integral = np.array([trapezoid(vs[:, i], dt) for i in range(vs.shape[1])])
    return sif.init_values + integral


def reconstruct_grid(form: VolterraForm, v_values, grid: UniformGrid,
                     k: int = 0) -> np.ndarray:
    """u^(k) at every grid node from v sampled on the same grid."""
    n = form.source_order
    if k < 0 or k >= n:
        raise ValueError(f"derivative order k={k} must satisfy 0 <= k < {n}")
    xs = grid.nodes()
    v_values = np.asarray(v_values, dtype=float)
    a = form.domain[0]
    p = n - k - 1
    out = form.inv_factorials[p] * _prefix_power_integrals(xs, v_values, grid.spacing, p)
    for i in range(n - k):
        q = n - k - i - 1
        out += form.init_values[n - i - 1] * (xs - a) ** q * form.inv_factorials[q]
    return out


def system_state_grid(sif: SystemIntegralForm, v_values, grid: UniformGrid) -> np.ndarray:
    """u_k(x_j) = mu_k + running integral of v_k, for every species row."""
    V = np.atleast_2d(np.asarray(v_values, dtype=float))
    if V.shape[1] != grid.count:
        raise ValueError("v_values columns must match the grid")
    U = np.empty_like(V)
    for i in range(V.shape[0]):
        U[i] = sif.init_values[i] + cumulative_trapezoid(V[i], grid.spacing)
    return U


def system_grid_residuals(sif: SystemIntegralForm, v_values, grid: UniformGrid,
                          state: np.ndarray | None = None) -> np.ndarray:
    """Rows R_i(x_j) = v_i(x_j) - q_i(u(x_j), x_j) over the whole grid."""
    V = np.atleast_2d(np.asarray(v_values, dtype=float))
    if V.shape[0] != sif.system.dim:
        raise ValueError("one v row per state variable is required")
    xs = grid.nodes()
    U = system_state_grid(sif, V, grid) if state is None else state
    Q = np.empty_like(V)
    for j in range(xs.size):
        Q[:, j] = eval_rhs(sif.system, U[:, j], xs[j])
    return V - Q


def system_residual(sif: SystemIntegralForm, v: Callable, x: float,
                    quad: QuadratureRule) -> np.ndarray:
    """Residual vector v(x) - q(u(x), x) with u recovered from v by ``quad``."""
    a, b = sif.system.domain
    if x < a or x > b:
        raise ValueError(f"x={x} outside domain [{a}, {b}]")
    u = _reconstruct_system(sif, v, x, quad)
    vx = np.asarray(v(x), dtype=float)
    if vx.shape != (sif.system.dim,):
        raise ValueError("v must return one value per state variable")
    return vx - eval_rhs(sif.system, u, x)
