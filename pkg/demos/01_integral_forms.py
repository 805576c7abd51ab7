#!/usr/bin/env python3
# Turning an initial value problem into a second-kind Volterra integral
# equation, and checking that the exact solution's highest derivative nulls
# the integral residual at the rate the quadrature order predicts.
#
# Run: python demos/01_integral_forms.py

import numpy as np

from volpinn import UniformGrid, build_volterra, get_problem
from volpinn.weakform import grid_residuals

# ---------------------------------------------------------------------------
# The stiff scalar benchmark: u' + 50 u = e^{-x}, u(0) = 2 on [0, 0.05].
# Substituting v = u' gives  v(x) + 50 * int_0^x v dt = e^{-x} - 100,
# so the kernel is the constant 50 and the initial condition lives inside
# the forcing; there is no separate initial-condition loss term.
# ---------------------------------------------------------------------------
prob = get_problem("case2")
form = build_volterra(prob.ivp)

print("stiff scalar problem:", prob.description)
print(f"  kernel psi(x, t)  = {form.kernel(0.03, 0.01):g}   (constant)")
print(f"  forcing g(0)      = {form.forcing(0.0):g}")
print(f"  forcing g(0.05)   = {form.forcing(0.05):.6f}")

# The exact derivative of the closed-form solution:
lam, mu0 = -50.0, 2.0
v_exact = lambda x: lam * (mu0 + 1 / (1 + lam)) * np.exp(lam * x) \
    + np.exp(-x) / (1 + lam)

# ---------------------------------------------------------------------------
# Residual-null refinement study.  With the exact v substituted, what remains
# of the residual is composite-trapezoid error, which shrinks ~4x each time
# the grid spacing halves.
# ---------------------------------------------------------------------------
print("\nresidual of the exact derivative vs grid size:")
print(f"{'points':>8s} {'max |R|':>12s} {'ratio':>7s}")
prev = None
for n in (101, 201, 401, 801, 1601):
    grid = UniformGrid(0.0, 0.05, n)
    R = grid_residuals(form, v_exact(grid.nodes()), grid)
    worst = np.max(np.abs(R))
    ratio = f"{prev / worst:6.2f}" if prev else "     -"
    print(f"{n:8d} {worst:12.3e} {ratio}")
    prev = worst

# ---------------------------------------------------------------------------
# The same machinery for the second-order oscillator: the kernel becomes a
# first-degree polynomial in (x - t) and the forcing absorbs both initial
# values (position and velocity).
# ---------------------------------------------------------------------------
prob1 = get_problem("case1")
form1 = build_volterra(prob1.ivp)
print("\nsecond-order problem:", prob1.description)
for x, t in ((0.1, 0.0), (0.1, 0.05), (0.4, 0.4)):
    print(f"  psi({x}, {t:4.2f}) = {form1.kernel(x, t):8.3f}"
          f"   [= 101 (x - t) + 2]")
print(f"  g(0.1) = {form1.forcing(0.1):g}   [= -(mu1 (101 x + 2) + 101 mu0)]")
