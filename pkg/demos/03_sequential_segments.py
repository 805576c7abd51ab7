#!/usr/bin/env python3
# Sequential training: the domain is split into segments, one network set is
# trained per segment, and each segment hands its reconstructed end state to
# the next one as initial conditions.  Shown on the mild second-order
# oscillator (two segments, with a derivative in the handoff) and the stiff
# two-species linear system (five segments).
#
# Run: python demos/03_sequential_segments.py  (a couple of minutes)

import numpy as np

from volpinn import SegmentPlan, TrainConfig, exact_case3, get_problem, solve_sequential
from volpinn.oracles import exact_case1

cfg = TrainConfig(collocation_count=101, epochs=8000, learning_rate=1e-3, seed=7)

# ---------------------------------------------------------------------------
# Second-order oscillator on [0, 0.4], segments [0, 0.1] and [0.1, 0.4].
# The handoff carries (u, u') because the source equation is order 2.
# ---------------------------------------------------------------------------
prob = get_problem("case1")
plan = SegmentPlan((0.0, 0.1, 0.4), cfg)
table, reports = solve_sequential(prob.ivp, plan)
exact = exact_case1(table.grid, -1.0, 10.0, 1.0, 10.0)
print("oscillator, two segments:")
for i, rep in enumerate(reports):
    print(f"  segment {i} {rep.segment}: best loss {rep.final_loss:.3e} "
          f"(normalized {rep.normalized_final:.1e}), "
          f"handoff state {np.array2string(rep.boundary_state, precision=6)}")
print(f"  exact state at 0.1: ({exact_case1(0.1, -1, 10, 1, 10):.6f}, ...)")
print(f"  max |u - u_exact| over [0, 0.4]: {np.max(np.abs(table.values[:, 0] - exact)):.3e}")

# ---------------------------------------------------------------------------
# Stiff linear system on [0, 1] with five equal segments and one network per
# species; the residual of each species couples both networks through the
# reconstructed state.
# ---------------------------------------------------------------------------
prob3 = get_problem("case3")
plan3 = SegmentPlan.uniform(0.0, 1.0, 5, cfg)
table3, reports3 = solve_sequential(prob3.system, plan3)
u1, u2 = exact_case3(table3.grid, -20.0, -2.0, 2.0, 0.0)
err1 = np.max(np.abs(table3.values[:, 0] - u1))
err2 = np.max(np.abs(table3.values[:, 1] - u2))
print("\ntwo-species stiff system, five segments:")
for i, rep in enumerate(reports3):
    print(f"  segment {i} {rep.segment}: best loss {rep.final_loss:.3e}")
print(f"  max species errors: {err1:.3e}, {err2:.3e}")
