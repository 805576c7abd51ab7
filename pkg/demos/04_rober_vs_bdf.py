#!/usr/bin/env python3
# The Robertson kinetics benchmark: three species with rate constants
# spanning nine orders of magnitude.  The weak-form networks are trained on
# a prefix of the 250-segment log-spaced plan and compared against the
# fixed-step implicit BDF integrator.
#
# Run: python demos/04_rober_vs_bdf.py            (first 10 segments, ~1.5 min)
#      VOLPINN_ROBER_SEGMENTS=250 python ...      (full plan, very long)

import os

import numpy as np

from volpinn import BdfConfig, SegmentPlan, TrainConfig, bdf_integrate, \
    get_problem, solve_sequential

n_segments = int(os.environ.get("VOLPINN_ROBER_SEGMENTS", "10"))

prob = get_problem("rober")
bounds = prob.default_boundaries[:n_segments + 1]
# loss_tolerance 0: no early stop, so the smallest species keeps improving
cfg = TrainConfig(collocation_count=101, epochs=5000, learning_rate=1e-3, seed=7,
                  loss_tolerance=0.0)

print(f"training {n_segments} sequential segments over "
      f"[{bounds[0]:.3e}, {bounds[-1]:.3e}]")
table, reports = solve_sequential(prob.system, SegmentPlan(bounds, cfg))
print(f"  summed best loss over segments: "
      f"{sum(r.final_loss for r in reports):.3e}")

# reference trajectory from the implicit integrator
span = (bounds[0], bounds[-1])
oracle = bdf_integrate(prob.system,
                       BdfConfig(order=2, step_size=(span[1] - span[0]) / 20000),
                       span)
ref = np.stack([np.interp(table.grid, oracle.grid, oracle.values[:, i])
                for i in range(3)], axis=1)

mass = table.values.sum(axis=1)
print(f"  mass u1+u2+u3 in [{mass.min():.9f}, {mass.max():.9f}]  (exactly 1 ideally)")
print(f"{'species':>8s} {'end value':>13s} {'BDF end':>13s} {'max |diff|':>12s}")
for i in range(3):
    print(f"{i + 1:8d} {table.values[-1, i]:13.6e} {ref[-1, i]:13.6e} "
          f"{np.max(np.abs(table.values[:, i] - ref[:, i])):12.3e}")

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)
path = os.path.join(OUT, "rober_vs_bdf.csv")
with open(path, "w") as fh:
    fh.write("x," + ",".join(f"net_{i+1}" for i in range(3))
             + "," + ",".join(f"bdf_{i+1}" for i in range(3)) + "\n")
    for j in range(table.grid.size):
        row = [table.grid[j], *table.values[j], *ref[j]]
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
print("wrote", path)
