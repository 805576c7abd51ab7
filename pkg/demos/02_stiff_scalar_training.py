#!/usr/bin/env python3
# Training a network on the single-term integral residual of the stiff
# scalar problem u' + 50 u = e^{-x}, u(0) = 2, and recovering u from the
# trained derivative.  Writes solution and convergence CSVs (and a PNG when
# matplotlib is importable) under demos/output/.
#
# Run: python demos/02_stiff_scalar_training.py  (about half a minute)

import os

import numpy as np

from volpinn import SegmentPlan, TrainConfig, exact_case2, get_problem, solve_sequential

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

prob = get_problem("case2")
cfg = TrainConfig(collocation_count=101, epochs=20000, learning_rate=1e-3, seed=7)
plan = SegmentPlan.single(0.0, 0.05, cfg)

print("training one network on", prob.description)
table, reports = solve_sequential(prob.ivp, plan)
report = reports[0]

exact = exact_case2(table.grid, -50.0, 2.0)
err = np.abs(table.values[:, 0] - exact)
print(f"  initial loss        {report.initial_loss:.3e}")
print(f"  best loss           {report.final_loss:.3e} "
      f"(epoch {report.best_epoch}, normalized {report.normalized_final:.2e})")
print(f"  max |u - u_exact|   {err.max():.3e}")
print(f"  wall time           {report.wall_time:.1f} s")

with open(os.path.join(OUT, "stiff_scalar_solution.csv"), "w") as fh:
    fh.write("x,predicted,exact,abs_err\n")
    for row in zip(table.grid, table.values[:, 0], exact, err):
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
report.to_csv(os.path.join(OUT, "stiff_scalar_convergence.csv"))
print("wrote", os.path.join(OUT, "stiff_scalar_solution.csv"))

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(table.grid, exact, label="exact")
    ax1.plot(table.grid, table.values[:, 0], "--", label="trained")
    ax1.set_xlabel("x")
    ax1.set_ylabel("u")
    ax1.legend()
    ax1.set_title("stiff scalar solution")
    ax2.semilogy(report.normalized_history)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("loss / initial loss")
    ax2.set_title("convergence history")
    fig.tight_layout()
    fig.savefig(os.path.join(OUT, "stiff_scalar.png"), dpi=120)
    print("wrote", os.path.join(OUT, "stiff_scalar.png"))
