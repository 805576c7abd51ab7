"""Command-line entry point: run benchmark problems with the weak-form
trainer, the classical strong-form baseline, or the implicit BDF oracle, and
emit plot-ready CSV files (solution curves, per-segment convergence
histories) plus a run summary.

Exit codes: 0 success, 2 unknown problem, 3 malformed configuration,
4 unwritable output directory, 5 training or integration failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import baseline, oracles, problems, training
from .problems import BenchmarkProblem, LinearIVP, StateTable, to_first_order
from .quadrature import TRAPEZOID
from .training import SegmentPlan, TrainConfig

OUTDIR_ENV = "VOLPINN_OUTDIR"

EXIT_OK = 0
EXIT_UNKNOWN_PROBLEM = 2
EXIT_BAD_CONFIG = 3
EXIT_UNWRITABLE = 4
EXIT_DIVERGED = 5


@dataclass
class RunConfig:
    """Everything one ``solve`` invocation needs."""

    problem: str = ""
    problem_params: dict = field(default_factory=dict)
    inline: Optional[dict] = None
    method: str = "reduced"              # reduced | classical | bdf
    segments: Optional[str] = None       # boundary list / count / logN / first:K
    save_nets: bool = False
    collocation: int = 101
    epochs: Optional[int] = None         # None: problem default
    learning_rate: float = 1e-3
    loss_tolerance: float = 1e-10
    quadrature: str = "auto"
    seed: int = 0
    bdf_order: int = 2
    bdf_step: float = 1e-5
    out_dir: str = ""

    def validate(self):
        if self.method not in ("reduced", "classical", "bdf"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.collocation < 2:
            raise ValueError("collocation must be at least 2")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be at least 1")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_csv(path, header, columns) -> None:
    """Write named columns with 17-significant-digit floats."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(float(v)) for v in row) + "\n")


def _parse_floats(text: str):
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


def resolve_boundaries(spec: Optional[str], problem: BenchmarkProblem) -> tuple:
    """Turn a segment spec into boundary values.

    Accepted forms: ``0,0.1,0.4`` (explicit boundaries), ``5`` (uniform
    segment count), ``log25`` (log-spaced count), ``first:25`` (prefix of the
    problem's default plan).  Omitted: the problem's default plan.
    """
    if spec is None or not spec.strip():
        return tuple(problem.default_boundaries)
    spec = spec.strip()
    a, b = (problem.ivp or problem.system).domain
    if spec.startswith("first:"):
        k = int(spec.split(":", 1)[1])
        defaults = problem.default_boundaries
        if not 1 <= k <= len(defaults) - 1:
            raise ValueError(f"first:{k} outside the default plan size")
        return tuple(defaults[:k + 1])
    if spec.startswith("log"):
        return tuple(np.geomspace(a, b, int(spec[3:]) + 1))
    if "," in spec:
        return tuple(_parse_floats(spec))
    return tuple(np.linspace(a, b, int(spec) + 1))


def _problem_from_inline(section: dict) -> BenchmarkProblem:
    kind = section.get("kind", "linear")
    if kind != "linear":
        raise ValueError("inline problem definitions support kind = linear only")
    order = int(section["order"])
    coeffs = tuple(problems.coefficient_from_spec(s)
                   for s in section["coeffs"].split(","))
    forcing = problems.coefficient_from_spec(section.get("forcing", "zero"))
    domain = tuple(_parse_floats(section["domain"]))
    init = tuple(_parse_floats(section["init"]))
    ivp = LinearIVP(order=order, coeffs=coeffs, forcing=forcing,
                    domain=domain, init_values=init)

    def exact_by_bdf(xs):
        sysm = to_first_order(ivp)
        cfg = oracles.BdfConfig(order=2, step_size=(domain[1] - domain[0]) / 20000)
        table = oracles.bdf_integrate(sysm, cfg, domain)
        return np.interp(np.asarray(xs), table.grid, table.values[:, 0])[:, None]

    return BenchmarkProblem(
        name=section.get("name", "inline"),
        description="inline linear problem",
        ivp=ivp, system=None, exact=exact_by_bdf,
        default_boundaries=domain,
        default_epochs=20000,
    )


def load_config_file(path) -> RunConfig:
    """Read a key = value config file with [problem]/[train]/[output] sections."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path}")
    cfg = RunConfig()
    if parser.has_section("problem"):
        sec = dict(parser["problem"])
        if "kind" in sec or "coeffs" in sec:
            cfg.inline = sec
        else:
            cfg.problem = sec.pop("name", "")
            cfg.problem_params = {k: float(v) for k, v in sec.items()}
    if parser.has_section("train"):
        sec = parser["train"]
        cfg.epochs = sec.getint("epochs", fallback=None)
        cfg.learning_rate = sec.getfloat("lr", fallback=cfg.learning_rate)
        cfg.loss_tolerance = sec.getfloat("loss_tol", fallback=cfg.loss_tolerance)
        cfg.collocation = sec.getint("collocation", fallback=cfg.collocation)
        cfg.seed = sec.getint("seed", fallback=cfg.seed)
        cfg.quadrature = sec.get("quadrature", fallback=cfg.quadrature)
        cfg.method = sec.get("method", fallback=cfg.method)
        cfg.segments = sec.get("segments", fallback=cfg.segments)
    if parser.has_section("bdf"):
        sec = parser["bdf"]
        cfg.bdf_order = sec.getint("order", fallback=cfg.bdf_order)
        cfg.bdf_step = sec.getfloat("step", fallback=cfg.bdf_step)
    if parser.has_section("output"):
        cfg.out_dir = parser["output"].get("dir", fallback=cfg.out_dir)
    return cfg


def _build_problem(cfg: RunConfig) -> BenchmarkProblem:
    if cfg.inline is not None:
        return _problem_from_inline(cfg.inline)
    params = dict(cfg.problem_params)
    return problems.get_problem(cfg.problem, **params)


def _reference_values(problem: BenchmarkProblem, xs: np.ndarray,
                      cfg: RunConfig, refine: bool = False) -> np.ndarray:
    """Reference trajectory on ``xs``: the closed form when one exists, a
    fine-step implicit integration otherwise.  ``refine`` halves the
    reference step so that a bdf-method run is checked against its own
    refinement rather than against itself."""
    if problem.exact is not None:
        return np.asarray(problem.exact(xs))
    sysm = problem.system if problem.system is not None else to_first_order(problem.ivp)
    span = (float(xs[0]), float(xs[-1]))
    step = 0.5 * cfg.bdf_step if refine else cfg.bdf_step
    n = max(1000, round((span[1] - span[0]) / step))
    bdf_cfg = oracles.BdfConfig(order=2, step_size=(span[1] - span[0]) / n)
    table = oracles.bdf_integrate(sysm, bdf_cfg, span)
    cols = [np.interp(xs, table.grid, table.values[:, i])
            for i in range(problem.n_outputs)]
    return np.stack(cols, axis=1)


def _train_config(cfg: RunConfig, problem: BenchmarkProblem) -> TrainConfig:
    epochs = cfg.epochs if cfg.epochs is not None else problem.default_epochs
    transfer = cfg.quadrature if cfg.quadrature else "auto"
    if transfer not in ("auto", TRAPEZOID, "simpson"):
        raise ValueError(f"unknown quadrature {cfg.quadrature!r}")
    return TrainConfig(
        collocation_count=cfg.collocation,
        epochs=epochs,
        learning_rate=cfg.learning_rate,
        loss_tolerance=cfg.loss_tolerance,
        seed=cfg.seed,
        transfer_quadrature=transfer,
    )


def _solve_reduced(problem, plan, nets_dir=None):
    target = problem.ivp if problem.ivp is not None else problem.system
    on_segment = None
    if nets_dir is not None:
        os.makedirs(nets_dir, exist_ok=True)

        def on_segment(index, nets, report):
            from .network import save_checkpoint

            for k, net in enumerate(nets, start=1):
                save_checkpoint(net, os.path.join(
                    nets_dir, f"seg{index + 1:03d}_net{k}.ckpt"))
    return training.solve_sequential(target, plan, on_segment=on_segment)


def _solve_classical(problem, plan):
    sysm = problem.system if problem.system is not None else to_first_order(problem.ivp)
    base_cfg = baseline.ClassicalPinnConfig(
        collocation_count=plan.config.collocation_count,
        epochs=plan.config.epochs,
        learning_rate=plan.config.learning_rate,
        seed=plan.config.seed,
    )
    import dataclasses

    ics = sysm.init_values.copy()
    grids, values, derivs, reports = [], [], [], []
    for i in range(plan.n_segments):
        start, end = plan.boundaries[i], plan.boundaries[i + 1]
        seg_cfg = dataclasses.replace(base_cfg, seed=base_cfg.seed + i)
        nets, report = baseline.train_classical(sysm, (start, end), ics, seg_cfg)
        grid = training.UniformGrid(start, end, seg_cfg.collocation_count)
        xs, U, dU = baseline.classical_state_table(nets, grid)
        keep = slice(None) if i == 0 else slice(1, None)
        grids.append(xs[keep])
        values.append(U[keep])
        derivs.append(dU[keep])
        reports.append(report)
        ics = report.boundary_state
    table = StateTable(grid=np.concatenate(grids),
                       values=np.concatenate(values, axis=0),
                       derivs=np.concatenate(derivs, axis=0))
    # a scalar source problem reports its first state column only
    if problem.ivp is not None:
        table = StateTable(grid=table.grid, values=table.values[:, :1],
                           derivs=table.derivs[:, :1])
    return table, reports


def run(cfg: RunConfig) -> int:
    """Execute one solve and write solution/convergence/summary files."""
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        problem = _build_problem(cfg)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_UNKNOWN_PROBLEM
    except (ValueError, TypeError) as exc:
        print(f"error: bad problem definition: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    try:
        boundaries = resolve_boundaries(cfg.segments, problem)
        train_cfg = _train_config(cfg, problem)
        plan = SegmentPlan(boundaries, train_cfg)
    except ValueError as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    out_dir = cfg.out_dir or os.environ.get(OUTDIR_ENV, "") or \
        os.path.join("runs", f"{problem.name}-{cfg.method}")
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write-probe")
        with open(probe, "w", encoding="ascii") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE

    t0 = time.perf_counter()
    reports = []
    try:
        if cfg.method == "reduced":
            nets_dir = os.path.join(out_dir, "networks") if cfg.save_nets else None
            table, reports = _solve_reduced(problem, plan, nets_dir)
        elif cfg.method == "classical":
            table, reports = _solve_classical(problem, plan)
        else:
            sysm = problem.system if problem.system is not None \
                else to_first_order(problem.ivp)
            bdf_cfg = oracles.BdfConfig(order=cfg.bdf_order, step_size=cfg.bdf_step)
            span = (boundaries[0], boundaries[-1])
            table = oracles.bdf_integrate(sysm, bdf_cfg, span)
            if problem.ivp is not None:
                table = StateTable(grid=table.grid, values=table.values[:, :1])
    except training.SegmentDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.partial is not None:
            _write_solution(os.path.join(out_dir, "partial_solution.csv"),
                            exc.partial, problem, cfg)
            print(f"partial results up to segment {exc.segment_index} written",
                  file=sys.stderr)
        return EXIT_DIVERGED
    except (training.TrainingDivergedError, oracles.StepFailureError,
            oracles.IntegrationDivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    wall = time.perf_counter() - t0

    n_out = problem.n_outputs
    pred = table.values[:, :n_out]
    ref = _reference_values(problem, table.grid, cfg, refine=cfg.method == "bdf")
    abs_err = np.abs(pred - ref)
    _write_solution_csv(os.path.join(out_dir, "solution.csv"),
                        table.grid, pred, ref, abs_err)
    for i, report in enumerate(reports, start=1):
        report.to_csv(os.path.join(out_dir, f"convergence_seg{i:03d}.csv"))

    max_err = abs_err.max(axis=0)
    l2_err = np.sqrt(np.mean(abs_err ** 2, axis=0))
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="ascii") as fh:
        fh.write(f"problem = {problem.name}\n")
        fh.write(f"description = {problem.description}\n")
        fh.write(f"method = {cfg.method}\n")
        fh.write(f"segments = {len(boundaries) - 1}\n")
        fh.write(f"boundaries = {','.join(_fmt(b) for b in boundaries)}\n")
        fh.write(f"collocation = {cfg.collocation}\n")
        fh.write(f"epochs = {train_cfg.epochs}\n")
        fh.write(f"learning_rate = {_fmt(cfg.learning_rate)}\n")
        fh.write(f"seed = {cfg.seed}\n")
        fh.write(f"bdf_order = {cfg.bdf_order}\n")
        fh.write(f"bdf_step = {_fmt(cfg.bdf_step)}\n")
        for i in range(n_out):
            fh.write(f"max_abs_error_{i + 1} = {_fmt(float(max_err[i]))}\n")
            fh.write(f"l2_error_{i + 1} = {_fmt(float(l2_err[i]))}\n")
        if reports:
            final = sum(r.final_loss for r in reports)
            fh.write(f"final_loss_sum = {_fmt(final)}\n")
        fh.write(f"wall_time_s = {wall:.3f}\n")
    print(f"wrote {out_dir}/solution.csv "
          f"(max abs error per species: {', '.join(_fmt(float(e)) for e in max_err)})")
    return EXIT_OK


def _write_solution_csv(path, xs, pred, ref, abs_err) -> None:
    n = pred.shape[1]
    header = (["x"]
              + [f"pred_{i + 1}" for i in range(n)]
              + [f"ref_{i + 1}" for i in range(n)]
              + [f"abs_err_{i + 1}" for i in range(n)])
    cols = [xs] + [pred[:, i] for i in range(n)] \
        + [ref[:, i] for i in range(n)] + [abs_err[:, i] for i in range(n)]
    write_csv(path, header, cols)


def _write_solution(path, table: StateTable, problem, cfg) -> None:
    pred = table.values[:, :problem.n_outputs]
    ref = _reference_values(problem, table.grid, cfg)
    _write_solution_csv(path, table.grid, pred, ref, np.abs(pred - ref))


def _read_solution_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = sum(1 for name in header if name.startswith("pred_"))
    return data[:, 0], data[:, 1:1 + n]


def _read_summary(path) -> dict:
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if "=" in line:
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    return out


def compare(dir_a, dir_b, out_dir) -> dict:
    """Compare two finished runs of the same problem.

    Both trajectories are linearly interpolated onto the union of their grids
    (restricted to the overlap); the merged curves and per-species max/L2
    discrepancies are written to ``out_dir``.
    """
    sum_a = _read_summary(os.path.join(dir_a, "summary.txt"))
    sum_b = _read_summary(os.path.join(dir_b, "summary.txt"))
    if sum_a.get("problem") != sum_b.get("problem"):
        raise ValueError(
            f"runs target different problems: {sum_a.get('problem')!r} "
            f"vs {sum_b.get('problem')!r}")
    xa, ua = _read_solution_csv(os.path.join(dir_a, "solution.csv"))
    xb, ub = _read_solution_csv(os.path.join(dir_b, "solution.csv"))
    if ua.shape[1] != ub.shape[1]:
        raise ValueError("runs report different state dimensions")
    lo = max(xa[0], xb[0])
    hi = min(xa[-1], xb[-1])
    if not lo < hi:
        raise ValueError("runs do not overlap in time")
    xs = np.unique(np.concatenate([xa[(xa >= lo) & (xa <= hi)],
                                   xb[(xb >= lo) & (xb <= hi)]]))
    n = ua.shape[1]
    ia = np.stack([np.interp(xs, xa, ua[:, i]) for i in range(n)], axis=1)
    ib = np.stack([np.interp(xs, xb, ub[:, i]) for i in range(n)], axis=1)
    disc = np.abs(ia - ib)
    os.makedirs(out_dir, exist_ok=True)
    header = (["x"] + [f"a_{i + 1}" for i in range(n)]
              + [f"b_{i + 1}" for i in range(n)]
              + [f"abs_diff_{i + 1}" for i in range(n)])
    cols = [xs] + [ia[:, i] for i in range(n)] + [ib[:, i] for i in range(n)] \
        + [disc[:, i] for i in range(n)]
    write_csv(os.path.join(out_dir, "merged.csv"), header, cols)
    metrics = {"problem": sum_a.get("problem"), "points": int(xs.size)}
    with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="ascii") as fh:
        fh.write(f"problem = {sum_a.get('problem')}\n")
        fh.write(f"run_a = {dir_a}\nrun_b = {dir_b}\n")
        fh.write(f"points = {xs.size}\n")
        for i in range(n):
            mx = float(disc[:, i].max())
            l2 = float(np.sqrt(np.mean(disc[:, i] ** 2)))
            metrics[f"max_{i + 1}"] = mx
            metrics[f"l2_{i + 1}"] = l2
            fh.write(f"max_discrepancy_{i + 1} = {_fmt(mx)}\n")
            fh.write(f"l2_discrepancy_{i + 1} = {_fmt(l2)}\n")
    return metrics


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volpinn",
        description="Solve stiff initial value problems with networks trained "
                    "on integral-equation residuals.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one problem and emit CSVs")
    p_solve.add_argument("problem", nargs="?", default="",
                         help="catalog name (see list-problems)")
    p_solve.add_argument("--config", help="key = value config file")
    p_solve.add_argument("--method", choices=("reduced", "classical", "bdf"))
    p_solve.add_argument("--segments",
                         help="boundaries '0,0.1,0.4', count '5', 'log250', "
                              "or 'first:25' of the default plan")
    p_solve.add_argument("--epochs", type=int)
    p_solve.add_argument("--lr", type=float)
    p_solve.add_argument("--collocation", type=int)
    p_solve.add_argument("--loss-tol", type=float,
                         help="early-stop loss threshold (0 disables)")
    p_solve.add_argument("--quadrature", choices=("auto", "trapezoid", "simpson"))
    p_solve.add_argument("--seed", type=int)
    p_solve.add_argument("--bdf-order", type=int, choices=(1, 2))
    p_solve.add_argument("--bdf-step", type=float)
    p_solve.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} "
                                       "or runs/<problem>-<method>)")
    p_solve.add_argument("--param", action="append", default=[],
                         metavar="NAME=VALUE", help="problem parameter override")
    p_solve.add_argument("--save-nets", action="store_true",
                         help="checkpoint trained networks per segment")

    p_cmp = sub.add_parser("compare", help="compare two finished runs")
    p_cmp.add_argument("run_a")
    p_cmp.add_argument("run_b")
    p_cmp.add_argument("--out", default="comparison")

    sub.add_parser("list-problems", help="show the benchmark catalog")
    return parser


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)

    if args.command == "list-problems":
        for name, description in problems.list_problems():
            print(f"{name:8s} {description}")
        return EXIT_OK

    if args.command == "compare":
        try:
            metrics = compare(args.run_a, args.run_b, args.out)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_BAD_CONFIG
        keys = [k for k in metrics if k.startswith("max_")]
        print("max discrepancy per species: "
              + ", ".join(_fmt(metrics[k]) for k in sorted(keys)))
        return EXIT_OK

    # solve
    if args.config:
        try:
            cfg = load_config_file(args.config)
        except (ValueError, configparser.Error) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_BAD_CONFIG
    else:
        cfg = RunConfig()
    if args.problem:
        cfg.problem = args.problem
    for override in args.param:
        if "=" not in override:
            print(f"error: bad --param {override!r}", file=sys.stderr)
            return EXIT_BAD_CONFIG
        key, value = override.split("=", 1)
        try:
            cfg.problem_params[key.strip()] = float(value)
        except ValueError:
            print(f"error: --param value must be numeric: {override!r}",
                  file=sys.stderr)
            return EXIT_BAD_CONFIG
    if args.method:
        cfg.method = args.method
    if args.segments:
        cfg.segments = args.segments
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.lr is not None:
        cfg.learning_rate = args.lr
    if args.collocation is not None:
        cfg.collocation = args.collocation
    if args.loss_tol is not None:
        cfg.loss_tolerance = args.loss_tol
    if args.quadrature:
        cfg.quadrature = args.quadrature
    if args.seed is not None:
        cfg.seed = args.seed
    if args.bdf_order is not None:
        cfg.bdf_order = args.bdf_order
    if args.bdf_step is not None:
        cfg.bdf_step = args.bdf_step
    if args.out:
        cfg.out_dir = args.out
    if args.save_nets:
        cfg.save_nets = True
    if not cfg.problem and cfg.inline is None:
        print("error: no problem named (positional argument or config file)",
              file=sys.stderr)
        return EXIT_BAD_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
