"""Command-line driver: experiment reproduction and report/plot-data emission.

Subcommands:
  run-synthetic   two-objective QP experiment (learn linear terms)
  run-portfolio   eight-security mean-variance experiment (learn returns)
  export          write instance JSON, KKT formulation, constants CSV
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .erm import emit_kkt_formulation, fit_erm, formulation_to_json, formulation_to_text
from .loss import compute_constants, constants_to_csv, prediction_error
from .model import (EstimatorConfig, MqpInstance, ThetaSpec, apply_theta,
                    build_portfolio_instance, build_synthetic_instance,
                    instance_to_json, portfolio_theta_spec, synthetic_theta_spec)
from .pareto import NoiseModel, generate_observations, sample_weight_grid
from .qp import frontier_points, solve_frontier
from .robust import select_radius

DEFAULT_RADII = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
FRONTIER_PLOT_WEIGHTS = 50


class UnknownInstance(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    n_list: tuple = (10, 15, 20)
    repetitions: int = 10
    radii: tuple = DEFAULT_RADII
    out_dir: str = "out"
    seed: int = 0
    cut_policy: str = "all"
    validation_size: int = 10_000
    delta: float = 0.1
    K: int = 6
    half_width: float = 0.25
    restarts: int = 4
    max_iterations: int = 100


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = [_fmt(v) for v in row]
        for c in cells:
            if c in ("nan", "inf", "-inf"):
                raise ValueError(f"non-finite value in CSV output {path}")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _estimator_config(run: RunConfig, seed: int) -> EstimatorConfig:
    return EstimatorConfig(epsilon=run.radii[0], delta=run.delta, K=run.K,
                           seed=seed, cut_policy=run.cut_policy,
                           restarts=run.restarts,
                           max_iterations=run.max_iterations)


def _single_repetition(instance, spec, grid, run: RunConfig, N: int, rep: int,
                       noise: NoiseModel, out: Path, tag: str):
    seed = run.seed + 1000 * rep
    cfg = _estimator_config(run, seed)
    obs = generate_observations(instance, seed, N, noise)
    validation = generate_observations(instance, seed + 7, run.validation_size,
                                       noise)
    erm = fit_erm(instance, spec, grid, obs, cfg)
    err_erm = prediction_error(erm.theta_hat, instance, spec, grid, validation)
    best_eps, table, fits = select_radius(instance, spec, grid, obs, run.radii,
                                          validation, cfg)
    wro = fits[best_eps]
    err_wro = next(r["prediction_error"] for r in table if r["epsilon"] == best_eps)

    conv_rows = [(h["iteration"], h["max_cv"], h["objective"])
                 for h in (wro.state.history if wro.state else [])]
    write_csv(out / f"convergence_{tag}_N{N}_rep{rep}.csv",
              ("iteration", "max_cv", "objective"), conv_rows)
    return {
        "seed": seed,
        "N": N,
        "theta_erm": erm.theta_hat.tolist(),
        "theta_wro": wro.theta_hat.tolist(),
        "chosen_epsilon": best_eps,
        "prediction_error_erm": err_erm,
        "prediction_error_wro": err_wro,
        "iterations": wro.iterations,
        "converged": bool(wro.converged),
        "radius_table": table,
    }


def _aggregate(records):
    agg = {}
    for key in ("prediction_error_erm", "prediction_error_wro"):
        vals = np.array([r[key] for r in records])
        agg[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return agg


def _write_report(out: Path, experiment, run: RunConfig, per_n, constants):
    report = {
        "experiment": experiment,
        "config": dataclasses.asdict(run),
        "prediction_error_note": (
            "prediction error is the mean surrogate loss of the validation set "
            "at the fitted parameters, with the training weight grid"),
        "per_n": per_n,
        "constants": {name: val for name, val in constants.rows()},
    }
    (out / "report.json").write_text(json.dumps(report, indent=2))


def cmd_run_synthetic(run: RunConfig) -> int:
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instance = build_synthetic_instance()
    spec = synthetic_theta_spec()
    grid = sample_weight_grid(2, run.K)
    noise = NoiseModel("uniform", half_width=run.half_width)

    per_n = []
    curve_rows = []
    for N in run.n_list:
        records = [
            _single_repetition(instance, spec, grid, run, N, rep, noise, out,
                               "synthetic")
            for rep in range(run.repetitions)
        ]
        agg = _aggregate(records)
        per_n.append({"N": N, "records": records, "aggregate": agg})
        for method in ("erm", "wro"):
            stats = agg[f"prediction_error_{method}"]
            curve_rows.append((N, method, stats["mean"], stats["std"]))
    write_csv(out / "error_vs_n.csv", ("N", "method", "mean_error", "std_error"),
              curve_rows)

    cfg = _estimator_config(run, run.seed)
    obs = generate_observations(instance, run.seed, max(run.n_list), noise)
    constants = compute_constants(instance, spec, obs, cfg)
    (out / "constants.csv").write_text(constants_to_csv(constants))
    _write_report(out, "synthetic", run, per_n, constants)
    return 0


def _frontier_table(instance, weights):
    """(weight on return objective, value of each objective) per frontier point."""
    sols = solve_frontier(instance, weights)
    rows = []
    for wv, sol in zip(weights, sols):
        x = sol.x
        f = [0.5 * x @ Q @ x + c @ x for Q, c in instance.objectives]
        rows.append((wv.w[0], *f, *x))
    return rows


def cmd_run_portfolio(run: RunConfig) -> int:
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instance = build_portfolio_instance()
    spec = portfolio_theta_spec()
    grid = sample_weight_grid(2, run.K, interior_only=True)
    noise = NoiseModel("rounding", places=3)
    N = run.n_list[0] if run.n_list else 20

    if spec.n_theta == 0:
        rec = {"theta_erm": [], "theta_wro": [], "iterations": 0}
        per_n = [{"N": N, "records": [rec], "aggregate": {}}]
    else:
        records = [
            _single_repetition(instance, spec, grid, run, N, rep, noise, out,
                               "portfolio")
            for rep in range(run.repetitions)
        ]
        per_n = [{"N": N, "records": records, "aggregate": _aggregate(records)}]

    plot_grid = sample_weight_grid(2, FRONTIER_PLOT_WEIGHTS, interior_only=True)
    header = ("weight_return", "f_return", "f_risk") + tuple(
        f"x{j}" for j in range(instance.n))
    write_csv(out / "frontier_true.csv", header,
              _frontier_table(instance, plot_grid.weights))
    rec0 = per_n[0]["records"][0]
    for method in ("erm", "wro"):
        theta = np.array(rec0[f"theta_{method}"]) if rec0[f"theta_{method}"] else spec.extract(instance)
        fitted = apply_theta(instance, spec, theta) if spec.n_theta else instance
        write_csv(out / f"frontier_{method}.csv", header,
                  _frontier_table(fitted, plot_grid.weights))

    cfg = _estimator_config(run, run.seed)
    obs = generate_observations(instance, run.seed, N, noise)
    constants = compute_constants(instance, spec, obs, cfg)
    (out / "constants.csv").write_text(constants_to_csv(constants))
    _write_report(out, "portfolio", run, per_n, constants)
    return 0


def cmd_export(name: str, out_dir: str, run: RunConfig | None = None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if name == "synthetic":
        instance, spec = build_synthetic_instance(), synthetic_theta_spec()
        grid = sample_weight_grid(2, 6)
        noise = NoiseModel("uniform", 0.25)
    elif name == "portfolio":
        instance, spec = build_portfolio_instance(), portfolio_theta_spec()
        grid = sample_weight_grid(2, 6, interior_only=True)
        noise = NoiseModel("rounding", places=3)
    else:
        raise UnknownInstance(f"unknown instance {name!r}")
    (out / f"instance_{name}.json").write_text(instance_to_json(instance, spec))
    obs = generate_observations(instance, 0, 15, noise)
    doc = emit_kkt_formulation(instance, spec, grid, obs)
    (out / f"kkt_{name}.json").write_text(formulation_to_json(doc))
    (out / f"kkt_{name}.txt").write_text(formulation_to_text(doc))
    cfg = EstimatorConfig(epsilon=0.01)
    (out / "constants.csv").write_text(
        constants_to_csv(compute_constants(instance, spec, obs, cfg)))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="droimo", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p):
        p.add_argument("--n", type=int, nargs="+", default=None,
                       help="observation counts")
        p.add_argument("--reps", type=int, default=10)
        p.add_argument("--epsilon-list", type=float, nargs="+",
                       default=list(DEFAULT_RADII))
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--k", type=int, default=6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out")
        p.add_argument("--cut-policy", choices=("all", "max"), default="all")
        p.add_argument("--validation-size", type=int, default=10_000)
        p.add_argument("--restarts", type=int, default=4)
        p.add_argument("--max-iterations", type=int, default=100)
        p.add_argument("--half-width", type=float, default=0.25)

    add_run_args(sub.add_parser("run-synthetic", help="two-objective QP experiment"))
    add_run_args(sub.add_parser("run-portfolio", help="mean-variance experiment"))

    exp = sub.add_parser("export", help="write instance/formulation/constants files")
    exp.add_argument("name", help="synthetic or portfolio")
    exp.add_argument("--out", default="out")
    return parser


def _run_config(args, experiment) -> RunConfig:
    default_n = (20,) if experiment == "portfolio" else (10, 15, 20)
    return RunConfig(
        experiment=experiment,
        n_list=tuple(args.n) if args.n else default_n,
        repetitions=args.reps,
        radii=tuple(args.epsilon_list),
        out_dir=args.out,
        seed=args.seed,
        cut_policy=args.cut_policy,
        validation_size=args.validation_size,
        delta=args.delta,
        K=args.k,
        half_width=args.half_width,
        restarts=args.restarts,
        max_iterations=args.max_iterations,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run-synthetic":
            return cmd_run_synthetic(_run_config(args, "synthetic"))
        if args.command == "run-portfolio":
            return cmd_run_portfolio(_run_config(args, "portfolio"))
        if args.command == "export":
            return cmd_export(args.name, args.out)
    except UnknownInstance as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical or module failure
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
