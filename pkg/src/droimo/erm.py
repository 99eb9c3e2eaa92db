"""Non-robust baseline: minimize the empirical mean surrogate loss over the
parameter box, plus the exportable single-level KKT formulation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._search import coarse_seed_grid, multi_start_minimize
from .loss import batch_surrogate_loss
from .model import EstimatorConfig, MqpInstance, ObservationSet, ThetaSpec, apply_theta
from .pareto import WeightGrid
from .qp import frontier_points

SEARCH_R0 = 0.25
SEARCH_RMIN = 1e-4
SEARCH_MAX_EVALS = 400


class NoObservations(ValueError):
    pass


@dataclass(frozen=True)
class ErmResult:
    theta_hat: np.ndarray
    objective: float
    trace: tuple  # accepted (theta, objective) pairs of the winning restart
    restarts_used: int


class FrontierCache:
    """Memoizes frontier solves keyed on theta; shared across search restarts."""

    def __init__(self, instance: MqpInstance, spec: ThetaSpec, grid: WeightGrid):
        self.instance = instance
        self.spec = spec
        self.weights = grid.weights
        self._store = {}

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        key = np.asarray(theta, dtype=float).tobytes()
        pts = self._store.get(key)
        if pts is None:
            applied = apply_theta(self.instance, self.spec, theta)
            pts = frontier_points(applied, self.weights)
            self._store[key] = pts
        return pts


def fit_erm(instance: MqpInstance, spec: ThetaSpec, grid: WeightGrid,
            obs: ObservationSet, config: EstimatorConfig) -> ErmResult:
    """Multi-start pattern search over the theta box with exact inner QP solves."""
    if obs.N == 0:
        raise NoObservations("need at least one observation")
    frontier = FrontierCache(instance, spec, grid)

    def objective(theta):
        return float(np.mean(batch_surrogate_loss(obs.points, frontier(theta))))

    seeds = coarse_seed_grid(spec.lower, spec.upper)
    seed_vals = [objective(s) for s in seeds]
    extra = [seeds[k] for k in np.argsort(seed_vals)[:3]]
    x, fx, idx, trace = multi_start_minimize(
        objective, spec.lower, spec.upper, config.restarts, config.seed,
        extra_starts=extra, r0=SEARCH_R0, rmin=SEARCH_RMIN,
        max_evals=SEARCH_MAX_EVALS)
    return ErmResult(theta_hat=x, objective=fx,
                     trace=tuple((t.copy(), v) for t, v in trace),
                     restarts_used=config.restarts)


def emit_kkt_formulation(instance: MqpInstance, spec: ThetaSpec,
                         grid: WeightGrid, obs: ObservationSet) -> dict:
    """Structured description of the mixed-binary single-level reformulation of
    the baseline fit: per-weight KKT blocks, big-M linearization blocks tying
    each observation to one frontier point, and the assignment rows. Exportable
    for external MIQP solvers; never solved in-process."""
    K, N, n, q = grid.K, obs.N, instance.n, instance.q
    big_m = (instance.B + obs.R) ** 2
    W = grid.as_array()
    doc = {
        "kind": "inverse-fit single-level KKT reformulation",
        "objective": "min (1/N) sum_i sum_k || y_i - v[i,k] ||^2",
        "big_m": big_m,
        "dimensions": {"n": n, "p": instance.p, "q": q, "K": K, "N": N,
                       "n_theta": spec.n_theta},
        "variables": {
            "theta": {"size": spec.n_theta, "lower": spec.lower.tolist(),
                      "upper": spec.upper.tolist(),
                      "layout": [list(pair) for pair in spec.layout]},
            "x": {"shape": [K, n], "doc": "frontier point per weight"},
            "u": {"shape": [K, q + n], "nonneg": True,
                  "doc": "dual of each inequality incl. x >= 0 rows"},
            "t": {"shape": [K, q + n], "binary": True,
                  "doc": "complementarity indicator per constraint"},
            "v": {"shape": [N, K, n], "doc": "linearized product z[i,k] * x[k]"},
            "z": {"shape": [N, K], "binary": True},
        },
        "kkt_blocks": [
            {
                "weight_index": k,
                "weight": W[k].tolist(),
                "stationarity": {
                    "rows": n,
                    "doc": "sum_l w[l] (Q_l x[k] + c_l) + A' u_A[k] - u_bnd[k] = 0",
                },
                "primal_feasibility": {
                    "inequalities": "A_ineq x[k] <= b_ineq, x[k] >= 0",
                    "equalities": [i for i, e in enumerate(instance.eq_rows) if e],
                },
                "complementarity_linearization": [
                    "u[k] <= M t[k]",
                    "slack[k] <= M (1 - t[k])",
                ],
            }
            for k in range(K)
        ],
        "linearization_blocks": [
            {
                "observation": i,
                "weight_index": k,
                "rows": [
                    "0 <= v[i,k] <= M z[i,k]",
                    "x[k] - M (1 - z[i,k]) <= v[i,k] <= x[k]",
                ],
            }
            for i in range(N) for k in range(K)
        ],
        "assignment_rows": [
            {"observation": i, "row": "sum_k z[i,k] = 1"} for i in range(N)
        ],
    }
    return doc


def formulation_to_text(doc: dict) -> str:
    lines = [doc["kind"], f"objective: {doc['objective']}",
             f"big-M: {doc['big_m']:.6g}", ""]
    dims = doc["dimensions"]
    lines.append("dimensions: " + ", ".join(f"{k}={v}" for k, v in dims.items()))
    lines.append("")
    for blk in doc["kkt_blocks"]:
        lines.append(f"KKT block for weight {blk['weight_index']}: w = {blk['weight']}")
        lines.append(f"  stationarity ({blk['stationarity']['rows']} rows): "
                     + blk["stationarity"]["doc"])
        lines.append(f"  primal: {blk['primal_feasibility']['inequalities']}")
        if blk["primal_feasibility"]["equalities"]:
            lines.append(f"  equality rows: {blk['primal_feasibility']['equalities']}")
        for row in blk["complementarity_linearization"]:
            lines.append(f"  {row}")
    lines.append("")
    nlin = len(doc["linearization_blocks"])
    lines.append(f"{nlin} product-linearization blocks (one per observation x weight)")
    for row in doc["assignment_rows"]:
        lines.append(f"observation {row['observation']}: {row['row']}")
    return "\n".join(lines) + "\n"


def formulation_to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2)
