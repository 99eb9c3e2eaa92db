"""Weight-grid construction, synthetic observation generation, and
observation-set serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .model import MqpInstance, ObservationSet
from .qp import WeightVector, solve_wp

INTERIOR_MARGIN = 1e-3


class BadArity(ValueError):
    pass


@dataclass(frozen=True)
class WeightGrid:
    weights: tuple  # of WeightVector
    interior_only: bool = False

    @property
    def K(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array([wv.w for wv in self.weights])


@dataclass(frozen=True)
class NoiseModel:
    kind: str  # "uniform" or "rounding"
    half_width: float = 0.25
    places: int = 3

    def __post_init__(self):
        if self.kind not in ("uniform", "rounding"):
            raise ValueError("noise kind must be 'uniform' or 'rounding'")
        if self.kind == "uniform" and self.half_width < 0:
            raise ValueError("half_width must be nonnegative")
        if self.kind == "rounding" and self.places < 1:
            raise ValueError("places must be at least 1")


def sample_weight_grid(p: int, K: int, interior_only: bool = False,
                       seed: int = 0) -> WeightGrid:
    """Equispaced simplex grid for p = 2; Dirichlet(1,...,1) sampling otherwise."""
    if p < 2:
        raise BadArity("need at least two objectives")
    if p == 2:
        if K < 2:
            raise BadArity("grid mode needs K >= 2")
        first = np.linspace(0.0, 1.0, K)
        W = np.column_stack([first, 1.0 - first])
    else:
        rng = np.random.default_rng(seed)
        W = rng.dirichlet(np.ones(p), size=K)
    if interior_only:
        W = np.clip(W, INTERIOR_MARGIN, 1.0 - INTERIOR_MARGIN)
        W = W / W.sum(axis=1, keepdims=True)
    return WeightGrid(weights=tuple(WeightVector(w) for w in W),
                      interior_only=interior_only)


def _sample_simplex_weights(rng, p, N, interior_margin=0.0):
    W = rng.dirichlet(np.ones(p), size=N)
    if interior_margin > 0:
        W = np.clip(W, interior_margin, 1.0 - interior_margin)
        W = W / W.sum(axis=1, keepdims=True)
    return W


def generate_observations(instance: MqpInstance, seed: int, N: int,
                          noise: NoiseModel) -> ObservationSet:
    """N Pareto points at uniformly random simplex weights, perturbed by noise.

    Uniform noise inflates the support box by the half width; rounding noise
    keeps the feasible box as support. Instances that are not strongly convex
    get interior weights so every weighted solve stays well posed.
    """
    rng = np.random.default_rng(seed)
    margin = 0.0 if instance.strongly_convex else INTERIOR_MARGIN
    W = _sample_simplex_weights(rng, instance.p, N, margin)
    pts = np.empty((N, instance.n))
    prev = None
    for i in range(N):
        sol = solve_wp(instance, W[i], warm_start=prev)
        pts[i] = sol.x
        prev = sol.x
    if noise.kind == "uniform":
        if noise.half_width > 0:
            pts = pts + rng.uniform(-noise.half_width, noise.half_width, size=pts.shape)
        lo = instance.box_lo - noise.half_width
        hi = instance.box_hi + noise.half_width
    else:
        pts = np.round(pts, noise.places)
        lo = instance.box_lo
        hi = instance.box_hi
    pts = np.clip(pts, lo, hi)  # guard against roundoff at the box edge
    return ObservationSet(points=pts, support_lo=lo, support_hi=hi)


# ---------------------------------------------------------------------------
# Serialization

def observations_to_csv(obs: ObservationSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([f"y{j}" for j in range(obs.n)])
    for row in obs.points:
        writer.writerow([f"{v:.12g}" for v in row])
    return buf.getvalue()


def observations_from_csv(text: str, support_lo, support_hi) -> ObservationSet:
    rows = list(csv.reader(io.StringIO(text)))
    pts = np.array([[float(v) for v in r] for r in rows[1:]])
    return ObservationSet(points=pts, support_lo=np.asarray(support_lo, dtype=float),
                          support_hi=np.asarray(support_hi, dtype=float))


def observations_to_json(obs: ObservationSet) -> str:
    return json.dumps({
        "points": obs.points.tolist(),
        "support_lo": obs.support_lo.tolist(),
        "support_hi": obs.support_hi.tolist(),
        "R": obs.R,
    }, indent=2)


def observations_from_json(text: str) -> ObservationSet:
    doc = json.loads(text)
    return ObservationSet(points=np.array(doc["points"]),
                          support_lo=np.array(doc["support_lo"]),
                          support_hi=np.array(doc["support_hi"]))
