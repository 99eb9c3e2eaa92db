"""Surrogate loss against a sampled frontier, empirical risk, prediction error,
and the closed-form constants used by the convergence and risk bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import EstimatorConfig, MqpInstance, ObservationSet, ThetaSpec, VBounds, apply_theta
from .pareto import WeightGrid
from .qp import QpSolution, frontier_points


class EmptyFrontier(ValueError):
    pass


class NotStronglyConvex(RuntimeError):
    pass


@dataclass(frozen=True)
class LossEvaluation:
    value: float
    argmin_k: int
    nearest_x: np.ndarray


@dataclass(frozen=True)
class ConstantsBundle:
    B: float
    R: float
    D: float
    kappa: float
    lam: float
    V1: float
    V2: float
    G: float | None
    R0: float | None
    H: float

    def rows(self):
        out = []
        for name in ("B", "R", "D", "kappa", "lam", "V1", "V2", "G", "R0", "H"):
            val = getattr(self, name)
            out.append((name, val))
        return out


def _as_points(frontier) -> np.ndarray:
    if isinstance(frontier, np.ndarray):
        pts = np.atleast_2d(frontier)
    else:
        pts = np.array([s.x if isinstance(s, QpSolution) else s for s in frontier])
    if pts.size == 0:
        raise EmptyFrontier("frontier has no points")
    return pts


def surrogate_loss(y, frontier) -> LossEvaluation:
    """Minimum squared distance from y to the sampled frontier; ties go to the
    smallest index."""
    pts = _as_points(frontier)
    y = np.asarray(y, dtype=float)
    d2 = np.sum((pts - y) ** 2, axis=1)
    k = int(np.argmin(d2))
    return LossEvaluation(value=float(d2[k]), argmin_k=k, nearest_x=pts[k])


def batch_surrogate_loss(Y: np.ndarray, frontier) -> np.ndarray:
    """Surrogate loss of each row of Y, vectorized."""
    pts = _as_points(frontier)
    Y = np.atleast_2d(Y)
    d2 = np.sum((Y[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    return d2.min(axis=1)


def empirical_risk(theta, instance: MqpInstance, spec: ThetaSpec,
                   grid: WeightGrid, obs: ObservationSet,
                   frontier: np.ndarray | None = None) -> float:
    """Mean surrogate loss over the observations; the frontier is solved once
    per theta (or supplied precomputed)."""
    if frontier is None:
        applied = apply_theta(instance, spec, theta)
        frontier = frontier_points(applied, grid.weights)
    return float(np.mean(batch_surrogate_loss(obs.points, frontier)))


def prediction_error(theta_hat, instance: MqpInstance, spec: ThetaSpec,
                     grid: WeightGrid, validation: ObservationSet) -> float:
    """Mean surrogate loss on a held-out set at the fitted parameters."""
    return empirical_risk(theta_hat, instance, spec, grid, validation)


def compute_constants(instance: MqpInstance, spec: ThetaSpec,
                      obs: ObservationSet, config: EstimatorConfig,
                      strict: bool = False) -> ConstantsBundle:
    """Closed-form constants: loss bounds, Lipschitz constants, and the
    iteration/excess-risk constants. Fields needing strong convexity or a
    positive radius are None when unavailable."""
    B, R, D = instance.B, obs.R, spec.D
    kappa = 2.0 * R
    lam = instance.lam
    V1, V2 = 0.0, (B + R) ** 2
    if lam <= 0 and strict:
        raise NotStronglyConvex("instance is not strongly convex")
    G = None if lam <= 0 else 1.0 + 2.0 * R + 4.0 * (B + R) * kappa / lam
    R0 = None
    if config.epsilon > 0:
        vb = VBounds.from_problem(B, R, config.epsilon, config.m)
        R0 = math.sqrt(D ** 2 + obs.N * vb.v_i_max ** 2 + vb.v_last_max ** 2)
    H = 96.0 * (3.0 * D * math.sqrt(spec.n_theta) / kappa + 2.0 * R) * (B + R)
    return ConstantsBundle(B=B, R=R, D=D, kappa=kappa, lam=lam,
                           V1=V1, V2=V2, G=G, R0=R0, H=H)


def constants_to_csv(bundle: ConstantsBundle) -> str:
    lines = ["name,value"]
    for name, val in bundle.rows():
        lines.append(f"{name},{'' if val is None else format(val, '.12g')}")
    return "\n".join(lines) + "\n"
