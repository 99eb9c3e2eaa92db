"""Shared domain types: problem instances, parameter spaces, observations, config."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10


class DimensionMismatch(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


class InfeasibleRegion(ValueError):
    pass


class UnboundedRegion(ValueError):
    pass


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MqpInstance:
    """A multiobjective quadratic program min {1/2 x'Q_l x + c_l'x} over
    A x <= b (with optional per-row equality flags) and x >= 0.

    Instances are immutable; derived geometry (componentwise feasible box,
    norm bound B, a feasible starting point) is computed once at build time.
    """

    objectives: tuple  # tuple of (Q, c) pairs
    A: np.ndarray
    b: np.ndarray
    eq_rows: tuple  # bool per row of A
    n: int
    p: int
    q: int
    lam_per_obj: tuple
    lam: float
    strongly_convex: bool
    box_lo: np.ndarray
    box_hi: np.ndarray
    B: float
    feasible_point: np.ndarray

    @classmethod
    def build(cls, objectives, A, b, eq_rows=None) -> "MqpInstance":
        objectives = tuple((_readonly(Q), _readonly(c)) for Q, c in objectives)
        A = _readonly(np.atleast_2d(A))
        b = _readonly(np.atleast_1d(b))
        q, n = A.shape
        p = len(objectives)
        if p < 2:
            raise DimensionMismatch("need at least two objectives")
        if b.shape != (q,):
            raise DimensionMismatch("b length must match rows of A")
        if eq_rows is None:
            eq_rows = (False,) * q
        eq_rows = tuple(bool(e) for e in eq_rows)
        if len(eq_rows) != q:
            raise DimensionMismatch("eq_rows length must match rows of A")

        lam_per_obj = []
        for Q, c in objectives:
            if Q.shape != (n, n) or c.shape != (n,):
                raise DimensionMismatch("objective dimensions must match A")
            if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL:
                raise ValueError("objective matrix is not symmetric")
            ev_min = float(np.linalg.eigvalsh(Q)[0])
            if ev_min < -PSD_TOL:
                raise ValueError("objective matrix is not positive semidefinite")
            lam_per_obj.append(max(ev_min, 0.0))
        lam = min(lam_per_obj)

        box_lo, box_hi, feas = _bound_box(A, b, eq_rows, n)
        B = _norm_bound(A, b, eq_rows, box_hi)
        return cls(
            objectives=objectives, A=A, b=b, eq_rows=eq_rows,
            n=n, p=p, q=q,
            lam_per_obj=tuple(lam_per_obj), lam=lam,
            strongly_convex=lam > PSD_TOL,
            box_lo=_readonly(box_lo), box_hi=_readonly(box_hi),
            B=B, feasible_point=_readonly(feas),
        )

    def with_objectives(self, objectives) -> "MqpInstance":
        """Copy with new (Q, c) pairs; Q matrices and constraints must be unchanged
        so the cached geometry and curvature data stay valid."""
        objectives = tuple((_readonly(Q), _readonly(c)) for Q, c in objectives)
        for (Q_new, _), (Q_old, _) in zip(objectives, self.objectives):
            if not np.array_equal(Q_new, Q_old):
                raise ValueError("with_objectives may only change linear terms")
        return dataclasses.replace(self, objectives=objectives)


def _bound_box(A, b, eq_rows, n):
    """Componentwise feasible box via 2n bound LPs; also returns an interior-ish
    feasible point (mean of the LP vertices). Raises if empty or unbounded."""
    eq = np.array(eq_rows)
    A_ub, b_ub = A[~eq], b[~eq]
    A_eq, b_eq = (A[eq], b[eq]) if eq.any() else (None, None)
    lo = np.empty(n)
    hi = np.empty(n)
    pts = []
    for j in range(n):
        for sign, dest in ((1.0, hi), (-1.0, lo)):
            c = np.zeros(n)
            c[j] = -sign  # linprog minimizes
            res = linprog(c, A_ub=A_ub if A_ub.size else None,
                          b_ub=b_ub if b_ub.size else None,
                          A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
            if res.status == 2:
                raise InfeasibleRegion("feasible region is empty")
            if res.status == 3:
                raise UnboundedRegion("feasible region is unbounded")
            if not res.success:
                raise InfeasibleRegion(f"bound LP failed: {res.message}")
            dest[j] = sign * (-res.fun) if sign > 0 else -(-res.fun)
            pts.append(res.x)
    lo = np.minimum(lo, hi)
    return lo, hi, np.mean(pts, axis=0)


def _norm_bound(A, b, eq_rows, box_hi) -> float:
    """Upper bound on max ||x||_2 over the region. Box corner norm in general;
    for a single all-ones equality row with x >= 0 the simplex vertex bound
    sum(x) = rhs is tighter."""
    corner = float(np.linalg.norm(box_hi))
    eq_idx = [k for k, e in enumerate(eq_rows) if e]
    if len(eq_idx) == 1:
        k = eq_idx[0]
        row = A[k]
        if np.allclose(row, row[0]) and row[0] > 0:
            simplex = b[k] / row[0]
            if simplex >= 0:
                return min(corner, float(simplex))
    return corner


@dataclass(frozen=True)
class ThetaSpec:
    """Vectorization of the learnable linear-term entries with box bounds."""

    layout: tuple  # ordered (objective index, coordinate index) pairs
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _readonly(np.atleast_1d(self.lower)))
        object.__setattr__(self, "upper", _readonly(np.atleast_1d(self.upper)))
        object.__setattr__(self, "layout", tuple((int(l), int(j)) for l, j in self.layout))
        if len(self.layout) != self.lower.shape[0] or len(self.layout) != self.upper.shape[0]:
            raise DimensionMismatch("bounds must match layout length")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_theta(self) -> int:
        return len(self.layout)

    @property
    def D(self) -> float:
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def extract(self, instance: MqpInstance) -> np.ndarray:
        return np.array([instance.objectives[l][1][j] for l, j in self.layout])


def apply_theta(instance: MqpInstance, spec: ThetaSpec, theta) -> MqpInstance:
    """Copy of the instance with the learnable c entries overwritten."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_theta,):
        raise DimensionMismatch(
            f"theta has length {theta.size}, expected {spec.n_theta}")
    if np.any(theta < spec.lower - 1e-12) or np.any(theta > spec.upper + 1e-12):
        raise OutOfBounds("theta outside the parameter box")
    cs = [c.copy() for _, c in instance.objectives]
    for (l, j), val in zip(spec.layout, theta):
        cs[l][j] = val
    return instance.with_objectives(
        [(Q, c) for (Q, _), c in zip(instance.objectives, cs)])


@dataclass(frozen=True)
class ObservationSet:
    """N noisy decisions with their box support and norm radius R."""

    points: np.ndarray  # N x n
    support_lo: np.ndarray
    support_hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(np.atleast_2d(self.points)))
        object.__setattr__(self, "support_lo", _readonly(self.support_lo))
        object.__setattr__(self, "support_hi", _readonly(self.support_hi))
        if np.any(self.points < self.support_lo - 1e-9) or np.any(self.points > self.support_hi + 1e-9):
            raise OutOfBounds("observation outside the support box")

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def R(self) -> float:
        corner = np.maximum(np.abs(self.support_lo), np.abs(self.support_hi))
        return float(np.linalg.norm(corner))

    def subset(self, idx) -> "ObservationSet":
        return ObservationSet(self.points[idx], self.support_lo, self.support_hi)


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by the robust and non-robust estimators."""

    epsilon: float = 0.01   # Wasserstein radius
    delta: float = 0.1      # stopping tolerance on the max constraint violation
    K: int = 6              # weight-grid size
    m: int = 1              # slack expansion of the per-observation v box
    max_iterations: int = 100
    grid_resolution: int = 33
    restarts: int = 4
    seed: int = 0
    cut_policy: str = "all"  # "all" or "max"
    interior_weights: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be at least 2")
        if self.cut_policy not in ("all", "max"):
            raise ValueError("cut_policy must be 'all' or 'max'")


@dataclass(frozen=True)
class VBounds:
    """Box for the epigraph variables of the finite master problem."""

    V1: float
    V2: float
    v_last_max: float
    v_i_max: float

    @classmethod
    def from_problem(cls, B: float, R: float, epsilon: float, m: int) -> "VBounds":
        if epsilon <= 0:
            raise ValueError("epsilon must be positive to bound the dual variable")
        V1 = 0.0
        V2 = (B + R) ** 2
        return cls(V1=V1, V2=V2,
                   v_last_max=(V2 - V1) / epsilon,
                   v_i_max=(m + 1) * V2 - m * V1)


# ---------------------------------------------------------------------------
# Built-in instances

def build_synthetic_instance() -> MqpInstance:
    """Two-objective QP on the box [0, 3]^2 with diagonal curvature."""
    Q1 = np.diag([1.0, 2.0])
    c1 = np.array([-0.5, -1.0])
    Q2 = np.diag([2.0, 1.0])
    c2 = np.array([-5.0, -2.5])
    A = np.eye(2)
    b = np.array([3.0, 3.0])
    return MqpInstance.build([(Q1, c1), (Q2, c2)], A, b)


def synthetic_theta_spec() -> ThetaSpec:
    """Second entries of both linear terms are learnable within [-6, 0]."""
    return ThetaSpec(layout=[(0, 1), (1, 1)],
                     lower=np.array([-6.0, -6.0]),
                     upper=np.array([0.0, 0.0]))


PORTFOLIO_RETURNS = np.array(
    [0.1791, 0.1143, 0.1357, 0.0837, 0.1653, 0.1808, 0.0352, 0.0368])

PORTFOLIO_COVARIANCE = np.array([
    [0.1641, 0.0299, 0.0478, 0.0491, 0.0580, 0.0871, 0.0603, 0.0492],
    [0.0299, 0.0720, 0.0511, 0.0287, 0.0527, 0.0297, 0.0291, 0.0326],
    [0.0478, 0.0511, 0.0794, 0.0498, 0.0664, 0.0479, 0.0395, 0.0523],
    [0.0491, 0.0287, 0.0498, 0.1148, 0.0336, 0.0503, 0.0326, 0.0447],
    [0.0580, 0.0527, 0.0664, 0.0336, 0.1073, 0.0483, 0.0402, 0.0533],
    [0.0871, 0.0297, 0.0479, 0.0503, 0.0483, 0.1134, 0.0591, 0.0387],
    [0.0603, 0.0291, 0.0395, 0.0326, 0.0402, 0.0591, 0.0704, 0.0244],
    [0.0492, 0.0326, 0.0523, 0.0447, 0.0533, 0.0387, 0.0244, 0.1028],
])


def build_portfolio_instance() -> MqpInstance:
    """Eight-security mean-variance portfolio selection.

    f1 = -r'x (zero curvature), f2 = x'Qx, over 0 <= x_i <= 1, sum(x) = 1.
    f2 is stored with matrix 2Q so the shared 1/2 x'Qx + c'x convention holds.
    """
    n = 8
    Q1 = np.zeros((n, n))
    c1 = -PORTFOLIO_RETURNS
    Q2 = 2.0 * PORTFOLIO_COVARIANCE
    c2 = np.zeros(n)
    A = np.vstack([np.eye(n), np.ones((1, n))])
    b = np.concatenate([np.ones(n), [1.0]])
    eq_rows = (False,) * n + (True,)
    return MqpInstance.build([(Q1, c1), (Q2, c2)], A, b, eq_rows)


def portfolio_theta_spec(n_learnable: int = 4, return_cap: float = 0.3) -> ThetaSpec:
    """First n_learnable entries of c1 = -r are learnable; bounds keep the
    implied expected returns in [0, return_cap]."""
    layout = [(0, j) for j in range(n_learnable)]
    return ThetaSpec(layout=layout,
                     lower=np.full(n_learnable, -return_cap),
                     upper=np.zeros(n_learnable))


# ---------------------------------------------------------------------------
# JSON interchange

def instance_to_dict(instance: MqpInstance, spec: ThetaSpec | None = None) -> dict:
    doc = {
        "p": instance.p,
        "n": instance.n,
        "q": instance.q,
        "objectives": [{"Q": Q.tolist(), "c": c.tolist()} for Q, c in instance.objectives],
        "A": instance.A.tolist(),
        "b": instance.b.tolist(),
        "eq_rows": list(instance.eq_rows),
    }
    if spec is not None:
        doc["theta_spec"] = {
            "layout": [list(pair) for pair in spec.layout],
            "lower": spec.lower.tolist(),
            "upper": spec.upper.tolist(),
        }
    return doc


def instance_from_dict(doc: dict):
    instance = MqpInstance.build(
        [(np.array(o["Q"]), np.array(o["c"])) for o in doc["objectives"]],
        np.array(doc["A"]), np.array(doc["b"]), doc.get("eq_rows"))
    spec = None
    if "theta_spec" in doc:
        ts = doc["theta_spec"]
        spec = ThetaSpec(layout=[tuple(p) for p in ts["layout"]],
                         lower=np.array(ts["lower"]), upper=np.array(ts["upper"]))
    return instance, spec


def instance_to_json(instance: MqpInstance, spec: ThetaSpec | None = None) -> str:
    return json.dumps(instance_to_dict(instance, spec), indent=2)


def instance_from_json(text: str):
    return instance_from_dict(json.loads(text))
