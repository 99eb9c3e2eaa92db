"""Exact solver for the scalarized weighting problem: a strongly convex QP with
linear inequality/equality constraints, solved by a primal active-set method
with a KKT certificate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MqpInstance

FEAS_TOL = 1e-9
KKT_TOL = 1e-8
STEP_TOL = 1e-11
RIDGE = 1e-8


class Infeasible(RuntimeError):
    pass


class Unbounded(RuntimeError):
    pass


class DegenerateHessian(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if np.any(w < -1e-12):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    u: np.ndarray          # one multiplier per inequality row, A rows then x>=0 rows
    u_eq: np.ndarray       # multipliers of the equality rows, sign-free
    objective: float
    kkt_residual: float
    unique: bool = True


def _weighted_problem(instance: MqpInstance, w: np.ndarray):
    H = sum(wl * Q for wl, (Q, _) in zip(w, instance.objectives))
    c = sum(wl * cl for wl, (_, cl) in zip(w, instance.objectives))
    return 0.5 * (H + H.T), c


def _kkt_residual(H, c, C, d, E, e, x, u, v):
    stat = H @ x + c + (C.T @ u if C.size else 0.0)
    if E.size:
        stat = stat + E.T @ v
    res = float(np.max(np.abs(stat)))
    if C.size:
        slack = C @ x - d
        res = max(res, float(np.max(slack)), float(np.max(-u, initial=0.0)),
                  float(np.max(np.abs(u * slack))))
    if E.size:
        res = max(res, float(np.max(np.abs(E @ x - e))))
    return res


def _independent_rows(M, rows):
    """Greedy subset of `rows` keeping M[rows] full row rank."""
    kept = []
    for r in rows:
        cand = M[kept + [r]]
        if np.linalg.matrix_rank(cand, tol=1e-10) == len(kept) + 1:
            kept.append(r)
    return kept


def solve_qp_active_set(H, c, C, d, E=None, e=None, x0=None, max_iter=None):
    """min 1/2 x'Hx + c'x  s.t.  Cx <= d, Ex = e, from a feasible x0.

    Returns (x, u, v, iters) with u >= 0 the inequality multipliers.
    H must be positive definite.
    """
    n = H.shape[0]
    C = np.zeros((0, n)) if C is None or len(C) == 0 else np.atleast_2d(C)
    d = np.zeros(0) if C.shape[0] == 0 else np.atleast_1d(d)
    E = np.zeros((0, n)) if E is None or len(E) == 0 else np.atleast_2d(E)
    e = np.zeros(0) if E.shape[0] == 0 else np.atleast_1d(e)
    mi, me = C.shape[0], E.shape[0]
    if max_iter is None:
        max_iter = 50 * (n + mi + me)

    x = np.array(x0, dtype=float)
    if C.size and np.max(C @ x - d) > 1e-7:
        raise Infeasible("starting point violates inequality constraints")
    if E.size and np.max(np.abs(E @ x - e)) > 1e-7:
        raise Infeasible("starting point violates equality constraints")

    active = []
    if mi:
        cands = [j for j in range(mi) if C[j] @ x - d[j] > -1e-10]
        stacked = np.vstack([E, C]) if me else C
        keep = _independent_rows(stacked, [me + j for j in cands])
        active = [j - me for j in keep]

    u = np.zeros(mi)
    v = np.zeros(me)
    for it in range(max_iter):
        W = np.vstack([E, C[active]]) if (me or active) else np.zeros((0, n))
        g = H @ x + c
        mw = W.shape[0]
        if mw:
            K = np.block([[H, W.T], [W, np.zeros((mw, mw))]])
            rhs = np.concatenate([-g, np.zeros(mw)])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            p = sol[:n]
            mult = sol[n:]
        else:
            p = np.linalg.solve(H, -g)
            mult = np.zeros(0)

        if np.max(np.abs(p), initial=0.0) <= STEP_TOL:
            v = mult[:me]
            u = np.zeros(mi)
            lam = mult[me:]
            if len(active) == 0 or np.min(lam, initial=0.0) >= -1e-10:
                u[active] = np.maximum(lam, 0.0)
                return x, u, v, it + 1
            drop = int(np.argmin(lam))
            active.pop(drop)
            continue

        alpha = 1.0
        block = -1
        for j in range(mi):
            if j in active:
                continue
            cp = C[j] @ p
            if cp > 1e-12:
                aj = (d[j] - C[j] @ x) / cp
                if aj < alpha - 1e-14:
                    alpha = max(aj, 0.0)
                    block = j
        x = x + alpha * p
        if block >= 0:
            active.append(block)
    raise RuntimeError("active-set iteration cap reached")


def solve_wp(instance: MqpInstance, w, tie_break: bool = False,
             warm_start: np.ndarray | None = None) -> QpSolution:
    """Minimize the weighted objective over the feasible region.

    Raises DegenerateHessian if the weighted Hessian is singular unless
    tie_break is set, in which case a small ridge picks one minimizer and the
    solution is flagged non-unique.
    """
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    H, c = _weighted_problem(instance, w)
    unique = True
    ev_min = float(np.linalg.eigvalsh(H)[0])
    if ev_min <= 1e-10:
        if not tie_break:
            raise DegenerateHessian(
                "weighted Hessian is singular; enable tie_break for a ridge solve")
        H = H + RIDGE * np.eye(instance.n)
        unique = False

    eq = np.array(instance.eq_rows)
    C = np.vstack([instance.A[~eq], -np.eye(instance.n)])
    d = np.concatenate([instance.b[~eq], np.zeros(instance.n)])
    E = instance.A[eq]
    e = instance.b[eq]

    x0 = warm_start if warm_start is not None else instance.feasible_point
    if np.max(C @ x0 - d) > FEAS_TOL or (E.size and np.max(np.abs(E @ x0 - e)) > FEAS_TOL):
        x0 = instance.feasible_point
    x, u_all, v, _ = solve_qp_active_set(H, c, C, d, E, e, x0)

    # report multipliers ordered: inequality rows of A, then the x >= 0 rows
    n_ineq_A = int((~eq).sum())
    u = np.empty(instance.q - eq.sum() + instance.n)
    u[:n_ineq_A] = u_all[:n_ineq_A]
    u[n_ineq_A:] = u_all[n_ineq_A:]
    obj = float(0.5 * x @ H @ x + c @ x)
    res = _kkt_residual(H, c, C, d, E, e, x, u_all, v)
    if res > KKT_TOL:
        raise RuntimeError(f"KKT residual {res:.2e} above tolerance")
    return QpSolution(x=x, u=u, u_eq=v, objective=obj,
                      kkt_residual=res, unique=unique)


def solve_frontier(instance: MqpInstance, weights, tie_break: bool = False,
                   warm_start_chain: bool = True):
    """One WP solve per weight, order-preserving; adjacent weights reuse the
    previous solution as a warm start."""
    out = []
    prev = None
    for idx, w in enumerate(weights):
        try:
            sol = solve_wp(instance, w, tie_break=tie_break,
                           warm_start=prev if warm_start_chain else None)
        except (DegenerateHessian, Infeasible, Unbounded) as exc:
            raise type(exc)(f"weight index {idx}: {exc}") from exc
        out.append(sol)
        prev = sol.x
    return out


def frontier_points(instance: MqpInstance, weights, tie_break: bool = False) -> np.ndarray:
    sols = solve_frontier(instance, weights, tie_break=tie_break)
    return np.array([s.x for s in sols])
