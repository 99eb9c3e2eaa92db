"""Independent oracles used by the tests: a dual projected-gradient QP solver,
dense grid maximizers, and a 1-D grid minimizer for the epigraph objective."""

from __future__ import annotations

import numpy as np


def pgd_qp_oracle(H, c, C, d, max_iter=50_000, tol=1e-12):
    """Solve min 1/2 x'Hx + c'x s.t. Cx <= d by accelerated projected gradient
    ascent on the dual (u >= 0 is the only constraint, so the projection is a
    clip). Returns (x, u). H must be positive definite."""
    Hinv = np.linalg.inv(H)
    M = C @ Hinv @ C.T
    r = C @ Hinv @ c + d
    step = 1.0 / max(np.linalg.eigvalsh(M)[-1], 1e-12)
    u = np.zeros(C.shape[0])
    z = u.copy()
    t_acc = 1.0
    for _ in range(max_iter):
        grad = M @ z + r  # negative dual gradient
        u_new = np.maximum(z - step * grad, 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc ** 2))
        z = u_new + ((t_acc - 1.0) / t_new) * (u_new - u)
        if np.max(np.abs(u_new - u)) < tol:
            u = u_new
            break
        u, t_acc = u_new, t_new
    x = -Hinv @ (c + C.T @ u)
    return x, u


def grid_max_2d(f_batch, lo, hi, res=401):
    """Max of a batched function over a dense 2-D grid; returns (value, point)."""
    xs = np.linspace(lo[0], hi[0], res)
    ys = np.linspace(lo[1], hi[1], res)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    vals = f_batch(P)
    k = int(np.argmax(vals))
    return float(vals[k]), P[k]


def grid_min_theta(f, lo, hi, res):
    """Best point of a dense grid over a 2-D parameter box; returns
    (value, point, cell diagonal)."""
    xs = np.linspace(lo[0], hi[0], res)
    ys = np.linspace(lo[1], hi[1], res)
    best = (np.inf, None)
    for a in xs:
        for b in ys:
            v = f(np.array([a, b]))
            if v < best[0]:
                best = (v, np.array([a, b]))
    diag = float(np.hypot((hi[0] - lo[0]) / (res - 1), (hi[1] - lo[1]) / (res - 1)))
    return best[0], best[1], diag


def epigraph_grid_oracle(L, d, owners, N, epsilon, t_max, points=100_000):
    """Dense 1-D grid minimization of eps*t + (1/N) sum_i max(0, max_j L - t d)."""
    ts = np.linspace(0.0, t_max, points)
    vals = np.full((N, ts.size), 0.0)
    for i in range(N):
        sel = owners == i
        if not np.any(sel):
            continue
        pieces = L[sel, None] - np.outer(d[sel], ts)
        vals[i] = np.maximum(pieces.max(axis=0), 0.0)
    phi = epsilon * ts + vals.sum(axis=0) / N
    k = int(np.argmin(phi))
    return float(phi[k]), float(ts[k])


def random_bounded_instance(rng, n=None):
    """Random strongly convex two-objective instance on a bounded polytope:
    box rows x <= ub plus a few random cutting rows through a feasible point."""
    from droimo.model import MqpInstance

    n = n if n is not None else int(rng.integers(2, 5))
    objectives = []
    for _ in range(2):
        V = rng.normal(size=(n, n))
        Q = V.T @ V / n + (0.5 + rng.random()) * np.eye(n)
        c = rng.normal(size=n)
        objectives.append((Q, c))
    ub = 1.0 + 2.0 * rng.random(n)
    x0 = ub * rng.uniform(0.2, 0.8, size=n)
    extra = int(rng.integers(0, min(4, 8 - n) + 1))
    rows = [np.eye(n)]
    rhs = [ub]
    for _ in range(extra):
        a = rng.normal(size=n)
        rows.append(a[None, :])
        rhs.append([a @ x0 + 0.5 + rng.random()])
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    return MqpInstance.build(objectives, A, b)
