"""Box-constrained derivative-free search shared by both estimators."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def pattern_search(f, x0, lo, hi, r0=0.25, rmin=1e-4, max_evals=400, cache=None):
    """Coordinate pattern search minimizing f over [lo, hi].

    The stencil radius halves whenever no axis move improves, from r0 down to
    rmin. Returns (x, fx, evals, trace) where trace lists accepted
    (x, fx) pairs.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)

    def ev(pt):
        if cache is None:
            return f(pt)
        key = pt.tobytes()
        if key not in cache:
            cache[key] = f(pt)
        return cache[key]

    fx = ev(x)
    evals = 1
    trace = [(x.copy(), fx)]
    r = r0
    d = x.size
    while r >= rmin and evals < max_evals:
        improved = False
        for j in range(d):
            for sgn in (1.0, -1.0):
                cand = x.copy()
                cand[j] = min(max(cand[j] + sgn * r, lo[j]), hi[j])
                if cand[j] == x[j]:
                    continue
                fc = ev(cand)
                evals += 1
                if fc < fx - 1e-15:
                    x, fx = cand, fc
                    trace.append((x.copy(), fx))
                    improved = True
                if evals >= max_evals:
                    break
            if evals >= max_evals:
                break
        if not improved:
            r *= 0.5
    return x, fx, evals, trace


def stratified_starts(lo, hi, count, seed):
    """Box center plus Latin-hypercube points, deterministic for a seed."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    starts = [0.5 * (lo + hi)]
    if count > 1:
        sampler = qmc.LatinHypercube(d=lo.size, seed=seed)
        unit = sampler.random(count - 1)
        starts.extend(lo + unit * (hi - lo))
    return starts


def coarse_seed_grid(lo, hi):
    """Deterministic coarse scan of the box: a full grid for up to two
    parameters, a Sobol set beyond that."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.size <= 2:
        axes = [np.linspace(a, b, 9) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    sampler = qmc.Sobol(d=lo.size, scramble=False)
    unit = sampler.random(64)
    return lo + unit * (hi - lo)


def multi_start_minimize(f, lo, hi, restarts, seed, extra_starts=(),
                         r0=0.25, rmin=1e-4, max_evals=400):
    """Pattern search from stratified starts (plus any warm starts); returns
    (x_best, f_best, restarts_used, trace of accepted iterates of the winner).
    Ties break toward the earlier start."""
    starts = list(extra_starts) + stratified_starts(lo, hi, restarts, seed)
    cache = {}
    best = None
    for idx, s in enumerate(starts):
        x, fx, _, trace = pattern_search(f, s, lo, hi, r0=r0, rmin=rmin,
                                         max_evals=max_evals, cache=cache)
        if best is None or fx < best[1]:
            best = (x, fx, idx, trace)
    return best
