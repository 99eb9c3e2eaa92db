import numpy as np
import pytest

from droimo import WeightVector, apply_theta, solve_frontier, solve_wp
from droimo.model import MqpInstance
from droimo.qp import DegenerateHessian, frontier_points

from oracles import pgd_qp_oracle, random_bounded_instance


def test_weight_vector_validation():
    WeightVector(np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        WeightVector(np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        WeightVector(np.array([-0.1, 1.1]))


@pytest.mark.parametrize("w,expected", [
    ((1.0, 0.0), (0.5, 0.5)),
    ((0.0, 1.0), (2.5, 2.5)),
    ((0.5, 0.5), (11 / 6, 7 / 6)),
])
def test_synthetic_frontier_points(synthetic, w, expected):
    sol = solve_wp(synthetic, np.array(w))
    assert np.allclose(sol.x, expected, atol=1e-9)
    assert sol.kkt_residual <= 1e-8
    assert sol.unique


def test_active_constraint_duals(synthetic, synthetic_spec):
    # pushing the minimizer outside the box activates a bound with u > 0
    pushed = apply_theta(synthetic, synthetic_spec, np.array([0.0, -6.0]))
    sol = solve_wp(pushed, np.array([0.0, 1.0]))
    assert sol.x[1] == pytest.approx(3.0)
    assert sol.kkt_residual <= 1e-8
    assert np.any(sol.u > 1e-8)


def test_solve_frontier_batch(synthetic, grid6):
    sols = solve_frontier(synthetic, grid6.weights)
    assert len(sols) == 6
    assert np.allclose(sols[-1].x, (0.5, 0.5), atol=1e-9)
    assert np.allclose(sols[0].x, (2.5, 2.5), atol=1e-9)
    assert solve_frontier(synthetic, []) == []


def test_portfolio_min_variance(portfolio):
    sol = solve_wp(portfolio, np.array([0.0, 1.0]))
    assert sol.x.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(sol.x >= -1e-10)
    assert sol.kkt_residual <= 1e-8
    # projected-gradient check on the simplex via the oracle with eq row
    # folded into two inequalities
    n = 8
    H = portfolio.objectives[1][0]
    C = np.vstack([np.eye(n), -np.eye(n), np.ones((1, n)), -np.ones((1, n))])
    d = np.concatenate([np.ones(n), np.zeros(n), [1.0], [-1.0]])
    x_o, _ = pgd_qp_oracle(H + 1e-10 * np.eye(n), np.zeros(n), C, d)
    assert np.max(np.abs(x_o - sol.x)) < 1e-4


def test_degenerate_hessian_refused(portfolio):
    with pytest.raises(DegenerateHessian):
        solve_wp(portfolio, np.array([1.0, 0.0]))
    sol = solve_wp(portfolio, np.array([1.0, 0.0]), tie_break=True)
    assert not sol.unique
    # pure return maximization puts everything in the best security
    assert sol.x[np.argmax(-portfolio.objectives[0][1])] == pytest.approx(1.0, abs=1e-6)


def test_uniqueness_across_warm_starts(synthetic):
    w = np.array([0.3, 0.7])
    a = solve_wp(synthetic, w)
    b = solve_wp(synthetic, w, warm_start=np.array([3.0, 0.0]))
    c = solve_wp(synthetic, w, warm_start=np.array([0.0, 3.0]))
    assert np.max(np.abs(a.x - b.x)) <= 1e-7
    assert np.max(np.abs(a.x - c.x)) <= 1e-7


def test_oracle_equivalence_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(25):
        inst = random_bounded_instance(rng)
        w = rng.dirichlet(np.ones(2))
        sol = solve_wp(inst, w)
        assert sol.kkt_residual <= 1e-8
        H = sum(wl * Q for wl, (Q, _) in zip(w, inst.objectives))
        c = sum(wl * cl for wl, (_, cl) in zip(w, inst.objectives))
        C = np.vstack([inst.A, -np.eye(inst.n)])
        d = np.concatenate([inst.b, np.zeros(inst.n)])
        x_o, _ = pgd_qp_oracle(H, c, C, d)
        assert np.max(np.abs(x_o - sol.x)) < 1e-5


def test_pareto_dominance_of_interior_frontier(synthetic):
    from droimo import sample_weight_grid
    grid = sample_weight_grid(2, 9, interior_only=True)
    sols = solve_frontier(synthetic, grid.weights)
    vals = np.array([[0.5 * s.x @ Q @ s.x + c @ s.x for Q, c in synthetic.objectives]
                     for s in sols])
    for i in range(len(sols)):
        for j in range(len(sols)):
            if i == j:
                continue
            dominates = np.all(vals[j] <= vals[i] - 1e-12) and np.any(
                vals[j] < vals[i] - 1e-12)
            assert not dominates


def test_perturbation_bound(synthetic, synthetic_spec):
    # solution drift under theta changes is within (2 kappa / lambda) |dtheta|
    rng = np.random.default_rng(11)
    R = 3.25 * np.sqrt(2)
    kappa = 2 * R
    lam = synthetic.lam
    for _ in range(100):
        w = rng.dirichlet(np.ones(2))
        t1 = rng.uniform(-6.0, 0.0, size=2)
        t2 = rng.uniform(-6.0, 0.0, size=2)
        x1 = solve_wp(apply_theta(synthetic, synthetic_spec, t1), w).x
        x2 = solve_wp(apply_theta(synthetic, synthetic_spec, t2), w).x
        bound = (2 * kappa / lam) * np.linalg.norm(t1 - t2)
        assert np.linalg.norm(x1 - x2) <= bound + 1e-9
