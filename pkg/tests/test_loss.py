import math

import numpy as np
import pytest

from droimo import (
    EstimatorConfig,
    VBounds,
    apply_theta,
    compute_constants,
    empirical_risk,
    frontier_points,
    surrogate_loss,
)
from droimo.loss import EmptyFrontier, NotStronglyConvex, batch_surrogate_loss, constants_to_csv
from droimo.model import ObservationSet


def test_surrogate_loss_basic(synthetic, grid6):
    frontier = frontier_points(synthetic, grid6.weights)
    # nearest frontier point to (2.5, 2.6) is the w=(0,1) solution (2.5, 2.5)
    ev = surrogate_loss(np.array([2.5, 2.6]), frontier)
    assert ev.value == pytest.approx(0.01, abs=1e-12)
    assert np.allclose(ev.nearest_x, [2.5, 2.5], atol=1e-9)
    # exactly on a frontier point the loss vanishes
    assert surrogate_loss(frontier[3], frontier).value == pytest.approx(0.0, abs=1e-20)


def test_surrogate_loss_tie_breaks_low_index():
    frontier = np.array([[0.0, 0.0], [2.0, 0.0]])
    ev = surrogate_loss(np.array([1.0, 0.0]), frontier)
    assert ev.value == pytest.approx(1.0)
    assert ev.argmin_k == 0


def test_batch_matches_scalar(synthetic, grid6, noisy_obs):
    frontier = frontier_points(synthetic, grid6.weights)
    vals = batch_surrogate_loss(noisy_obs.points, frontier)
    singles = [surrogate_loss(y, frontier).value for y in noisy_obs.points]
    assert np.allclose(vals, singles, atol=1e-14)


def test_empty_frontier_raises():
    with pytest.raises(EmptyFrontier):
        surrogate_loss(np.zeros(2), np.empty((0, 2)))


def test_empirical_risk_singleton(synthetic, synthetic_spec, grid6):
    y = np.array([[2.5, 2.6]])
    obs = ObservationSet(points=y, support_lo=np.array([-0.25, -0.25]),
                         support_hi=np.array([3.25, 3.25]))
    theta = synthetic_spec.extract(synthetic)
    risk = empirical_risk(theta, synthetic, synthetic_spec, grid6, obs)
    assert risk == pytest.approx(0.01, abs=1e-12)
    # precomputed frontier takes the same path to the same value
    frontier = frontier_points(synthetic, grid6.weights)
    assert empirical_risk(theta, synthetic, synthetic_spec, grid6, obs,
                          frontier=frontier) == pytest.approx(risk)


def test_constants_synthetic(synthetic, synthetic_spec, noisy_obs, config):
    c = compute_constants(synthetic, synthetic_spec, noisy_obs, config)
    s2 = math.sqrt(2.0)
    assert c.B == pytest.approx(3 * s2)
    assert c.R == pytest.approx(3.25 * s2)
    assert c.D == pytest.approx(6 * s2)
    assert c.kappa == pytest.approx(6.5 * s2)
    assert c.lam == pytest.approx(1.0)
    assert c.V1 == 0.0
    assert c.V2 == pytest.approx((6.25 * s2) ** 2)  # 78.125
    assert c.G == pytest.approx(1.0 + 6.5 * s2 + 325.0)
    vb = VBounds.from_problem(c.B, c.R, config.epsilon, config.m)
    assert c.R0 == pytest.approx(math.sqrt(
        c.D ** 2 + noisy_obs.N * vb.v_i_max ** 2 + vb.v_last_max ** 2))
    assert c.H == pytest.approx(
        96.0 * (3.0 * c.D * s2 / c.kappa + 2.0 * c.R) * (c.B + c.R))


def test_constants_degenerate_fields(portfolio, noisy_obs, config):
    from droimo import portfolio_theta_spec
    spec = portfolio_theta_spec()
    obs = ObservationSet(points=np.full((3, 8), 0.125),
                         support_lo=np.zeros(8), support_hi=np.ones(8))
    c = compute_constants(portfolio, spec, obs, config)
    assert c.G is None  # no strong convexity
    with pytest.raises(NotStronglyConvex):
        compute_constants(portfolio, spec, obs, config, strict=True)
    zero_eps = EstimatorConfig(epsilon=0.0)
    c0 = compute_constants(portfolio, spec, obs, zero_eps)
    assert c0.R0 is None


def test_loss_bounds_and_lipschitz(synthetic, synthetic_spec, grid6, noisy_obs):
    # spot-check the loss range and the y-Lipschitz bound on random pairs
    rng = np.random.default_rng(0)
    lo, hi = noisy_obs.support_lo, noisy_obs.support_hi
    B, R = synthetic.B, noisy_obs.R
    frontier = frontier_points(synthetic, grid6.weights)
    Y = rng.uniform(lo, hi, size=(500, 2))
    vals = batch_surrogate_loss(Y, frontier)
    assert np.all(vals >= 0)
    assert np.all(vals <= (B + R) ** 2 + 1e-9)
    Y2 = rng.uniform(lo, hi, size=(500, 2))
    vals2 = batch_surrogate_loss(Y2, frontier)
    lip = 2 * (B + R)
    assert np.all(np.abs(vals - vals2) <= lip * np.linalg.norm(Y - Y2, axis=1) + 1e-9)


def test_theta_lipschitz(synthetic, synthetic_spec, grid6, noisy_obs):
    rng = np.random.default_rng(1)
    B, R = synthetic.B, noisy_obs.R
    kappa, lam = 2 * R, synthetic.lam
    lip = 4 * (B + R) * kappa / lam
    y = noisy_obs.points[0]
    for _ in range(40):
        t1 = rng.uniform(-6, 0, size=2)
        t2 = rng.uniform(-6, 0, size=2)
        f1 = frontier_points(apply_theta(synthetic, synthetic_spec, t1), grid6.weights)
        f2 = frontier_points(apply_theta(synthetic, synthetic_spec, t2), grid6.weights)
        gap = abs(surrogate_loss(y, f1).value - surrogate_loss(y, f2).value)
        assert gap <= lip * np.linalg.norm(t1 - t2) + 1e-9


def test_constants_csv(synthetic, synthetic_spec, noisy_obs, config):
    text = constants_to_csv(compute_constants(synthetic, synthetic_spec,
                                              noisy_obs, config))
    lines = text.strip().splitlines()
    assert lines[0] == "name,value"
    assert len(lines) == 11
    names = [ln.split(",")[0] for ln in lines[1:]]
    assert names == ["B", "R", "D", "kappa", "lam", "V1", "V2", "G", "R0", "H"]
