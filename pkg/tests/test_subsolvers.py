import numpy as np
import pytest

from sdca.subsolvers import (BOUNDARY, BallIndicator, SubproblemSpec, ZeroRegularizer, project_ball,
                             solve_ball_quadratic, solve_inner_dca, solve_projected_gradient)


def test_ball_quadratic_cases():
    np.testing.assert_array_equal(solve_ball_quadratic(2.0, [0.5, 0.0], 1.0), [0.25, 0.0])
    x = solve_ball_quadratic(1.0, [3.0, 4.0], 1.0)
    np.testing.assert_allclose(x, [0.6, 0.8], rtol=1e-15)
    assert np.linalg.norm(x) <= 1.0
    np.testing.assert_array_equal(solve_ball_quadratic(1.0, [0.0, 0.0], 1.0), [0, 0])
    np.testing.assert_array_equal(solve_ball_quadratic(1.0, [3.0, 4.0], np.inf), [3, 4])
    with pytest.raises(ValueError):
        solve_ball_quadratic(0.0, [1.0], 1.0)


def test_ball_quadratic_against_projected_gradient():
    rng = np.random.default_rng(42)
    ball = BallIndicator(1.0)
    for _ in range(100):
        n = int(rng.integers(1, 12))
        mu = float(rng.uniform(0.05, 5))
        v = rng.standard_normal(n) * rng.uniform(0.01, 5)
        exact = solve_ball_quadratic(mu, v, 1.0)
        pg = solve_projected_gradient(SubproblemSpec(mu, v, ball), np.zeros(n), tol=1e-12)
        assert pg.converged
        np.testing.assert_allclose(pg.x, exact, atol=1e-6)


def test_project_ball():
    x = np.array([3.0, 4.0])
    p = project_ball(x, 1.0)
    assert np.linalg.norm(p) <= 1.0
    np.testing.assert_allclose(p, [0.6 * BOUNDARY, 0.8 * BOUNDARY])
    np.testing.assert_array_equal(project_ball(np.array([0.1, 0.2]), 1.0), [0.1, 0.2])


def test_regularizers():
    ball = BallIndicator(2.0)
    assert ball.value(np.array([1.0, 1.0])) == 0.0
    assert ball.value(np.array([2.0, 1.0])) == np.inf
    assert ZeroRegularizer().value(np.ones(3)) == 0.0
    with pytest.raises(ValueError):
        BallIndicator(0.0)


def test_spec_rejects_nonconvex():
    S = np.array([[1.0, 0.0]])
    SubproblemSpec(1.0, np.zeros(2), BallIndicator(1.0), S, np.array([1.0]))
    with pytest.raises(ValueError, match="not convex"):
        SubproblemSpec(0.5, np.zeros(2), BallIndicator(1.0), S, np.array([1.0]))


def test_inner_dca_matches_projected_gradient():
    rng = np.random.default_rng(7)
    for _ in range(20):
        S = rng.standard_normal((15, 5))
        S /= np.linalg.norm(S, axis=1, keepdims=True)
        w = np.full(15, 1 / 15)
        spec = SubproblemSpec(1.3, rng.standard_normal(5), BallIndicator(1.0), S, w)
        a = solve_inner_dca(spec, np.zeros(5), tol=1e-12, max_inner=10_000)
        b = solve_projected_gradient(spec, np.zeros(5), tol=1e-12)
        assert a.converged and b.converged
        assert spec.value(a.x) == pytest.approx(spec.value(b.x), abs=1e-10)


def test_inner_dca_monotone():
    rng = np.random.default_rng(3)
    S = rng.standard_normal((10, 4))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    spec = SubproblemSpec(1.0, rng.standard_normal(4), BallIndicator(1.0), S, np.full(10, 0.1))
    x, vals = np.zeros(4), []
    for _ in range(30):
        x = solve_ball_quadratic(spec.mu, spec.v + spec.data_grad(x), 1.0)
        vals.append(spec.value(x))
    assert np.all(np.diff(vals) <= 1e-14)


def test_inner_dca_max_inner_warns():
    S = np.eye(3)
    spec = SubproblemSpec(1.0, np.array([1e-3, 0, 0]), BallIndicator(1.0), S, np.full(3, 1 / 3))
    with pytest.warns(RuntimeWarning, match="max_inner"):
        res = solve_inner_dca(spec, np.array([0.0, 0.5, 0.0]), tol=1e-14, max_inner=2)
    assert not res.converged
