import numpy as np
import pytest

from sdca.algorithms import run_dca
from sdca.core import random_point_in_ball
from sdca.models import (EpcaDecomposition1, EpcaDecomposition2, FiniteDCProgram, epca_reference,
                         make_epca, make_phase_retrieval, planted_phase_retrieval, synth_spiked_gaussian)


def test_epca_sample_objective_example():
    # x = (0.6, 0.8), s = (1, 0): -<x,s>^2 / 2 = -0.18 under decomposition 1
    p1 = EpcaDecomposition1(2, lam=1e-6)
    x, X, b = np.array([0.6, 0.8]), np.array([[1.0, 0.0]]), np.zeros(1)
    assert p1.phi_values(x, X, b)[0] == pytest.approx(-0.18, abs=1e-15)
    assert p1.g_values(x, X, b)[0] - p1.h_values(x, X, b)[0] == pytest.approx(-0.18, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_decompositions_identity(seed):
    rng = np.random.default_rng(seed)
    n = 7
    X = rng.standard_normal((40, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    b = np.zeros(40)
    p1, p2 = EpcaDecomposition1(n, lam=0.3), EpcaDecomposition2(n, L=1.4)
    for _ in range(10):
        x = random_point_in_ball(rng, n)
        for p in (p1, p2):
            np.testing.assert_allclose(p.g_values(x, X, b) - p.h_values(x, X, b), p.phi_values(x, X, b),
                                       atol=1e-12)
        # decomposition 2 carries twice the concave term of decomposition 1
        np.testing.assert_allclose(p2.phi_values(x, X, b), 2.0 * p1.phi_values(x, X, b), rtol=1e-14)


def test_declared_constants():
    p1, p2 = EpcaDecomposition1(3, lam=0.25), EpcaDecomposition2(3, L=1.5)
    assert (p1.rho, p1.h_modulus, p1.has_explicit_G, p1.g_depends_on_sample) == (0.25, 0.25, True, False)
    assert (p2.rho, p2.h_modulus, p2.has_explicit_G, p2.g_depends_on_sample) == (1.5, 1.5, False, True)
    assert isinstance(make_epca(2, 3), EpcaDecomposition2)
    with pytest.raises(ValueError):
        make_epca(3, 3)


def test_decomposition2_gk_solution_is_stationary(rng):
    n = 5
    X = rng.standard_normal((30, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    w = np.full(30, 1 / 30)
    p2 = EpcaDecomposition2(n, L=1.1)
    v = rng.standard_normal(n)
    res = p2.solve_Gk(v, X, np.zeros(30), w, tol=1e-13)
    spec = p2.subproblem(v, X, w)
    x = res.x
    # projected-gradient fixed point of the convex subproblem
    g = spec.grad(x)
    np.testing.assert_allclose(x, spec.constraint.prox(x - g / spec.mu), atol=1e-9)


def test_synthetic_spiked_gaussian():
    sd = synth_spiked_gaussian(6, spike_strength=5.0, count=3000, seed=0)
    X = sd.dataset.dense()
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)
    C = X.T @ X / len(X)
    assert sd.top_eigenvalue == pytest.approx(np.linalg.eigvalsh(C)[-1], rel=1e-12)
    np.testing.assert_allclose(C @ sd.top_eigenvector, sd.top_eigenvalue * sd.top_eigenvector, atol=1e-12)
    assert sd.top_eigenvector @ sd.spike_direction > 0.95
    again = synth_spiked_gaussian(6, spike_strength=5.0, count=3000, seed=0)
    assert again.dataset == sd.dataset
    with pytest.raises(ValueError):
        synth_spiked_gaussian(6, spike_strength=1.0)


@pytest.mark.parametrize("n", [2, 5, 20])
def test_reference_matches_top_eigenvalue(n):
    sd = synth_spiked_gaussian(n, count=2000, seed=n)
    ref = epca_reference(sd.dataset, starts=5, tol=1e-3, seed=0)
    assert ref.value - (-0.5 * sd.top_eigenvalue) <= 1e-3
    assert ref.value >= -0.5 * sd.top_eigenvalue - 1e-12


def test_phase_retrieval_planted_zero():
    pp = planted_phase_retrieval(100, 10, seed=0)
    fin, prog = make_phase_retrieval((pp.A, pp.b), planted_norm=np.linalg.norm(pp.x_bar))
    assert fin.objective(pp.x_bar) == pytest.approx(0.0, abs=1e-10)
    assert fin.objective(-pp.x_bar) == pytest.approx(0.0, abs=1e-10)
    assert prog.rho == 0.0 and not prog.smooth
    assert prog.radius == pytest.approx(10 * np.linalg.norm(pp.x_bar))


def test_phase_retrieval_kink_mask():
    fin, prog = make_phase_retrieval((np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 4.0])), radius=10)
    x = np.array([1.0, 1.0])
    np.testing.assert_array_equal(prog.kink_mask(x, fin.X, fin.b), [True, False])


@pytest.mark.parametrize("seed", range(3))
def test_dca_phase_retrieval_recovers(seed):
    pp = planted_phase_retrieval(100, 10, seed=seed)
    fin, _ = make_phase_retrieval((pp.A, pp.b), planted_norm=np.linalg.norm(pp.x_bar))
    rng = np.random.default_rng(100 + seed)
    x0 = pp.x_bar + 0.1 * np.linalg.norm(pp.x_bar) * rng.standard_normal(10) / np.sqrt(10)
    traj = run_dca(fin, x0, tol=1e-10, max_iter=200)
    assert np.all(np.diff(traj.objectives) <= 1e-12)
    dist = min(np.linalg.norm(traj.x - pp.x_bar), np.linalg.norm(traj.x + pp.x_bar))
    assert dist <= 1e-6 * np.linalg.norm(pp.x_bar)


def test_finite_program_uses_explicit_G():
    X = np.eye(3)
    fin = FiniteDCProgram(EpcaDecomposition1(3, lam=1e-6), X, np.zeros(3))
    res = fin.solve(np.array([1.0, 0.0, 0.0]), np.zeros(3), 1e-8)
    assert np.linalg.norm(res.x) == pytest.approx(1.0, abs=1e-14)
