import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sdca.core import (SamplePoint, SparseVector, as_batch, as_vector, empirical_objective,
                       probe_subgradients, random_point_in_ball, sample_objective)
from sdca.models import EpcaDecomposition1, EpcaDecomposition2, PhaseRetrieval


def fd_grad(f, x, h=1e-6):
    e = np.eye(x.size)
    return np.array([(f(x + h * e[i]) - f(x - h * e[i])) / (2 * h) for i in range(x.size)])


def test_sparse_vector_validation():
    v = SparseVector([0, 3], [1.5, -2.0], 5)
    np.testing.assert_array_equal(v.to_dense(), [1.5, 0, 0, -2.0, 0])
    assert v.dot(np.arange(5.0)) == -6.0
    assert v.norm() == pytest.approx(2.5)
    assert SparseVector.from_dense(v.to_dense()) == v
    for bad in (([1, 0], [1.0, 1.0], 3), ([0, 5], [1.0, 1.0], 3), ([0], [0.0], 3), ([0, 0], [1.0, 2.0], 3)):
        with pytest.raises(ValueError):
            SparseVector(*bad)


def test_as_vector_and_batch():
    with pytest.raises(ValueError, match="mismatch"):
        as_vector(np.zeros(3), 4)
    with pytest.raises(ValueError, match="non-finite"):
        as_vector([0.0, np.nan])
    p = SamplePoint(SparseVector([1], [2.0], 3), 7.0)
    X, b = as_batch([p, p], 3)
    np.testing.assert_array_equal(X, [[0, 2, 0], [0, 2, 0]])
    np.testing.assert_array_equal(b, [7, 7])
    X, b = as_batch((np.ones(3), None), 3)
    assert X.shape == (1, 3) and b[0] == 0.0


def test_random_point_in_ball():
    rng = np.random.default_rng(0)
    pts = np.array([random_point_in_ball(rng, 5, 2.0) for _ in range(2000)])
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 2.0
    # uniform in a 5-ball: P(r <= 2 * 0.5^(1/5)) = 1/2
    assert np.mean(r <= 2.0 * 0.5 ** 0.2) == pytest.approx(0.5, abs=0.05)


_vec = arrays(np.float64, 6, elements=st.floats(-1, 1))


@given(_vec, _vec)
@settings(max_examples=50, deadline=None)
def test_epca_gradients_finite_difference(x, s):
    for prog in (EpcaDecomposition1(6, lam=0.3), EpcaDecomposition2(6, L=1.5)):
        X, b = s[None, :], np.zeros(1)
        for val, grad in ((prog.g_values, prog.g_subgrads), (prog.h_values, prog.h_subgrads)):
            num = fd_grad(lambda z: val(z, X, b)[0], x)
            np.testing.assert_allclose(grad(x, X, b)[0], num, atol=1e-7)


@given(_vec, _vec, st.floats(0.0, 4.0))
@settings(max_examples=50, deadline=None)
def test_phase_gradients_finite_difference(x, a, b0):
    prog = PhaseRetrieval(6, shift=0.2)
    X, b = a[None, :], np.array([b0])
    q = (a @ x) ** 2 - b0
    if abs(q) < 1e-3:  # skip points near the kink, where FD straddles it
        return
    np.testing.assert_allclose(prog.g_subgrads(x, X, b)[0], fd_grad(lambda z: prog.g_values(z, X, b)[0], x),
                               atol=1e-6)
    np.testing.assert_allclose(prog.h_subgrads(x, X, b)[0], fd_grad(lambda z: prog.h_values(z, X, b)[0], x),
                               atol=1e-6)


def test_phase_kink_subgradient_is_zero():
    prog = PhaseRetrieval(2)
    x = np.array([1.0, 0.0])
    np.testing.assert_array_equal(prog.g_subgrads(x, np.array([[1.0, 0.0]]), np.array([1.0]))[0], [0, 0])


def test_weighted_means_match_reductions(rng):
    X = rng.standard_normal((30, 4))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    b = np.abs(rng.standard_normal(30))
    w = rng.uniform(size=30)
    x = random_point_in_ball(rng, 4)
    for prog in (EpcaDecomposition1(4, 0.1), EpcaDecomposition2(4, 1.2), PhaseRetrieval(4, shift=0.5)):
        assert prog.g_mean(x, X, b, w) == pytest.approx(w @ prog.g_values(x, X, b), rel=1e-12)
        assert prog.h_mean(x, X, b, w) == pytest.approx(w @ prog.h_values(x, X, b), rel=1e-12)
        np.testing.assert_allclose(prog.h_subgrad_mean(x, X, b, w), w @ prog.h_subgrads(x, X, b), rtol=1e-12)
        np.testing.assert_allclose(prog.g_subgrad_mean(x, X, b, w), w @ prog.g_subgrads(x, X, b),
                                   rtol=1e-12, atol=1e-14)


def test_sample_and_empirical_objective():
    prog = EpcaDecomposition1(2, lam=0.5)
    s = SamplePoint(SparseVector([0], [1.0], 2))
    x = np.array([0.6, 0.0])
    assert sample_objective(prog, x, s) == pytest.approx(-0.18)  # -<x,s>^2/2
    assert sample_objective(prog, np.array([2.0, 0.0]), s) == np.inf
    t = SamplePoint(SparseVector([1], [1.0], 2))
    assert empirical_objective(prog, x, [s, t]) == pytest.approx(-0.09)
    with pytest.raises(ValueError):
        sample_objective(prog, x, [s, t])
    with pytest.raises(ValueError):
        empirical_objective(prog, np.zeros(3), [s])


def test_rho_must_be_positive():
    with pytest.raises(ValueError):
        EpcaDecomposition1(3, lam=0.0)
    with pytest.raises(ValueError):
        EpcaDecomposition2(3, L=0.9)


def test_probe_subgradients_on_valid_oracles(rng):
    X = rng.standard_normal((50, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    for prog in (EpcaDecomposition1(3, 0.2), EpcaDecomposition2(3, 1.0)):
        gaps = probe_subgradients(prog, X, np.zeros(50), rng, probes=1000)
        assert min(gaps.values()) >= -1e-12
