"""Concrete stochastic DC programs and synthetic data with known ground truth.

* :class:`EpcaDecomposition1`: ``g = (lam/2)||x||^2``, ``h = (lam/2)||x||^2 + <x,s>^2/2``
* :class:`EpcaDecomposition2`: ``g = (L/2)||x||^2 - <x,s>^2/2``, ``h = (L/2)||x||^2 + <x,s>^2/2``
* :class:`PhaseRetrieval`: ``g_i = 2 max(<a_i,x>^2 - b_i, 0)``, ``h_i = <a_i,x>^2 - b_i``

Both E-PCA programs constrain ``x`` to the unit ball (``r1`` indicator,
``r2 = 0``). Their sample losses are ``-<x,s>^2/2`` and ``-<x,s>^2``
respectively (the second split, taken verbatim, carries the quadratic term
twice); both have the same minimizers and critical points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import StochasticDCProgram, random_point_in_ball
from .data import Dataset, normalize_rows
from .subsolvers import (BallIndicator, SubproblemResult, SubproblemSpec,
                         solve_ball_quadratic, solve_inner_dca)

__all__ = [
    "EpcaDecomposition1",
    "EpcaDecomposition2",
    "FiniteDCProgram",
    "PhaseRetrieval",
    "PlantedPhaseRetrieval",
    "SpikedData",
    "epca_reference",
    "epca_reference_value",
    "make_epca",
    "make_phase_retrieval",
    "planted_phase_retrieval",
    "synth_spiked_gaussian",
]


def _gram(X, w, x):
    return kernels.weighted_gram_apply(np.ascontiguousarray(X), np.ascontiguousarray(w, dtype=np.float64),
                                       np.ascontiguousarray(x), np.empty(X.shape[1]))


class _Epca(StochasticDCProgram):
    """Shared pieces of the two E-PCA decompositions."""

    # phi(x, s) = -phi_scale * <x, s>^2
    phi_scale = 0.5
    # every oracle mean depends on the samples only through sum w_i s_i s_i^T
    moment_sufficient = True

    def __init__(self, dimension: int, curvature: float, radius: float = 1.0):
        self.dimension = int(dimension)
        self.curvature = float(curvature)
        self.r1 = BallIndicator(radius)
        self.radius = float(radius)

    def _quad(self, x, m):
        return np.full(m, 0.5 * self.curvature * (x @ x))

    def phi_values(self, x, X, b):
        p = X @ x
        return -self.phi_scale * p * p

    def phi_grad_mean(self, x, X, b, w):
        return -2.0 * self.phi_scale * _gram(X, w, x)

    def epca_objective(self, x, C) -> float:
        """``-x^T C x / 2`` for a second-moment matrix ``C`` (decomposition-free)."""
        return -0.5 * float(x @ C @ x)

    def h_values(self, x, X, b):
        p = X @ x
        return self._quad(x, X.shape[0]) + 0.5 * p * p

    def h_subgrads(self, x, X, b):
        return self.curvature * x[None, :] + (X @ x)[:, None] * X

    def h_mean(self, x, X, b, w):
        p = X @ x
        return float(0.5 * self.curvature * (x @ x) * w.sum() + 0.5 * (w @ (p * p)))

    def h_subgrad_mean(self, x, X, b, w):
        return self.curvature * w.sum() * x + _gram(X, w, x)

    def moment_matrix(self, X, w=None) -> np.ndarray:
        """``sum_i w_i s_i s_i^T`` (uniform weights by default)."""
        if w is None:
            return X.T @ X / X.shape[0]
        return (X * w[:, None]).T @ X


class EpcaDecomposition1(_Epca):
    """E-PCA with the sample-independent first component ``(lam/2)||x||^2``."""

    g_depends_on_sample = False
    has_explicit_G = True

    def __init__(self, dimension: int, lam: float = 1e-6, radius: float = 1.0):
        if not lam > 0:
            raise ValueError("lam must be positive")
        super().__init__(dimension, lam, radius)
        self.lam = float(lam)
        self.rho = self.lam
        self.h_modulus = self.lam
        self._validate()

    def g_values(self, x, X, b):
        return self._quad(x, X.shape[0])

    def g_subgrads(self, x, X, b):
        return np.tile(self.lam * x, (X.shape[0], 1))

    def g_mean(self, x, X, b, w):
        return float(0.5 * self.lam * (x @ x) * w.sum())

    def g_subgrad_mean(self, x, X, b, w):
        return self.lam * w.sum() * x

    def G_value(self, x):
        return 0.5 * self.lam * float(x @ x)

    def solve_G(self, v, x0=None, tol=None):
        return SubproblemResult(solve_ball_quadratic(self.lam, v, self.radius))

    def solve_Gk(self, v, X, b, w, x0=None, tol=None):
        # g does not depend on s, so G_k = G exactly.
        return self.solve_G(v, x0, tol)

    def __repr__(self):
        return f"EpcaDecomposition1(dimension={self.dimension}, lam={self.lam!r})"


class EpcaDecomposition2(_Epca):
    """E-PCA with ``g = (L/2)||x||^2 - <x,s>^2/2``; needs ``L >= 1`` and ``||s|| <= 1``."""

    g_depends_on_sample = True
    has_explicit_G = False
    phi_scale = 1.0

    def __init__(self, dimension: int, L: float = 1.1, radius: float = 1.0,
                 max_inner: int = 500):
        if not L >= 1:
            raise ValueError(f"L must be >= 1 for g(., s) to be convex, got {L}")
        super().__init__(dimension, L, radius)
        self.L = float(L)
        self.rho = self.L
        self.h_modulus = self.L
        self.max_inner = int(max_inner)
        self._validate()

    def g_values(self, x, X, b):
        p = X @ x
        return self._quad(x, X.shape[0]) - 0.5 * p * p

    def g_subgrads(self, x, X, b):
        return self.L * x[None, :] - (X @ x)[:, None] * X

    def g_mean(self, x, X, b, w):
        p = X @ x
        return float(0.5 * self.L * (x @ x) * w.sum() - 0.5 * (w @ (p * p)))

    def g_subgrad_mean(self, x, X, b, w):
        return self.L * w.sum() * x - _gram(X, w, x)

    def subproblem(self, v, X, w) -> SubproblemSpec:
        return SubproblemSpec(self.L * float(w.sum()), v, self.r1, X, w)

    def solve_Gk(self, v, X, b, w, x0=None, tol=1e-3):
        spec = self.subproblem(v, X, w)
        x0 = np.zeros(self.dimension) if x0 is None else x0
        return solve_inner_dca(spec, x0, tol=tol, max_inner=self.max_inner)

    def __repr__(self):
        return f"EpcaDecomposition2(dimension={self.dimension}, L={self.L!r})"


def make_epca(decomposition: int, dimension: int, **params) -> StochasticDCProgram:
    if decomposition == 1:
        return EpcaDecomposition1(dimension, **params)
    if decomposition == 2:
        return EpcaDecomposition2(dimension, **params)
    raise ValueError("decomposition must be 1 or 2")


class PhaseRetrieval(StochasticDCProgram):
    """Robust real phase retrieval ``E|<a,x>^2 - b|``; the label carries ``b``.

    At the kink ``<a,x>^2 = b`` the subgradient of ``g`` is taken as 0.
    ``h`` is not strongly convex, so ``rho`` is declared 0 unless a
    ``shift`` ``(mu/2)||x||^2`` is added to both components.
    """

    g_depends_on_sample = True
    smooth = False

    def __init__(self, dimension: int, radius: float = np.inf, shift: float = 0.0):
        self.dimension = int(dimension)
        self.radius = float(radius)
        self.r1 = BallIndicator(radius)
        self.shift = float(shift)
        self.rho = self.shift
        self.h_modulus = self.shift
        self._cvx = {}

    def _q(self, x, X, b):
        p = X @ x
        return p, p * p - b

    def g_values(self, x, X, b):
        _, q = self._q(x, X, b)
        return 2.0 * np.maximum(q, 0.0) + 0.5 * self.shift * (x @ x)

    def g_subgrads(self, x, X, b):
        p, q = self._q(x, X, b)
        coef = np.where(q > 0, 4.0 * p, 0.0)
        return coef[:, None] * X + self.shift * x[None, :]

    def h_values(self, x, X, b):
        _, q = self._q(x, X, b)
        return q + 0.5 * self.shift * (x @ x)

    def h_subgrads(self, x, X, b):
        p = X @ x
        return (2.0 * p)[:, None] * X + self.shift * x[None, :]

    def h_subgrad_mean(self, x, X, b, w):
        return 2.0 * _gram(X, w, x) + self.shift * w.sum() * x

    def phi_values(self, x, X, b):
        _, q = self._q(x, X, b)
        return np.abs(q)

    def g_subgrads_active(self, x, X, b):
        """The ``q > 0`` branch gradient ``4 <a,x> a`` (kink segments are ``[0, 1]`` times this)."""
        return (4.0 * (X @ x))[:, None] * X

    def g_subgrads_inactive(self, x, X, b):
        """The ``q < 0`` branch gradient (only the optional shift term)."""
        return np.tile(self.shift * x, (X.shape[0], 1))

    def kink_mask(self, x, X, b, tol=1e-12):
        _, q = self._q(x, X, b)
        return np.abs(q) <= tol * np.maximum(1.0, np.abs(b))

    def solve_Gk(self, v, X, b, w, x0=None, tol=None):
        """``argmin sum_i w_i g_i(x) - <v,x>`` over the ball, as a conic program."""
        import cvxpy as cp

        key = (id(X), X.shape)
        entry = self._cvx.get(key)
        if entry is None or entry[0] is not X:
            n = self.dimension
            xv = cp.Variable(n)
            vp = cp.Parameter(n)
            wp = cp.Parameter(X.shape[0], nonneg=True)
            obj = 2.0 * (wp @ cp.pos(cp.square(X @ xv) - b))
            if self.shift:
                obj = obj + 0.5 * self.shift * cp.sum(wp) * cp.sum_squares(xv)
            cons = [cp.norm(xv, 2) <= self.radius] if np.isfinite(self.radius) else []
            prob = cp.Problem(cp.Minimize(obj - vp @ xv), cons)
            entry = (X, xv, vp, wp, prob)
            if len(self._cvx) > 4:
                self._cvx.clear()
            self._cvx[key] = entry
        _, xv, vp, wp, prob = entry
        v = np.asarray(v, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        vp.value = v
        wp.value = w
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            try:
                prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12,
                           tol_ktratio=1e-10)
            except cp.SolverError:
                pass
        ok = prob.status == "optimal"
        x = np.asarray(xv.value, dtype=np.float64) if xv.value is not None else None
        if x is not None and np.isfinite(self.radius):
            nx = np.linalg.norm(x)
            if nx > self.radius:
                x = x * (self.radius / nx)
        # An interior-point answer is only accurate to ~1e-9; never hand back
        # a point whose subproblem value is worse than the warm start.
        if x0 is not None:
            x0 = np.asarray(x0, dtype=np.float64)
            value = lambda z: float(w @ self.g_values(z, X, b)) - float(v @ z)
            if x is None or value(x) > value(x0):
                return SubproblemResult(x0.copy(), 1, 0.0, False)
        if x is None:
            raise RuntimeError(f"phase-retrieval subproblem failed ({prob.status})")
        return SubproblemResult(x, 1, 0.0, ok)


@dataclass
class FiniteDCProgram:
    """A stochastic DC program restricted to the uniform distribution on ``(X, b)``."""

    program: StochasticDCProgram
    X: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.w = np.full(self.X.shape[0], 1.0 / self.X.shape[0])

    @property
    def dimension(self):
        return self.program.dimension

    def objective(self, x) -> float:
        prog = self.program
        r1 = prog.r1_value(x)
        if np.isinf(r1):
            return np.inf
        return float(np.mean(prog.phi_values(x, self.X, self.b))) + r1 - prog.r2_value(x)

    def H_subgrad(self, x) -> np.ndarray:
        return self.program.h_subgrad_mean(x, self.X, self.b, self.w) + self.program.r2_subgrad(x)

    def solve(self, v, x0, tol) -> SubproblemResult:
        prog = self.program
        if prog.has_explicit_G and not prog.g_depends_on_sample:
            return prog.solve_G(v, x0, tol)
        return prog.solve_Gk(v, self.X, self.b, self.w, x0, tol)


def make_phase_retrieval(dataset, radius: Optional[float] = None, shift: float = 0.0,
                         planted_norm: Optional[float] = None):
    """Finite-sum phase retrieval program plus its uniform-sampling adapter.

    ``dataset`` is a :class:`Dataset` (labels are ``b_i``) or an ``(A, b)``
    pair. The unconstrained model is wrapped in a ball of radius ``radius``;
    by default ``10 * ||x_bar||`` with ``||x_bar||`` estimated from
    ``mean(b) ~ ||x_bar||^2 mean(||a||^2)/n`` unless ``planted_norm`` is given.
    """
    if isinstance(dataset, Dataset):
        A, b = dataset.dense(), dataset.labels
    else:
        A, b = dataset
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.shape[0] < 1 or A.shape[0] != b.shape[0]:
        raise ValueError("need m >= 1 pairs with matching shapes")
    if radius is None:
        if planted_norm is None:
            scale = np.mean(np.einsum("ij,ij->i", A, A)) / A.shape[1]
            planted_norm = np.sqrt(max(np.mean(np.abs(b)), 1e-12) / max(scale, 1e-300))
        radius = 10.0 * max(planted_norm, 1e-6)
    prog = PhaseRetrieval(A.shape[1], radius=radius, shift=shift)
    return FiniteDCProgram(prog, A, b), prog


@dataclass
class PlantedPhaseRetrieval:
    A: np.ndarray
    b: np.ndarray
    x_bar: np.ndarray

    def dataset(self) -> Dataset:
        return Dataset.from_dense(self.A, self.b, source="planted-phase-retrieval")


def planted_phase_retrieval(m: int, n: int, seed, noise: float = 0.0) -> PlantedPhaseRetrieval:
    """Gaussian measurements ``b_i = <a_i, x_bar>^2 + noise``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x_bar = rng.standard_normal(n)
    b = (A @ x_bar) ** 2
    if noise:
        b = b + noise * rng.standard_normal(m)
    return PlantedPhaseRetrieval(A, b, x_bar)


@dataclass
class SpikedData:
    dataset: Dataset
    top_eigenvector: np.ndarray
    top_eigenvalue: float
    spike_direction: np.ndarray


def synth_spiked_gaussian(n: int, spike_direction=None, spike_strength: float = 5.0,
                          count: int = 20_000, seed=0) -> SpikedData:
    """Rows ``z ~ N(0, I + (strength - 1) u u^T)``, normalized to unit norm.

    Returns the dataset with the top eigenvector/eigenvalue of its empirical
    second-moment matrix (dense eigendecomposition), sign-aligned with ``u``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not spike_strength > 1:
        raise ValueError("spike_strength must exceed 1")
    u = np.zeros(n) if spike_direction is None else np.asarray(spike_direction, dtype=np.float64)
    if spike_direction is None:
        u[0] = 1.0
    u = u / np.linalg.norm(u)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, n))
    Z += (np.sqrt(spike_strength) - 1.0) * (Z @ u)[:, None] * u[None, :]
    ds = normalize_rows(Dataset.from_dense(Z, source="synthetic-spiked-gaussian"))
    ds.metadata.update(n=n, spike_strength=spike_strength, count=count, seed=str(seed))
    X = ds.dense()
    evals, evecs = np.linalg.eigh(X.T @ X / count)
    v = evecs[:, -1]
    if v @ u < 0:
        v = -v
    return SpikedData(ds, v, float(evals[-1]), u)


@dataclass
class ReferenceResult:
    value: float
    x: np.ndarray
    values: list


def epca_reference(validation, starts: int = 10, tol: float = 1e-3, seed=0,
                   lam: float = 1e-6, max_iter: int = 10_000) -> ReferenceResult:
    """Multi-start deterministic DCA on the validation E-PCA problem."""
    from .algorithms import run_dca

    X = validation.dense() if isinstance(validation, Dataset) else np.asarray(validation, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("validation set is empty")
    fin = FiniteDCProgram(EpcaDecomposition1(X.shape[1], lam=lam), X, np.zeros(X.shape[0]))
    rng = np.random.default_rng(seed)
    values, best = [], None
    for _ in range(starts):
        traj = run_dca(fin, random_point_in_ball(rng, X.shape[1]), tol=tol, max_iter=max_iter)
        values.append(traj.objectives[-1])
        if best is None or traj.objectives[-1] < best[0]:
            best = (traj.objectives[-1], traj.x)
    return ReferenceResult(float(best[0]), best[1], values)


def epca_reference_value(validation, starts: int = 10, tol: float = 1e-3, seed=0, **kw) -> float:
    """Minimum over ``starts`` random DCA runs of the validation objective."""
    return epca_reference(validation, starts, tol, seed, **kw).value
