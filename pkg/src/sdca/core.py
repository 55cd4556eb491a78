"""Stochastic DC program abstraction and objective evaluation.

A stochastic DC program is

    minimize  E_s[g(x, s) - h(x, s)] + r1(x) - r2(x)

with g(., s), h(., s), r1, r2 convex. Programs expose *batched* oracles that
take a dense sample block ``X`` of shape ``(m, n)`` and labels ``b`` of
shape ``(m,)``; single-sample helpers are thin wrappers over them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .subsolvers import Regularizer, SubproblemResult, ZeroRegularizer

__all__ = [
    "IterateState",
    "SamplePoint",
    "SparseVector",
    "StochasticDCProgram",
    "as_batch",
    "as_vector",
    "empirical_objective",
    "probe_subgradients",
    "random_point_in_ball",
    "sample_objective",
]


@dataclass(frozen=True)
class SparseVector:
    """Sorted ``(index, value)`` pairs of a vector of logical length ``dim``."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError("index out of range")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        if np.any(val == 0.0):
            raise ValueError("explicit zeros are not stored")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def dot(self, x: np.ndarray) -> float:
        return float(self.values @ x[self.indices])

    def norm(self) -> float:
        return float(np.sqrt(self.values @ self.values))

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.dim == other.dim and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class SamplePoint:
    features: SparseVector
    label: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.features.dim


def as_vector(x, n: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D vector")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite coordinates")
    return x


def as_batch(samples, n: int):
    """Coerce samples to a dense ``(X, b)`` pair.

    Accepts a single :class:`SamplePoint`, a sequence of them, a
    ``(features, label)`` tuple, or an ``(X, b)`` array pair.
    """
    if isinstance(samples, SamplePoint):
        samples = [samples]
    if isinstance(samples, tuple) and len(samples) == 2 and not isinstance(samples[0], SamplePoint):
        X = np.asarray(samples[0], dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        b = np.atleast_1d(np.asarray(samples[1] if samples[1] is not None else 0.0, dtype=np.float64))
        if b.shape[0] != X.shape[0]:
            b = np.broadcast_to(b, (X.shape[0],)).copy()
    else:
        samples = list(samples)
        X = np.zeros((len(samples), n))
        b = np.zeros(len(samples))
        for i, s in enumerate(samples):
            if s.dim != n:
                raise ValueError(f"dimension mismatch: expected {n}, got {s.dim}")
            X[i, s.features.indices] = s.features.values
            b[i] = 0.0 if s.label is None else s.label
    if X.shape[1] != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {X.shape[1]}")
    return X, b


def random_point_in_ball(rng: np.random.Generator, n: int, radius: float = 1.0) -> np.ndarray:
    """Uniform draw from the closed Euclidean ball."""
    d = rng.standard_normal(n)
    d /= np.linalg.norm(d)
    return radius * rng.uniform() ** (1.0 / n) * d


class StochasticDCProgram:
    """Oracle bundle for ``E[g(x,s) - h(x,s)] + r1(x) - r2(x)``.

    Subclasses implement the batched oracles ``g_values``, ``g_subgrads``,
    ``h_values`` and ``h_subgrads``; weighted means default to reductions of
    those and may be overridden with cheaper closed forms.

    Attributes
    ----------
    dimension : int
    rho : float
        Declared lower bound on ``inf_s rho(h(., s)) + rho(r2)``; must be > 0.
    h_modulus : float
        Declared strong-convexity modulus of every ``h(., s)``.
    r1 : Regularizer
    g_depends_on_sample : bool
    has_explicit_G : bool
        Whether ``G = E[g]`` is known in closed form (``G_value``/``solve_G``).
    smooth : bool
        Whether g and h are differentiable (criticality residual applies).
    """

    dimension: int
    rho: float
    h_modulus: float
    r1: Regularizer = ZeroRegularizer()
    g_depends_on_sample: bool = True
    has_explicit_G: bool = False
    smooth: bool = True

    def _validate(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.rho > 0:
            raise ValueError(f"declared rho must be positive, got {self.rho}")

    # -- batched oracles -------------------------------------------------
    def g_values(self, x, X, b) -> np.ndarray:
        raise NotImplementedError

    def g_subgrads(self, x, X, b) -> np.ndarray:
        raise NotImplementedError

    def h_values(self, x, X, b) -> np.ndarray:
        raise NotImplementedError

    def h_subgrads(self, x, X, b) -> np.ndarray:
        raise NotImplementedError

    def g_mean(self, x, X, b, w) -> float:
        return float(w @ self.g_values(x, X, b))

    def h_mean(self, x, X, b, w) -> float:
        return float(w @ self.h_values(x, X, b))

    def g_subgrad_mean(self, x, X, b, w) -> np.ndarray:
        return w @ self.g_subgrads(x, X, b)

    def h_subgrad_mean(self, x, X, b, w) -> np.ndarray:
        return w @ self.h_subgrads(x, X, b)

    def phi_values(self, x, X, b) -> np.ndarray:
        return self.g_values(x, X, b) - self.h_values(x, X, b)

    def phi_grad_mean(self, x, X, b, w) -> np.ndarray:
        return self.g_subgrad_mean(x, X, b, w) - self.h_subgrad_mean(x, X, b, w)

    # -- deterministic parts ---------------------------------------------
    def r1_value(self, x) -> float:
        return self.r1.value(x)

    def r2_value(self, x) -> float:
        return 0.0

    def r2_subgrad(self, x) -> np.ndarray:
        return np.zeros(self.dimension)

    # -- convex subproblems: argmin C(x) + r1(x) - <v, x> -----------------
    def G_value(self, x) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no explicit G")

    def solve_G(self, v, x0, tol) -> SubproblemResult:
        raise NotImplementedError(f"{type(self).__name__} has no explicit G")

    def solve_Gk(self, v, X, b, w, x0, tol) -> SubproblemResult:
        raise NotImplementedError

    # -- single-sample conveniences ---------------------------------------
    def g_value(self, x, s) -> float:
        X, b = as_batch(s, self.dimension)
        return float(self.g_values(x, X, b)[0])

    def h_value(self, x, s) -> float:
        X, b = as_batch(s, self.dimension)
        return float(self.h_values(x, X, b)[0])

    def g_subgrad(self, x, s) -> np.ndarray:
        X, b = as_batch(s, self.dimension)
        return self.g_subgrads(x, X, b)[0]

    def h_subgrad(self, x, s) -> np.ndarray:
        X, b = as_batch(s, self.dimension)
        return self.h_subgrads(x, X, b)[0]


def _r_terms(prog: StochasticDCProgram, x) -> float:
    r1 = prog.r1_value(x)
    if np.isinf(r1):
        return np.inf
    return r1 - prog.r2_value(x)


def sample_objective(prog: StochasticDCProgram, x, s) -> float:
    """``g(x,s) - h(x,s) + r1(x) - r2(x)``; ``+inf`` outside an indicator r1."""
    x = as_vector(x, prog.dimension)
    X, b = as_batch(s, prog.dimension)
    if X.shape[0] != 1:
        raise ValueError("sample_objective takes exactly one sample")
    r = _r_terms(prog, x)
    if np.isinf(r):
        return np.inf
    return float(prog.phi_values(x, X, b)[0]) + r


def empirical_objective(prog: StochasticDCProgram, x, samples) -> float:
    """Unweighted sample mean of ``g - h`` plus the r terms counted once."""
    x = as_vector(x, prog.dimension)
    X, b = as_batch(samples, prog.dimension)
    if X.shape[0] == 0:
        raise ValueError("empirical_objective needs at least one sample")
    r = _r_terms(prog, x)
    if np.isinf(r):
        return np.inf
    return float(np.mean(prog.phi_values(x, X, b))) + r


def probe_subgradients(prog: StochasticDCProgram, X, b, rng, probes: int = 1000,
                       radius: float = 1.0) -> dict:
    """Stochastic check of the subgradient and strong-convexity inequalities.

    For random pairs ``(x, y)`` in the ball and random samples ``s``, returns
    the minimum over probes of

    * ``g_gap``: g(y,s) - g(x,s) - <g'(x,s), y-x>
    * ``h_gap``: same for h
    * ``h_strong_gap``: ``h_gap - (h_modulus/2)||y-x||^2``
    * ``r2_gap``: same as g for r2

    Valid oracles give values >= 0 (up to rounding).
    """
    n = prog.dimension
    out = {"g_gap": np.inf, "h_gap": np.inf, "h_strong_gap": np.inf, "r2_gap": np.inf}
    for _ in range(probes):
        x = random_point_in_ball(rng, n, radius)
        y = random_point_in_ball(rng, n, radius)
        i = rng.integers(X.shape[0])
        Xi, bi = X[i:i + 1], b[i:i + 1]
        d = y - x
        g_gap = prog.g_values(y, Xi, bi)[0] - prog.g_values(x, Xi, bi)[0] - prog.g_subgrads(x, Xi, bi)[0] @ d
        h_gap = prog.h_values(y, Xi, bi)[0] - prog.h_values(x, Xi, bi)[0] - prog.h_subgrads(x, Xi, bi)[0] @ d
        r2_gap = prog.r2_value(y) - prog.r2_value(x) - prog.r2_subgrad(x) @ d
        out["g_gap"] = min(out["g_gap"], g_gap)
        out["h_gap"] = min(out["h_gap"], h_gap)
        out["h_strong_gap"] = min(out["h_strong_gap"], h_gap - 0.5 * prog.h_modulus * (d @ d))
        out["r2_gap"] = min(out["r2_gap"], r2_gap)
    return {k: float(v) for k, v in out.items()}


@dataclass
class IterateState:
    """Mutable state of one SDCA run (single owner).

    ``samples`` is a preallocated dense buffer; only the first ``k + 1`` rows
    are live after iteration ``k``.
    """

    k: int
    x: np.ndarray
    y_avg: np.ndarray
    w_avg: np.ndarray
    samples: np.ndarray
    labels: np.ndarray
    accumulator: object
    h_subgrads: Optional[list] = None
    stored: int = 0

    def store(self, features, label):
        if self.stored >= self.samples.shape[0]:
            raise RuntimeError("sample buffer is full")
        self.samples[self.stored] = features
        self.labels[self.stored] = label
        self.stored += 1

    @property
    def stored_samples(self):
        return self.samples[:self.stored], self.labels[:self.stored]
