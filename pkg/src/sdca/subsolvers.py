"""Convex subproblem solvers: ``argmin C(x) + r1(x) - <v, x>``.

``C`` is either an explicit quadratic ``(mu/2)||x||^2`` or a sample-average
surrogate ``(mu/2)||x||^2 - (1/2) sum_i w_i <x, s_i>^2`` (convex when ``mu``
dominates the data curvature).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BallIndicator",
    "CustomRegularizer",
    "Regularizer",
    "SubproblemResult",
    "SubproblemSpec",
    "ZeroRegularizer",
    "solve_ball_quadratic",
    "solve_inner_dca",
    "solve_projected_gradient",
]

# Inner cap for the false-DC subsolver; not stated in the source experiments.
DEFAULT_MAX_INNER = 500
DEFAULT_TOL = 1e-3
# Boundary rescaling shrinks by a few ulps so ||x|| <= R holds in floating point.
BOUNDARY = 1.0 - 4.0 * np.finfo(np.float64).eps


class Regularizer:
    """Convex, possibly extended-valued term r1."""

    radius = np.inf

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, x, step: float = 1.0) -> np.ndarray:
        raise NotImplementedError


class ZeroRegularizer(Regularizer):
    def value(self, x) -> float:
        return 0.0

    def prox(self, x, step=1.0):
        return np.array(x, dtype=np.float64, copy=True)

    def __repr__(self):
        return "ZeroRegularizer()"


class BallIndicator(Regularizer):
    """Indicator of the closed ball ``{x : ||x|| <= radius}``."""

    def __init__(self, radius: float = 1.0):
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        self.radius = float(radius)

    def value(self, x) -> float:
        # Boundary points produced by rescaling may exceed the radius by an ulp.
        return 0.0 if np.linalg.norm(x) <= self.radius * (1 + 1e-12) else np.inf

    def prox(self, x, step=1.0):
        return project_ball(x, self.radius)

    def __repr__(self):
        return f"BallIndicator(radius={self.radius!r})"


class CustomRegularizer(Regularizer):
    """User-supplied value and proximal oracles (``prox(x, step)``)."""

    def __init__(self, value: Callable, prox: Callable):
        self._value = value
        self._prox = prox

    def value(self, x) -> float:
        return float(self._value(x))

    def prox(self, x, step=1.0):
        return np.asarray(self._prox(x, step), dtype=np.float64)


def project_ball(x, radius: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    nx = np.linalg.norm(x)
    if nx <= radius:
        return x.copy()
    return (radius / nx * BOUNDARY) * x


@dataclass
class SubproblemResult:
    x: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True


def solve_ball_quadratic(mu: float, v, radius: float) -> np.ndarray:
    """Exact minimizer of ``(mu/2)||x||^2 - <v, x>`` over ``||x|| <= radius``.

    Returns ``v/mu`` when it is feasible, otherwise ``radius * v/||v||``.
    ``radius`` may be ``inf``.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    v = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros_like(v)
    if nv / mu <= radius:
        return v / mu
    return (radius / nv * BOUNDARY) * v


@dataclass
class SubproblemSpec:
    """``(mu/2)||x||^2 - <v,x> - (1/2) sum_i w_i <x, s_i>^2 + r1(x)``.

    Parameters
    ----------
    mu : float
    v : ndarray
    constraint : Regularizer
    samples, weights : ndarray, optional
        Data part of the concave term; ``weights`` need not sum to one.
    """

    mu: float
    v: np.ndarray
    constraint: Regularizer = ZeroRegularizer()
    samples: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.samples is not None:
            self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
            if self.weights is None:
                self.weights = np.full(self.samples.shape[0], 1.0 / self.samples.shape[0])
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if np.any(self.weights < 0):
                raise ValueError("weights must be nonnegative")
            # Trace bound first; exact top eigenvalue only if it is inconclusive.
            curvature = float(self.weights @ np.einsum("ij,ij->i", self.samples, self.samples))
            if curvature > self.mu + 1e-12:
                S = self.samples * np.sqrt(self.weights)[:, None]
                curvature = float(np.linalg.eigvalsh(S.T @ S)[-1])
            if curvature > self.mu * (1 + 1e-12) + 1e-12:
                raise ValueError(
                    f"subproblem is not convex: mu={self.mu} < data curvature {curvature}")

    @property
    def has_data(self) -> bool:
        return self.samples is not None and self.samples.shape[0] > 0

    def data_grad(self, x) -> np.ndarray:
        """Gradient of ``(1/2) sum_i w_i <x, s_i>^2``."""
        if not self.has_data:
            return np.zeros_like(self.v)
        return self.samples.T @ (self.weights * (self.samples @ x))

    def value(self, x) -> float:
        r = self.constraint.value(x)
        if np.isinf(r):
            return np.inf
        q = 0.5 * self.mu * (x @ x) - self.v @ x
        if self.has_data:
            p = self.samples @ x
            q -= 0.5 * (self.weights @ (p * p))
        return float(q + r)

    def grad(self, x) -> np.ndarray:
        """Gradient of the smooth part (everything except r1)."""
        return self.mu * x - self.v - self.data_grad(x)

    @property
    def lipschitz(self) -> float:
        return self.mu


def solve_inner_dca(spec: SubproblemSpec, x0, tol: float = DEFAULT_TOL,
                    max_inner: int = DEFAULT_MAX_INNER) -> SubproblemResult:
    """Minimize ``spec`` by DCA on its natural (false) DC split.

    The split is ``(mu/2)||x||^2 - <v,x> + r1`` minus the data term; each inner
    step linearizes the data term and solves the ball quadratic exactly, so
    the subproblem objective never increases. Stops when the step norm drops
    below ``tol``; ``converged`` is False if ``max_inner`` was hit instead.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    radius = spec.constraint.radius
    if not isinstance(spec.constraint, (BallIndicator, ZeroRegularizer)):
        raise TypeError("inner DCA needs a ball or zero constraint")
    x = np.array(x0, dtype=np.float64, copy=True)
    step = np.inf
    it = 0
    while it < max_inner:
        it += 1
        x_new = solve_ball_quadratic(spec.mu, spec.v + spec.data_grad(x), radius)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step < tol:
            return SubproblemResult(x, it, step, True)
    warnings.warn(f"inner DCA hit max_inner={max_inner} (last step {step:.3g})",
                  RuntimeWarning, stacklevel=2)
    return SubproblemResult(x, it, step, False)


def solve_projected_gradient(spec: SubproblemSpec, x0, tol: float = 1e-10,
                             max_iter: int = 100_000,
                             lipschitz: Optional[float] = None) -> SubproblemResult:
    """Projected (proximal) gradient with fixed step ``1/L``.

    The residual is the gradient-mapping norm ``L ||x - prox(x - grad/L)||``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = spec.lipschitz if lipschitz is None else lipschitz
    if not L > 0:
        raise ValueError("need a positive Lipschitz estimate")
    prox = spec.constraint.prox
    x = np.array(x0, dtype=np.float64, copy=True)
    for it in range(max_iter + 1):
        x_new = prox(x - spec.grad(x) / L, 1.0 / L)
        residual = float(L * np.linalg.norm(x - x_new))
        if residual < tol:
            return SubproblemResult(x, it, residual, True)
        x = x_new
    warnings.warn(f"projected gradient hit max_iter={max_iter} (residual {residual:.3g})",
                  RuntimeWarning, stacklevel=2)
    return SubproblemResult(x, max_iter, residual, False)
