"""Criticality residuals, Lyapunov values, weighted-LLN simulations and rate fits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import lsq_linear

from .core import as_batch
from .subsolvers import BallIndicator, ZeroRegularizer
from .weights import WeightSchedule, aggregates

__all__ = [
    "DistributionOracle",
    "LLNTable",
    "RateFit",
    "UnsupportedMethodError",
    "criticality_residual",
    "empirical_weighted_lln",
    "epca_probe_from_moment",
    "lyapunov_value",
    "lyapunov_value_sdca3",
    "rate_fit",
    "running_min",
]

DEFAULT_PROBE_SIZE = 2000


class UnsupportedMethodError(ValueError):
    pass


def _probe(prog, probe):
    if isinstance(probe, tuple) and len(probe) == 2 and isinstance(probe[0], np.ndarray):
        X, b = probe
        return np.ascontiguousarray(X, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if hasattr(probe, "dense") and hasattr(probe, "labels"):
        return probe.dense(), probe.labels
    return as_batch(probe, prog.dimension)


def epca_probe_from_moment(M: np.ndarray):
    """An ``n``-row probe batch whose uniform second moment equals ``M``.

    E-PCA oracles only see a probe through ``sum_i w_i s_i s_i^T``, so a large
    probe set can be compressed to its eigen-decomposition exactly.
    """
    evals, evecs = np.linalg.eigh(M)
    n = M.shape[0]
    X = (np.sqrt(np.maximum(evals, 0.0) * n)[:, None] * evecs.T)
    return np.ascontiguousarray(X), np.zeros(n)


def criticality_residual(prog, x, probe, method: str = "projected-gradient",
                         kink_tol: float = 1e-6) -> float:
    """Distance-to-criticality proxy of ``x`` on a probe batch.

    ``"projected-gradient"`` (smooth programs): with
    ``grad = mean_b [g'(x,s_b) - h'(x,s_b)] - r2'(x)`` returns
    ``||x - P(x - grad)||``, zero exactly at critical points of the sampled
    surrogate over the feasible set.

    ``"subgradient-distance"``: the exact distance from 0 to
    ``dG(x) + dr1(x) - grad H(x) - grad r2(x)`` on the finite probe sum, where
    kinks of ``g`` contribute their full segment ``[0, 1] * g'_i`` and the ball
    boundary its normal cone. Needs ``kink_mask`` and the ``g_subgrads_active``/``g_subgrads_inactive``
    branch oracles for nonsmooth ``g``;
    samples within ``kink_tol`` (relative) of their kink count as kinks, so
    the value is an approximate-subdifferential distance.
    """
    X, b = _probe(prog, probe)
    x = np.asarray(x, dtype=np.float64)
    m = X.shape[0]
    w = np.full(m, 1.0 / m)
    if method == "projected-gradient":
        if not prog.smooth:
            raise UnsupportedMethodError(
                f"{type(prog).__name__} is nonsmooth; use method='subgradient-distance'")
        grad = prog.phi_grad_mean(x, X, b, w) - prog.r2_subgrad(x)
        return float(np.linalg.norm(x - prog.r1.prox(x - grad)))
    if method != "subgradient-distance":
        raise ValueError(f"unknown method {method!r}")

    if prog.smooth:
        base = prog.phi_grad_mean(x, X, b, w) - prog.r2_subgrad(x)
        cols = np.zeros((x.size, 0))
    else:
        kink = prog.kink_mask(x, X, b, tol=kink_tol)
        G = prog.g_subgrads(x, X, b)
        # near-kink rows: inactive branch in the base, the segment to the
        # active branch as a [0, 1] column
        G[kink] = prog.g_subgrads_inactive(x, X[kink], b[kink])
        base = (w @ G) - prog.h_subgrad_mean(x, X, b, w) - prog.r2_subgrad(x)
        active = prog.g_subgrads_active(x, X[kink], b[kink]) - G[kink]
        cols = (active * w[kink][:, None]).T
    lo, hi = [0.0] * cols.shape[1], [1.0] * cols.shape[1]
    r1 = prog.r1
    if isinstance(r1, BallIndicator) and np.isfinite(r1.radius):
        nx = np.linalg.norm(x)
        if nx > r1.radius * (1 + 1e-12):
            return np.inf
        if nx >= r1.radius * (1 - 1e-10):
            cols = np.column_stack([cols, x / nx])
            lo.append(0.0)
            hi.append(np.inf)
    elif not isinstance(r1, (BallIndicator, ZeroRegularizer)):
        raise UnsupportedMethodError("subgradient distance needs a ball or zero r1")
    if cols.shape[1] == 0:
        return float(np.linalg.norm(base))
    sol = lsq_linear(cols, -base, bounds=(lo, hi), method="bvls", tol=1e-14)
    return float(np.linalg.norm(base + cols @ sol.x))


def lyapunov_value(prog, x, anchor, X, b, weights, v=None, use_Gk: bool = False) -> float:
    """``V(x) = C(x) + r1(x) - <v, x - anchor> - Hbar(anchor) - r2(anchor)``.

    ``C`` is the explicit ``G`` or, with ``use_Gk``, the weighted sample
    average of ``g``; ``Hbar`` is the weighted average of ``h(., s_i)``;
    ``v`` defaults to ``grad Hbar(anchor) + r2'(anchor)``. Infeasible ``x``
    returns ``inf``.
    """
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    r1 = prog.r1_value(x)
    if np.isinf(r1):
        return np.inf
    if v is None:
        v = prog.h_subgrad_mean(anchor, X, b, w) + prog.r2_subgrad(anchor)
    C = prog.g_mean(x, X, b, w) if use_Gk else prog.G_value(x)
    return float(C + r1 - v @ (x - anchor) - prog.h_mean(anchor, X, b, w) - prog.r2_value(anchor))


def lyapunov_value_sdca3(prog, x, stored_samples, weights, use_Gk: bool = False) -> float:
    """``V_k(x^k)``: the weighted empirical objective at the anchor itself."""
    X, b = _probe(prog, stored_samples)
    return lyapunov_value(prog, x, x, X, b, weights, use_Gk=use_Gk)


# ---------------------------------------------------------------------------
# weighted laws of large numbers

@dataclass
class DistributionOracle:
    """i.i.d. sampler with known mean.

    ``sample(rng, size)`` returns shape ``(size,)`` for scalars or
    ``(size, G)`` for a function class evaluated on a fixed grid of ``G``
    points; ``mean`` is the scalar or ``(G,)`` expectation.
    """

    sample: Callable
    mean: object
    name: str = "oracle"

    @classmethod
    def coin(cls):
        return cls(lambda rng, size: rng.choice(np.array([-1.0, 1.0]), size=size), 0.0, "coin")

    @classmethod
    def degenerate(cls, c: float = 1.0):
        return cls(lambda rng, size: np.full(size, float(c)), float(c), f"constant({c})")

    @classmethod
    def cosine_class(cls, grid_size: int = 16):
        """``f(x, s) = cos(x - s)``, ``s ~ U[0, 2pi)``, ``x`` on a grid of ``[0, pi]``; mean 0."""
        grid = np.linspace(0.0, np.pi, grid_size)
        return cls(lambda rng, size: np.cos(grid[None, :] - rng.uniform(0, 2 * np.pi, size)[:, None]),
                   np.zeros(grid_size), "cosine-class")


@dataclass
class LLNTable:
    schedule: str
    k: np.ndarray
    beta: np.ndarray
    deviations: np.ndarray  # (trials, len(k))
    mean_deviation: np.ndarray
    ratio: np.ndarray

    def ratio_bounded(self, factor: float = 10.0) -> bool:
        return bool(np.max(self.ratio) <= factor * np.median(self.ratio))

    def to_csv(self, fh):
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["k", "beta_k", "mean_deviation", "ratio"])
        for row in zip(self.k, self.beta, self.mean_deviation, self.ratio):
            wr.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def empirical_weighted_lln(oracle: DistributionOracle, schedule: WeightSchedule, K: int,
                           trials: int = 20, seed=0, grid_points: int = 40) -> LLNTable:
    """Deviation of weighted running averages from the true mean.

    For ``k`` on a log-spaced grid in ``[1, K]`` reports the max-over-grid
    absolute deviation per trial, its mean over trials, and the normalized
    ratio ``mean_dev * beta_k / (1 + sqrt(ln beta_k))``.
    """
    agg = aggregates(schedule, K)
    # alpha_i / A_K, cumulated, then rescaled by A_K / A_k
    wK = np.exp(agg["log_alpha"] - agg["log_A"][K])
    scale = np.exp(agg["log_A"][K] - agg["log_A"])
    ks = np.unique(np.geomspace(1, K, grid_points).astype(np.int64))
    mu = np.asarray(oracle.mean, dtype=np.float64)
    dev = np.empty((trials, ks.size))
    for t, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        S = np.asarray(oracle.sample(rng, K + 1), dtype=np.float64)
        if S.ndim == 1:
            S = S[:, None]
        # centre first so a degenerate law gives exactly zero deviation
        run = np.cumsum(wK[:, None] * (S - mu), axis=0)[ks] * scale[ks, None]
        dev[t] = np.max(np.abs(run), axis=1)
    beta = agg["beta"][ks]
    mean_dev = dev.mean(axis=0)
    ratio = mean_dev * beta / (1.0 + np.sqrt(np.log(beta)))
    return LLNTable(str(schedule), ks, beta, dev, mean_dev, ratio)


# ---------------------------------------------------------------------------
# rate fits

def running_min(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    v = np.where(np.isnan(v), np.inf, v)
    return np.minimum.accumulate(v)


_MODELS = {
    "inv_sqrt_log_k": lambda k: 1.0 / np.sqrt(np.log(k)),
    "logk_over_sqrt_k": lambda k: np.log(k) / np.sqrt(k),
}


@dataclass
class RateFit:
    model: str
    constant: float
    rel_residual: float
    points: int
    decay_detected: bool
    note: str = ""


def rate_fit(run, model: str, min_points: int = 20) -> RateFit:
    """Least-squares ``d_k ~ c * model(k)`` on the last half of a residual trace.

    ``run`` is a :class:`RunRecord` (uses the running minimum of its
    ``crit_residual`` column) or a ``(k, d_k)`` pair taken as given. Reports
    the scale and relative residual; no pass/fail claim is made.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(_MODELS)}")
    if isinstance(run, tuple):
        k, d = (np.asarray(a, dtype=np.float64) for a in run)
    else:
        k = run.column("k").astype(np.float64)
        d = running_min(run.column("crit_residual"))
    keep = (k >= 2) & np.isfinite(d)
    k, d = k[keep], d[keep]
    if k.size < min_points:
        raise ValueError(f"need at least {min_points} eval points, got {k.size}")
    k, d = k[k.size // 2:], d[k.size // 2:]
    m = _MODELS[model](k)
    c = float(d @ m / (m @ m))
    rel = float(np.linalg.norm(d - c * m) / np.linalg.norm(d)) if np.any(d) else 0.0
    decay = bool(d[-1] < 0.9 * d[0])
    return RateFit(model, c, rel, int(k.size), decay, "" if decay else "no decay detected")
