"""Weight sequences for the running averages and their admissibility checks.

Three families are supported:

* ``Constant``        alpha_k = 1
* ``Power(e)``        alpha_0 = 1, alpha_k = k**e (e >= -1/2)
* ``SubExponential``  alpha_0 = 1, alpha_k = a**((k+1)**e) - a**(k**e)
  (a > 1, 0 < e < 1/4)

For the sub-exponential family every aggregate is carried in the log domain so
that ``a**(k**e)`` is never formed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Constant",
    "ConditionReport",
    "Power",
    "SubExponential",
    "WeightAccumulator",
    "WeightSchedule",
    "accumulate",
    "aggregates",
    "parse_schedule",
    "verify_conditions",
    "weight",
]


class WeightSchedule:
    """Immutable description of a positive weight sequence."""

    name = "schedule"

    def weight(self, k: int) -> float:
        raise NotImplementedError

    def log_weight(self, k: int) -> float:
        return math.log(self.weight(k))

    def weights(self, K: int) -> np.ndarray:
        """``alpha_0 .. alpha_K`` as an array."""
        return np.array([self.weight(k) for k in range(K + 1)])

    def log_weights(self, K: int) -> np.ndarray:
        return np.log(self.weights(K))

    @property
    def log_domain(self) -> bool:
        return False


@dataclass(frozen=True)
class Constant(WeightSchedule):
    name = "constant"

    def weight(self, k):
        return 1.0

    def log_weight(self, k):
        return 0.0

    def weights(self, K):
        return np.ones(K + 1)

    def __str__(self):
        return "constant"


@dataclass(frozen=True)
class Power(WeightSchedule):
    exponent: float
    name = "power"

    def __post_init__(self):
        if not self.exponent >= -0.5:
            raise ValueError(f"power exponent must be >= -1/2, got {self.exponent}")

    def weight(self, k):
        return 1.0 if k == 0 else float(k) ** self.exponent

    def weights(self, K):
        k = np.arange(K + 1, dtype=np.float64)
        k[0] = 1.0
        return k ** self.exponent

    def __str__(self):
        return f"power:{self.exponent:g}"


@dataclass(frozen=True)
class SubExponential(WeightSchedule):
    base: float
    exponent: float
    name = "subexp"

    def __post_init__(self):
        if not self.base > 1:
            raise ValueError(f"base must exceed 1, got {self.base}")
        if not 0 < self.exponent < 0.25:
            raise ValueError(f"exponent must lie in (0, 1/4), got {self.exponent}")

    @property
    def log_domain(self):
        return True

    def log_weight(self, k):
        if k == 0:
            return 0.0
        la = math.log(self.base)
        e = self.exponent
        # a^{(k+1)^e} - a^{k^e} = a^{k^e} * expm1(((k+1)^e - k^e) ln a)
        # (k+1)^e - k^e = k^e * expm1(e * log1p(1/k)), stable for large k
        ke = float(k) ** e
        return ke * la + math.log(math.expm1(ke * math.expm1(e * math.log1p(1.0 / k)) * la))

    def weight(self, k):
        return math.exp(self.log_weight(k))

    def log_weights(self, K):
        k = np.arange(1, K + 1, dtype=np.float64)
        la = math.log(self.base)
        e = self.exponent
        out = np.empty(K + 1)
        out[0] = 0.0
        ke = k ** e
        out[1:] = ke * la + np.log(np.expm1(ke * np.expm1(e * np.log1p(1.0 / k)) * la))
        return out

    def weights(self, K):
        return np.exp(self.log_weights(K))

    def log_total(self, k):
        """``log A_k`` from the telescoped sum ``1 - a + a^{(k+1)^e}``."""
        if k == 0:
            return 0.0
        t = (k + 1) ** self.exponent * math.log(self.base)
        return t + math.log1p((1.0 - self.base) * math.exp(-t))

    def log_totals(self, K):
        k = np.arange(K + 1, dtype=np.float64)
        t = (k + 1) ** self.exponent * math.log(self.base)
        out = t + np.log1p((1.0 - self.base) * np.exp(-t))
        out[0] = 0.0
        return out

    def __str__(self):
        return f"subexp:{self.base:g},{self.exponent:g}"


def weight(schedule: WeightSchedule, k: int) -> float:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return schedule.weight(k)


def parse_schedule(text: str) -> WeightSchedule:
    """Parse ``constant``, ``power:<e>`` or ``subexp:<a>,<e>``."""
    name, _, args = text.strip().partition(":")
    name = name.lower()
    try:
        vals = [float(t) for t in args.split(",")] if args else []
    except ValueError:
        raise ValueError(f"bad schedule parameters in {text!r}") from None
    if name == "constant" and not vals:
        return Constant()
    if name == "power" and len(vals) == 1:
        return Power(vals[0])
    if name in ("subexp", "subexponential") and len(vals) == 2:
        return SubExponential(vals[0], vals[1])
    raise ValueError(f"unknown schedule {text!r}; use constant | power:e | subexp:a,e")


class _Neumaier:
    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, v):
        t = self.s + v
        if abs(self.s) >= abs(v):
            self.c += (self.s - t) + v
        else:
            self.c += (v - t) + self.s
        self.s = t

    @property
    def value(self):
        return self.s + self.c


class WeightAccumulator:
    """Running ``A_k = sum alpha_i``, ``S_k = sum alpha_i^2`` and ``beta_k``.

    Call :meth:`accumulate` with ``k = 0, 1, 2, ...`` in order; it returns the
    mixing ratio ``r_k = alpha_k / A_k`` used by the incremental averages.
    """

    def __init__(self, schedule: WeightSchedule):
        self.schedule = schedule
        self.k = -1
        self.alpha = 0.0
        self.log_alpha = -np.inf
        self.log_A = -np.inf
        self.log_S = -np.inf
        self.ratio = 0.0
        self._A = _Neumaier()
        self._S = _Neumaier()

    def accumulate(self, k: int) -> float:
        if k != self.k + 1:
            raise ValueError(f"out-of-order accumulate: expected k={self.k + 1}, got {k}")
        sch = self.schedule
        if sch.log_domain:
            la = sch.log_weight(k)
            prev = self.log_A
            self.log_alpha = la
            self.log_A = sch.log_total(k)
            self.log_S = float(np.logaddexp(self.log_S, 2.0 * la))
            self.alpha = math.exp(la) if la < 700 else math.inf
            self.ratio = 1.0 if k == 0 else -math.expm1(prev - self.log_A)
        else:
            a = sch.weight(k)
            self.alpha = a
            self.log_alpha = math.log(a)
            self._A.add(a)
            self._S.add(a * a)
            self.log_A = math.log(self._A.value)
            self.log_S = math.log(self._S.value)
            self.ratio = a / self._A.value
        self.k = k
        return self.ratio

    @property
    def A(self) -> float:
        if not self.schedule.log_domain:
            return self._A.value
        return math.exp(self.log_A) if self.log_A < 700 else math.inf

    @property
    def S(self) -> float:
        if not self.schedule.log_domain:
            return self._S.value
        return math.exp(self.log_S) if self.log_S < 700 else math.inf

    @property
    def beta(self) -> float:
        return math.exp(self.log_A - 0.5 * self.log_S)

    def normalized_weights(self) -> np.ndarray:
        """``alpha_i / A_k`` for ``i = 0..k`` (sums to one)."""
        return np.exp(self.schedule.log_weights(self.k) - self.log_A)


def accumulate(acc: WeightAccumulator, schedule: WeightSchedule, k: int):
    """Advance ``acc`` to index ``k``; returns ``(acc, r_k)``."""
    if acc.schedule != schedule:
        raise ValueError("accumulator belongs to a different schedule")
    r = acc.accumulate(k)
    return acc, r


def aggregates(schedule: WeightSchedule, K: int) -> dict:
    """Vectorized ``alpha``, ``log_A``, ``log_S``, ``beta`` and ``ratio`` for k = 0..K."""
    if schedule.log_domain:
        log_alpha = schedule.log_weights(K)
        log_A = schedule.log_totals(K)
    else:
        alpha = schedule.weights(K)
        log_alpha = np.log(alpha)
        log_A = np.log(np.cumsum(alpha))
    log_S = np.logaddexp.accumulate(2.0 * log_alpha)
    ratio = np.ones(K + 1)
    ratio[1:] = -np.expm1(log_A[:-1] - log_A[1:])
    return {
        "k": np.arange(K + 1),
        "log_alpha": log_alpha,
        "alpha": np.exp(np.minimum(log_alpha, 700.0)),
        "log_A": log_A,
        "A": np.exp(np.minimum(log_A, 700.0)),
        "log_S": log_S,
        "log_beta": log_A - 0.5 * log_S,
        "beta": np.exp(log_A - 0.5 * log_S),
        "ratio": ratio,
    }


def _loglog_slope(k, log_y):
    slope, intercept = np.polyfit(np.log(k), log_y, 1)
    return float(slope), float(intercept)


def _tail_grid(K: int, points: int = 200) -> np.ndarray:
    lo = max(1, K // 10)
    return np.unique(np.geomspace(lo, K, points).astype(np.int64))


@dataclass
class ConditionReport:
    """Finite-horizon evidence for the admissibility conditions of a schedule.

    Verdicts are ``"consistent"``, ``"violated up to K"`` or ``"inconclusive"``;
    they are numerical evidence at horizon ``K``, never proof.
    """

    schedule: str
    K: int
    A_K: float
    divergence_ratio: float
    divergence: str
    gamma_hat: float
    N_hat: float
    N_grid: dict
    decay: str
    gamma_branch: bool
    series_partial_sum: float
    condensation_ratio: float
    series: str
    quotient_deviation: dict
    quotient: str
    beta_slope: float
    passed: bool
    thresholds: dict
    table: dict = field(repr=False, default_factory=dict)

    @property
    def branches(self) -> list[str]:
        out = []
        if self.gamma_branch:
            out.append("gamma>1/2")
        if self.quotient == "consistent":
            out.append("quotient-limit")
        return out

    def summary(self) -> str:
        lines = [
            f"schedule {self.schedule}, horizon K={self.K}",
            f"  (a) divergence: A_K={self.A_K:.6g}, A_K/A_(K/10)={self.divergence_ratio:.4g} -> {self.divergence}",
            f"  (b) gamma_hat={self.gamma_hat:.4f}, N(gamma_hat)={self.N_hat:.4g} -> {self.decay}",
            f"  (c) series partial sum={self.series_partial_sum:.6g}, condensation ratio={self.condensation_ratio:.4f} -> {self.series}",
            "  (d) quotient deviation " + ", ".join(f"k={k}: {v:.4g}" for k, v in self.quotient_deviation.items())
            + f" -> {self.quotient}",
            f"  beta_k log-log slope={self.beta_slope:.4f}",
            f"  branches: {', '.join(self.branches) or 'none'}",
            f"  overall: {'consistent with all conditions' if self.passed else 'NOT consistent'} up to K",
        ]
        return "\n".join(lines)

    def to_csv(self, fh) -> None:
        """Columns ``k, alpha_k, A_k, beta_k, cond_c_partial_sum``."""
        t = self.table
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "alpha_k", "A_k", "beta_k", "cond_c_partial_sum"])
        for row in zip(t["k"], t["alpha"], t["A"], t["beta"], t["partial"]):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def verify_conditions(schedule: WeightSchedule, K: int,
                      gamma_grid=(0.25, 0.5, 0.75, 1.0)) -> ConditionReport:
    """Check the weight-sequence admissibility conditions numerically up to ``K``.

    (a) divergence of ``A_k``; (b) ``S_k/A_k^2 <= N/k^gamma`` with ``gamma``
    fitted on ``[K/10, K]``; (c) summability of
    ``alpha_k (1 + sqrt(ln beta_{k-1})) / (beta_{k-1} A_k)`` by a Cauchy
    condensation ratio test on dyadic blocks; (d) the quotient limit
    ``A_l/A_k -> 1`` for ``l in [0.99k, k]``.
    """
    if K < 1000:
        raise ValueError("verify_conditions needs K >= 1000")
    thr = {
        "divergence_ratio_min": 2.0,
        "gamma_min": 0.05,
        "condensation_consistent_below": 0.99,
        "condensation_violated_above": 1.01,
        "quotient_window": 0.99,
        "quotient_max_deviation": 0.05,
    }
    agg = aggregates(schedule, K)
    log_A, log_S, log_alpha, log_beta = agg["log_A"], agg["log_S"], agg["log_alpha"], agg["log_beta"]
    k = agg["k"]

    ratio = float(np.exp(log_A[K] - log_A[max(1, K // 10)]))
    increasing = bool(np.all(np.diff(log_A) > 0))
    divergence = "consistent" if (ratio >= thr["divergence_ratio_min"] and increasing) else "violated up to K"

    log_q = log_S - 2.0 * log_A  # log(S_k / A_k^2)
    grid = _tail_grid(K)
    slope, _ = _loglog_slope(grid, log_q[grid])
    gamma_hat = -slope
    kk = k[1:].astype(np.float64)
    N_of = lambda g: float(np.exp(np.max(log_q[1:] + g * np.log(kk))))
    N_hat = N_of(gamma_hat)
    N_grid = {float(g): N_of(g) for g in gamma_grid}
    decay = "consistent" if gamma_hat > thr["gamma_min"] else "violated up to K"

    lb = np.maximum(log_beta, 0.0)  # beta_k >= 1; clip rounding
    log_terms = log_alpha[1:] + np.log1p(np.sqrt(lb[:-1])) - lb[:-1] - log_A[1:]
    terms = np.exp(log_terms)
    partial = np.concatenate([[0.0], np.cumsum(terms)])
    blocks = []
    j = 0
    while 2 ** (j + 1) - 1 <= K:
        blocks.append(terms[2 ** j - 1:2 ** (j + 1) - 1].sum())  # k in [2^j, 2^{j+1})
        j += 1
    ratios = np.array(blocks[1:]) / np.array(blocks[:-1])
    cond_ratio = float(np.exp(np.mean(np.log(ratios[-3:]))))
    if cond_ratio < thr["condensation_consistent_below"]:
        series = "consistent"
    elif cond_ratio > thr["condensation_violated_above"]:
        series = "violated up to K"
    else:
        series = "inconclusive"

    qdev = {}
    for kq in (K // 2, K):
        lo = int(math.ceil(thr["quotient_window"] * kq))
        qdev[kq] = float(-np.expm1(log_A[lo] - log_A[kq]))
    quotient = "consistent" if max(qdev.values()) <= thr["quotient_max_deviation"] else "violated up to K"

    beta_slope, _ = _loglog_slope(grid, log_beta[grid])
    gamma_branch = gamma_hat > 0.5
    passed = (divergence == "consistent" and decay == "consistent" and series == "consistent"
              and (gamma_branch or quotient == "consistent"))

    table = {"k": k, "alpha": agg["alpha"], "A": agg["A"], "beta": agg["beta"], "partial": partial}
    return ConditionReport(
        schedule=str(schedule), K=K, A_K=float(agg["A"][K]), divergence_ratio=ratio,
        divergence=divergence, gamma_hat=gamma_hat, N_hat=N_hat, N_grid=N_grid, decay=decay,
        gamma_branch=gamma_branch, series_partial_sum=float(partial[K]),
        condensation_ratio=cond_ratio, series=series, quotient_deviation=qdev,
        quotient=quotient, beta_slope=beta_slope, passed=passed, thresholds=thr, table=table,
    )
