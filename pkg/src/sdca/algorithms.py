"""Streaming SDCA1-4, the projected stochastic subgradient baseline and full-batch DCA.

All stochastic drivers share one sample protocol: ``s^0`` is drawn before the
loop and ``s^{k+1}`` right after producing ``x^{k+1}``, so ``K`` iterations
consume ``K + 1`` stream draws (the last one only if the stream has it).
Diagnostics are evaluated at ``k = 0``, every ``eval_every`` iterations and at
the end, with the wall clock paused while they run.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .core import StochasticDCProgram
from .diagnostics import DEFAULT_PROBE_SIZE, criticality_residual, lyapunov_value
from .subsolvers import BallIndicator, DEFAULT_TOL, SubproblemResult, project_ball
from .weights import Constant, WeightAccumulator, WeightSchedule, aggregates, parse_schedule

__all__ = [
    "AlgorithmConfig",
    "ConfigError",
    "ConstantStep",
    "DCATrajectory",
    "DiminishingStep",
    "RunRecord",
    "VARIANTS",
    "run",
    "run_dca",
    "run_pss",
    "run_sdca",
]

VARIANTS = ("SDCA1", "SDCA2", "SDCA3", "SDCA4", "DCA", "PSS")
BACKENDS = ("auto", "python", "compiled", "generic")


class ConfigError(ValueError):
    """Invalid algorithm or experiment configuration."""


@dataclass(frozen=True)
class ConstantStep:
    gamma: float

    def __call__(self, k: int) -> float:
        return self.gamma

    def __str__(self):
        return f"constant:{self.gamma!r}"


@dataclass(frozen=True)
class DiminishingStep:
    """``gamma_k = c / max(k, 1)``."""

    c: float

    def __call__(self, k: int) -> float:
        return self.c / max(k, 1)

    def __str__(self):
        return f"diminishing:{self.c!r}"


def parse_stepsize(spec) -> Union[ConstantStep, DiminishingStep]:
    """``"constant:0.005"`` or ``"diminishing:8"`` (dicts with ``kind`` also accepted)."""
    if isinstance(spec, (ConstantStep, DiminishingStep)):
        return spec
    if isinstance(spec, dict):
        kind, val = spec.get("kind"), spec.get("value")
    else:
        kind, _, val = str(spec).partition(":")
    try:
        val = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"bad stepsize {spec!r}") from None
    if kind == "constant":
        return ConstantStep(val)
    if kind == "diminishing":
        return DiminishingStep(val)
    raise ConfigError(f"unknown stepsize kind {kind!r}")


@dataclass
class AlgorithmConfig:
    """Settings for one stochastic run.

    ``memory_cap`` bounds the samples SDCA3/4 may retain; it must cover the
    whole run. ``backend="generic"`` disables the fused kernels so every
    variant goes through the oracle interface.
    """

    variant: str = "SDCA1"
    schedule: WeightSchedule = field(default_factory=Constant)
    subsolver_tol: float = DEFAULT_TOL
    eval_every: int = 50
    max_iterations: Optional[int] = None
    seed: int = 0
    memory_cap: Optional[int] = None
    stepsize: Optional[Union[ConstantStep, DiminishingStep]] = None
    track_lyapunov: bool = False
    record_iterates: bool = False
    record_subgrads: bool = False
    backend: str = "auto"
    label: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if isinstance(self.schedule, str):
            try:
                self.schedule = parse_schedule(self.schedule)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.stepsize is not None:
            self.stepsize = parse_stepsize(self.stepsize)
        if self.variant == "PSS" and self.stepsize is None:
            raise ConfigError("PSS needs a stepsize policy")
        if not self.subsolver_tol > 0:
            raise ConfigError("subsolver_tol must be positive")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.variant == "PSS":
            return f"PSS-{self.stepsize}"
        return self.variant

    def echo(self) -> dict:
        d = asdict(self)
        d["schedule"] = str(self.schedule)
        d["stepsize"] = None if self.stepsize is None else str(self.stepsize)
        return d


@dataclass
class RunRecord:
    """Per-eval-point trace of one run plus the final iterate."""

    COLUMNS = ("k", "time_ms", "val_obj", "train_obj", "crit_residual", "lyapunov",
               "step_norm", "inner_iters", "inner_residual")

    config: dict
    rows: list = field(default_factory=list)
    x: Optional[np.ndarray] = None
    draws: int = 0
    lyapunov_pairs: list = field(default_factory=list)
    iterates: Optional[list] = None
    subgrads: Optional[list] = None
    averages: Optional[list] = None

    @property
    def seed(self):
        return self.config.get("seed")

    @property
    def iterations(self) -> int:
        return self.rows[-1][0] if self.rows else 0

    def column(self, name: str) -> np.ndarray:
        j = self.COLUMNS.index(name)
        return np.array([r[j] for r in self.rows], dtype=np.float64)

    def final(self, name: str) -> float:
        return float(self.column(name)[-1])

    def to_csv(self, fh, timing: bool = True) -> None:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(self.COLUMNS)
        for k, t, *rest, it, ires in ((*r[:7], r[7], r[8]) for r in self.rows):
            wr.writerow([int(k), repr(float(t)) if timing else "nan",
                         *(repr(float(v)) for v in rest), int(it), repr(float(ires))])

    @classmethod
    def from_csv(cls, fh, config: Optional[dict] = None) -> "RunRecord":
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != cls.COLUMNS:
            raise ValueError(f"unexpected RunRecord header {header}")
        rows = []
        for r in rd:
            vals = [float(v) for v in r]
            vals[0], vals[7] = int(vals[0]), int(vals[7])
            rows.append(tuple(vals))
        return cls(config or {}, rows)


# ---------------------------------------------------------------------------
# shared plumbing

class _Clock:
    def __init__(self):
        self.elapsed = 0.0
        self._t = None

    def start(self):
        self._t = time.perf_counter()

    def stop(self):
        self.elapsed += time.perf_counter() - self._t


class _Evaluator:
    def __init__(self, prog, validation, probe, objective):
        self.prog = prog
        self.objective = objective
        self.Xv = self.bv = None
        if validation is not None:
            if isinstance(validation, tuple):
                self.Xv, self.bv = (np.asarray(a, dtype=np.float64) for a in validation)
            else:
                self.Xv, self.bv = validation.dense(), np.asarray(validation.labels, dtype=np.float64)
        if probe is None and self.Xv is not None:
            m = min(DEFAULT_PROBE_SIZE, self.Xv.shape[0])
            probe = (self.Xv[:m], self.bv[:m])
        self.probe = probe
        self.method = "projected-gradient" if prog.smooth else "subgradient-distance"

    def _objective(self, x, X, b):
        r = self.prog.r1_value(x)
        if np.isinf(r):
            return np.inf
        return float(np.mean(self.prog.phi_values(x, X, b))) + r - self.prog.r2_value(x)

    def __call__(self, x, X_train, b_train):
        if self.objective is not None:
            val = float(self.objective(x))
        elif self.Xv is not None:
            val = self._objective(x, self.Xv, self.bv)
        else:
            val = math.nan
        train = self._objective(x, X_train, b_train) if X_train.shape[0] else math.nan
        crit = (criticality_residual(self.prog, x, self.probe, self.method)
                if self.probe is not None else math.nan)
        return val, train, crit


def _prepare(prog, config, stream, x0):
    if config.max_iterations is None:
        K = stream.remaining
    else:
        K = min(config.max_iterations, stream.remaining)
    if stream.remaining == 0:
        raise ConfigError("stream is empty")
    n = prog.dimension
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    if x.shape != (n,):
        raise ConfigError(f"x0 has shape {x.shape}, expected ({n},)")
    if np.isinf(prog.r1_value(x)):
        raise ConfigError("x0 is outside dom r1")
    return K, x


def _eval_points(K: int, every: int):
    pts = list(range(0, K + 1, every))
    if pts[-1] != K:
        pts.append(K)
    return pts


def _weights_upto(agg, acc, k):
    return np.exp(agg["log_alpha"][:k + 1] - acc.log_A)


# ---------------------------------------------------------------------------
# SDCA

def run_sdca(prog: StochasticDCProgram, config: AlgorithmConfig, stream, validation=None,
             x0=None, probe=None, objective: Optional[Callable] = None) -> RunRecord:
    """Run SDCA1-4 on a single pass of ``stream``.

    Parameters
    ----------
    prog : StochasticDCProgram
    config : AlgorithmConfig
    stream : SampleStream
    validation : Dataset or (X, b), optional
        Source of ``val_obj`` and of the default criticality probe.
    x0 : array, optional
        Start point in ``dom r1``; the origin by default.
    probe : (X, b), optional
        Criticality probe batch overriding the validation prefix.
    objective : callable, optional
        Replaces the validation objective (e.g. an exact population value).
    """
    v = config.variant
    if v not in ("SDCA1", "SDCA2", "SDCA3", "SDCA4"):
        raise ConfigError(f"run_sdca cannot run {v}")
    if v in ("SDCA1", "SDCA3") and not prog.has_explicit_G:
        raise ConfigError(f"{v} needs an explicit G; {type(prog).__name__} has none")
    if not prog.rho > 0:
        raise ConfigError(f"declared rho of {type(prog).__name__} must be positive, got {prog.rho}")
    K, x = _prepare(prog, config, stream, x0)
    if v in ("SDCA3", "SDCA4") and config.memory_cap is not None and config.memory_cap < K:
        raise ConfigError(f"memory_cap={config.memory_cap} cannot hold the {K} samples {v} retains")

    from .models import EpcaDecomposition1  # local: models imports this module lazily

    fused = (v in ("SDCA1", "SDCA2") and type(prog) is EpcaDecomposition1
             and config.backend != "generic" and not config.record_subgrads)
    if fused:
        return _run_sdca12_fused(prog, config, stream, K, x, validation, probe, objective)
    return _run_sdca_generic(prog, config, stream, K, x, validation, probe, objective)


def _run_sdca12_fused(prog, config, stream, K, x, validation, probe, objective):
    impl = kernels.backend(config.backend)
    start = stream.consumed
    S, labels = stream.draw_block(K)
    S = np.ascontiguousarray(S, dtype=np.float64)
    stream.draw()  # s^K
    agg = aggregates(config.schedule, max(K, 1))
    ratios = np.ascontiguousarray(agg["ratio"][:K])
    y = np.zeros_like(x)
    ev = _Evaluator(prog, validation, probe, objective)
    rec = RunRecord(config.echo())
    rec.iterates = [x.copy()] if config.record_iterates else None
    clock = _Clock()
    step = math.nan
    k = 0
    for kk in _eval_points(K, config.eval_every):
        if kk > k:
            buf = np.empty((kk - k, x.size)) if config.record_iterates else None
            clock.start()
            step = impl.sdca12_epca_segment(S[k:kk], ratios[k:kk], prog.lam, prog.radius, x, y, buf)
            clock.stop()
            if buf is not None:
                rec.iterates.extend(buf)
            k = kk
        val, train, crit = ev(x, S[:k], labels[:k])
        rec.rows.append((k, 1e3 * clock.elapsed, val, train, crit, math.nan,
                         step, 1 if k else 0, 0.0))
    rec.x = x
    rec.draws = stream.consumed - start
    return rec


def _moment_compress(C, total):
    """Rows ``F`` with ``(total/n) F^T F = C``, used as an equivalent weighted batch."""
    evals, evecs = np.linalg.eigh(C)
    n = C.shape[0]
    F = np.sqrt(np.maximum(evals, 0.0) * n / total)[:, None] * evecs.T
    return np.ascontiguousarray(F), np.zeros(n), np.full(n, total / n)


def _run_sdca_generic(prog, config, stream, K, x, validation, probe, objective):
    v = config.variant
    averaged = v in ("SDCA1", "SDCA2")
    uses_Gk = v in ("SDCA2", "SDCA4")
    start = stream.consumed
    n = prog.dimension
    Xbuf = np.empty((K, n))
    bbuf = np.empty(K)
    sched = config.schedule
    acc = WeightAccumulator(sched)
    agg = aggregates(sched, max(K, 1)) if (uses_Gk or not averaged) else None
    # G_k of an E-PCA program depends on the samples only through their
    # weighted second moment; keep it incrementally instead of re-reducing.
    moment = uses_Gk and getattr(prog, "moment_sufficient", False) and prog.g_depends_on_sample
    C = np.zeros((n, n)) if moment else None
    y = np.zeros(n)
    w = np.zeros(n)
    ev = _Evaluator(prog, validation, probe, objective)
    rec = RunRecord(config.echo())
    rec.iterates = [x.copy()] if config.record_iterates else None
    if config.record_subgrads:
        rec.subgrads, rec.averages = [], []
    clock = _Clock()
    step, inner_it, inner_res, lyap = math.nan, 0, 0.0, math.nan
    tol = config.subsolver_tol
    evals = set(_eval_points(K, config.eval_every))

    s = stream.draw()
    for k in range(K + 1):
        if k in evals:
            val, train, crit = ev(x, Xbuf[:k], bbuf[:k])
            rec.rows.append((k, 1e3 * clock.elapsed, val, train, crit, lyap, step, inner_it, inner_res))
        if k == K:
            break
        clock.start()
        feat, label = s
        Xbuf[k], bbuf[k] = feat, label
        r = acc.accumulate(k)
        Xk, bk = Xbuf[:k + 1], bbuf[:k + 1]
        W = _weights_upto(agg, acc, k) if agg is not None else None
        if averaged:
            z = prog.h_subgrads(x, feat[None, :], np.array([label]))[0]
            u = prog.r2_subgrad(x)
            y = (1.0 - r) * y + r * z
            w = (1.0 - r) * w + r * u
            if rec.subgrads is not None:
                rec.subgrads.append(z)
                rec.averages.append(y.copy())
        else:
            y = prog.h_subgrad_mean(x, Xk, bk, W)
            w = prog.r2_subgrad(x)
        vk = y + w
        if not uses_Gk:
            res = prog.solve_G(vk, x, tol)
        elif moment:
            C = (1.0 - r) * C + r * np.outer(feat, feat)
            F, bF, wF = _moment_compress(C, 1.0)
            res = prog.solve_Gk(vk, F, bF, wF, x, tol)
        else:
            res = prog.solve_Gk(vk, Xk, bk, W, x, tol)
        x_new = res.x
        clock.stop()
        if config.track_lyapunov and not averaged:
            before = lyapunov_value(prog, x, x, Xk, bk, W, vk, use_Gk=uses_Gk)
            after = lyapunov_value(prog, x_new, x, Xk, bk, W, vk, use_Gk=uses_Gk)
            rec.lyapunov_pairs.append((before, after))
            lyap = after
        step = float(np.linalg.norm(x_new - x))
        inner_it, inner_res = res.iterations, res.residual
        x = x_new
        if rec.iterates is not None:
            rec.iterates.append(x.copy())
        s = stream.draw()
        if s is None and k + 1 < K:
            raise RuntimeError("stream ended early")
    rec.x = x
    rec.draws = stream.consumed - start
    return rec


# ---------------------------------------------------------------------------
# PSS

def run_pss(prog: StochasticDCProgram, config: AlgorithmConfig, stream, validation=None,
            x0=None, probe=None, objective: Optional[Callable] = None) -> RunRecord:
    """Projected stochastic subgradient: ``x <- P(x - gamma_k (g' - h' - r2'))``."""
    if config.stepsize is None:
        raise ConfigError("PSS needs a stepsize policy")
    if not isinstance(prog.r1, BallIndicator):
        raise ConfigError("PSS projects onto a ball; r1 must be a BallIndicator")
    K, x = _prepare(prog, config, stream, x0)
    start = stream.consumed
    radius = prog.r1.radius
    gammas = np.array([config.stepsize(k) for k in range(K)], dtype=np.float64)
    ev = _Evaluator(prog, validation, probe, objective)
    rec = RunRecord(config.echo())
    rec.iterates = [x.copy()] if config.record_iterates else None
    clock = _Clock()
    step = math.nan

    from .models import _Epca

    if isinstance(prog, _Epca) and config.backend != "generic":
        impl = kernels.backend(config.backend)
        S, labels = stream.draw_block(K)
        S = np.ascontiguousarray(S, dtype=np.float64)
        stream.draw()
        # the sample gradient of -c <x,s>^2 is -2c <x,s> s
        steps = np.ascontiguousarray(gammas * 2.0 * prog.phi_scale)
        k = 0
        for kk in _eval_points(K, config.eval_every):
            if kk > k:
                buf = np.empty((kk - k, x.size)) if config.record_iterates else None
                clock.start()
                step = impl.pss_epca_segment(S[k:kk], steps[k:kk], radius, x, buf)
                clock.stop()
                if buf is not None:
                    rec.iterates.extend(buf)
                k = kk
            val, train, crit = ev(x, S[:k], labels[:k])
            rec.rows.append((k, 1e3 * clock.elapsed, val, train, crit, math.nan, step, 0, 0.0))
        rec.x = x
        rec.draws = stream.consumed - start
        return rec

    Xbuf = np.empty((K, prog.dimension))
    bbuf = np.empty(K)
    evals = set(_eval_points(K, config.eval_every))
    s = stream.draw()
    for k in range(K + 1):
        if k in evals:
            val, train, crit = ev(x, Xbuf[:k], bbuf[:k])
            rec.rows.append((k, 1e3 * clock.elapsed, val, train, crit, math.nan, step, 0, 0.0))
        if k == K:
            break
        clock.start()
        feat, label = s
        Xbuf[k], bbuf[k] = feat, label
        Xi, bi = feat[None, :], np.array([label])
        g = prog.g_subgrads(x, Xi, bi)[0] - prog.h_subgrads(x, Xi, bi)[0] - prog.r2_subgrad(x)
        x_new = project_ball(x - gammas[k] * g, radius)
        clock.stop()
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if rec.iterates is not None:
            rec.iterates.append(x.copy())
        s = stream.draw()
    rec.x = x
    rec.draws = stream.consumed - start
    return rec


def run(prog, config: AlgorithmConfig, stream, validation=None, **kw) -> RunRecord:
    """Dispatch on ``config.variant`` (DCA is not a streaming method)."""
    if config.variant == "PSS":
        return run_pss(prog, config, stream, validation, **kw)
    if config.variant == "DCA":
        raise ConfigError("DCA runs on a finite program; use run_dca")
    return run_sdca(prog, config, stream, validation, **kw)


# ---------------------------------------------------------------------------
# deterministic DCA

@dataclass
class DCATrajectory:
    x: np.ndarray
    objectives: list
    step_norms: list
    iterations: int
    converged: bool
    iterates: Optional[list] = None


def run_dca(finite_prog, x0, tol: float = 1e-3, max_iter: int = 10_000,
            inner_tol: Optional[float] = None, record_iterates: bool = False) -> DCATrajectory:
    """Full-batch DCA ``x^{k+1} in argmin G + r1 - <grad H(x^k) + r2'(x^k), .>``.

    Stops once ``||x^{k+1} - x^k|| < tol`` or after ``max_iter`` steps.
    ``objectives[0]`` is the value at ``x0``.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    if np.isinf(finite_prog.program.r1_value(x)):
        raise ConfigError("x0 is outside dom r1")
    inner_tol = min(tol, 1e-8) if inner_tol is None else inner_tol
    objs = [finite_prog.objective(x)]
    steps = []
    its = [x.copy()] if record_iterates else None
    converged = False
    for _ in range(max_iter):
        res: SubproblemResult = finite_prog.solve(finite_prog.H_subgrad(x), x, inner_tol)
        step = float(np.linalg.norm(res.x - x))
        x = res.x
        objs.append(finite_prog.objective(x))
        steps.append(step)
        if its is not None:
            its.append(x.copy())
        if step < tol:
            converged = True
            break
    return DCATrajectory(x, objs, steps, len(steps), converged, its)
