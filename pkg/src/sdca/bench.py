"""Configuration-driven experiment runner.

An experiment is one JSON document (see ``ExperimentConfig``). Running it
writes a self-describing bundle::

    out/
      config.json          resolved configuration
      manifest.json        seeds, reference value, input hash, failures
      runs/<alg>/trial_NNN.csv
      curves/<alg>.csv     mean/std gap over trials per eval point
      summary.csv
      gap_vs_iteration.svg, gap_vs_time.svg
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import AlgorithmConfig, ConfigError, RunRecord, run
from .core import random_point_in_ball
from .data import (Dataset, LibsvmParseError, export_libsvm, load_libsvm, normalize_rows,
                   split_validation, stream_shuffled)
from .models import epca_reference, make_epca, synth_spiked_gaussian
from .svg import line_chart

__all__ = ["ExperimentConfig", "load_config", "run_experiment", "summarize", "EXPERIMENTS"]

log = logging.getLogger(__name__)

_SDCA34_HORIZON = 5000

EXPERIMENTS = {
    "exp1": [
        {"variant": "SDCA1", "decomposition": 1},
        {"variant": "SDCA2", "decomposition": 1},
        {"variant": "SDCA3", "decomposition": 1, "max_iterations": _SDCA34_HORIZON},
        {"variant": "SDCA4", "decomposition": 1, "max_iterations": _SDCA34_HORIZON},
        {"variant": "PSS", "decomposition": 1, "stepsize": "constant:0.005", "label": "PSS-constant"},
        {"variant": "PSS", "decomposition": 1, "stepsize": "diminishing:8", "label": "PSS-diminishing"},
    ],
    "exp2": [
        {"variant": "SDCA2", "decomposition": 2},
        {"variant": "SDCA4", "decomposition": 2},
    ],
    "exp3": [
        {"variant": "SDCA1", "decomposition": 1, "schedule": "constant", "label": "SDCA1-type1"},
        {"variant": "SDCA1", "decomposition": 1, "schedule": "subexp:5,0.2", "label": "SDCA1-type2"},
        {"variant": "SDCA2", "decomposition": 2, "schedule": "constant", "label": "SDCA2-type1"},
        {"variant": "SDCA2", "decomposition": 2, "schedule": "subexp:5,0.2", "label": "SDCA2-type2"},
    ],
}

_ALGO_KEYS = {"variant", "decomposition", "schedule", "stepsize", "label", "max_iterations",
              "eval_every", "subsolver_tol", "backend", "memory_cap"}
_TOP_KEYS = {"experiment", "dataset", "algorithms", "model", "trials", "seed", "workers",
             "eval_every", "max_iterations", "output", "timing", "validation_fraction", "reference"}


@dataclass
class ExperimentConfig:
    """Parsed experiment document.

    ``dataset`` is ``{"kind": "synthetic", "n", "count", "spike_strength", "seed"}``
    or ``{"kind": "libsvm", "path", "dimension"}``. ``algorithms`` defaults
    to the roster of the chosen experiment; each entry may override
    ``schedule``, ``stepsize``, ``decomposition``, ``max_iterations``,
    ``eval_every``, ``subsolver_tol``, ``backend`` and ``label``.
    """

    experiment: str = "custom"
    dataset: dict = field(default_factory=lambda: {"kind": "synthetic", "n": 20, "count": 25_000,
                                                   "spike_strength": 5.0, "seed": 0})
    algorithms: list = field(default_factory=list)
    model: dict = field(default_factory=lambda: {"lam": 1e-6, "L": 1.1})
    trials: int = 20
    seed: int = 0
    workers: int = 1
    eval_every: int = 50
    max_iterations: int | None = None
    output: str = "results"
    timing: bool = True
    validation_fraction: float = 0.2
    reference: dict = field(default_factory=lambda: {"starts": 10, "tol": 1e-3})

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | os.PathLike | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**copy.deepcopy(doc))
        if cfg.experiment not in (*EXPERIMENTS, "custom"):
            raise ConfigError(f"unknown experiment {cfg.experiment!r}")
        if not cfg.algorithms:
            if cfg.experiment == "custom":
                raise ConfigError("custom experiments need a nonempty algorithm list")
            cfg.algorithms = copy.deepcopy(EXPERIMENTS[cfg.experiment])
            if cfg.experiment == "exp2" and cfg.max_iterations is None:
                cfg.max_iterations = _SDCA34_HORIZON
        if not isinstance(cfg.trials, int) or cfg.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not isinstance(cfg.workers, int) or cfg.workers < 1:
            raise ConfigError("workers must be an integer >= 1")
        if not 0 < cfg.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in (0, 1)")
        kind = cfg.dataset.get("kind")
        if kind == "libsvm":
            if "path" not in cfg.dataset:
                raise ConfigError("libsvm dataset needs a path")
            if base_dir is not None and not os.path.isabs(cfg.dataset["path"]):
                cfg.dataset["path"] = os.path.join(base_dir, cfg.dataset["path"])
        elif kind != "synthetic":
            raise ConfigError(f"dataset kind must be 'synthetic' or 'libsvm', got {kind!r}")
        labels = set()
        for a in cfg.algorithms:
            bad = set(a) - _ALGO_KEYS
            if bad:
                raise ConfigError(f"unknown algorithm keys: {sorted(bad)}")
            if a.get("decomposition", 1) not in (1, 2):
                raise ConfigError("decomposition must be 1 or 2")
            ac = cfg.algorithm_config(a, 0)  # validates
            if ac.name in labels:
                raise ConfigError(f"duplicate algorithm label {ac.name!r}")
            labels.add(ac.name)
        return cfg

    def algorithm_config(self, a: dict, seed: int) -> AlgorithmConfig:
        return AlgorithmConfig(
            variant=a["variant"],
            schedule=a.get("schedule", "constant"),
            subsolver_tol=a.get("subsolver_tol", 1e-3),
            eval_every=a.get("eval_every", self.eval_every),
            max_iterations=a.get("max_iterations", self.max_iterations),
            seed=seed,
            memory_cap=a.get("memory_cap"),
            stepsize=a.get("stepsize"),
            backend=a.get("backend", "auto"),
            label=a.get("label"),
        )

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in sorted(_TOP_KEYS)}


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def _dataset(cfg: ExperimentConfig) -> Dataset:
    d = cfg.dataset
    if d["kind"] == "synthetic":
        return synth_spiked_gaussian(int(d.get("n", 20)), spike_strength=float(d.get("spike_strength", 5.0)),
                                     count=int(d.get("count", 25_000)), seed=d.get("seed", 0)).dataset
    try:
        ds = load_libsvm(d["path"], dimension=d.get("dimension"))
    except (OSError, LibsvmParseError) as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    try:
        return normalize_rows(ds)
    except ValueError as exc:
        raise ConfigError(f"cannot normalize dataset: {exc}") from None


def _input_hash(cfg: ExperimentConfig, ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(cfg.to_dict(), sort_keys=True).encode())
    h.update(export_libsvm(ds).encode())
    return h.hexdigest()


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(v) -> str:
    return repr(float(v))


def run_experiment(cfg: ExperimentConfig, output: str | os.PathLike | None = None) -> Path:
    """Run every (algorithm, trial) pair and write the output bundle; returns its path."""
    out = Path(output or cfg.output)
    ds = _dataset(cfg)
    train, val = split_validation(ds, cfg.validation_fraction, seed=cfg.seed)
    Xv = val.dense()
    Cv = Xv.T @ Xv / Xv.shape[0]
    ref = epca_reference(val, starts=cfg.reference.get("starts", 10), tol=cfg.reference.get("tol", 1e-3),
                         seed=cfg.seed, lam=cfg.model.get("lam", 1e-6))
    # one decomposition-free objective so every algorithm's gap is comparable
    objective = lambda x: -0.5 * float(x @ Cv @ x)
    n = ds.dimension

    def job(a, t):
        seed = cfg.seed + t
        ac = cfg.algorithm_config(a, seed)
        dec = a.get("decomposition", 1)
        params = {"lam": cfg.model.get("lam", 1e-6)} if dec == 1 else {"L": cfg.model.get("L", 1.1)}
        prog = make_epca(dec, n, **params)
        x0 = random_point_in_ball(np.random.default_rng(seed), n)
        return run(prog, ac, stream_shuffled(train, seed), val, x0=x0, objective=objective)

    jobs = [(a, t) for a in cfg.algorithms for t in range(cfg.trials)]
    results, failures = {}, []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                futs = {pool.submit(job, a, t): (a, t) for a, t in jobs}
                outcomes = [(futs[f], f) for f in futs]
                for (a, t), f in outcomes:
                    try:
                        results[(cfg.algorithm_config(a, 0).name, t)] = f.result()
                    except Exception as exc:  # recorded, aggregation continues
                        failures.append((a, t, exc))
        else:
            for a, t in jobs:
                try:
                    results[(cfg.algorithm_config(a, 0).name, t)] = job(a, t)
                except Exception as exc:
                    failures.append((a, t, exc))
    if not results:
        raise RuntimeError(f"all {len(jobs)} runs failed; first error: {failures[0][2]!r}")
    for a, t, exc in failures:
        name = cfg.algorithm_config(a, 0).name
        log.warning("run %s trial %d failed: %r", name, t, exc)
        warnings.warn(f"run {name} trial {t} failed: {exc!r}", RuntimeWarning, stacklevel=2)

    out.mkdir(parents=True, exist_ok=True)
    (out / "runs").mkdir(exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    for (name, t), rec in sorted(results.items()):
        d = out / "runs" / name
        d.mkdir(exist_ok=True)
        with open(d / f"trial_{t:03d}.csv", "w", newline="", encoding="utf-8") as fh:
            rec.to_csv(fh, timing=cfg.timing)
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {
        "experiment": cfg.experiment,
        "seed_base": cfg.seed,
        "trial_seeds": [cfg.seed + t for t in range(cfg.trials)],
        "reference_value": ref.value,
        "reference_starts": ref.values,
        "input_sha256": _input_hash(cfg, ds),
        "train_size": len(train),
        "validation_size": len(val),
        "dimension": n,
        "algorithms": [cfg.algorithm_config(a, 0).name for a in cfg.algorithms],
        "failures": [{"algorithm": cfg.algorithm_config(a, 0).name, "trial": t, "error": repr(e)}
                     for a, t, e in failures],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    summarize(out)
    return out


def _load_runs(bundle: Path) -> dict:
    runs = {}
    for d in sorted(p for p in (bundle / "runs").iterdir() if p.is_dir()):
        recs = []
        for f in sorted(d.glob("trial_*.csv")):
            with open(f, newline="", encoding="utf-8") as fh:
                recs.append(RunRecord.from_csv(fh))
        if recs:
            runs[d.name] = recs
    return runs


def _mean_curve(recs, ref):
    # trials share the eval grid unless a stream ran short; align on common k
    ks = sorted(set.intersection(*(set(int(r[0]) for r in rec.rows) for rec in recs)))
    gaps = np.array([[row[2] - ref for row in rec.rows if int(row[0]) in set(ks)] for rec in recs])
    times = np.array([[row[1] for row in rec.rows if int(row[0]) in set(ks)] for rec in recs])
    return np.array(ks), gaps.mean(axis=0), gaps.std(axis=0), times.mean(axis=0)


SUMMARY_COLUMNS = ("algorithm", "trials", "final_k", "final_gap_mean", "final_gap_std",
                   "wall_time_ms_mean", "wall_time_ms_total", "time_ratio_vs_SDCA1")


def summarize(bundle) -> list[dict]:
    """Rebuild curves, ``summary.csv`` and charts from the run CSVs of a bundle."""
    bundle = Path(bundle)
    try:
        with open(bundle / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{bundle} is not an output bundle (no manifest.json)") from None
    ref = manifest["reference_value"]
    runs = _load_runs(bundle)
    order = [a for a in manifest.get("algorithms", []) if a in runs] + \
            [a for a in runs if a not in manifest.get("algorithms", [])]
    curves, rows = {}, []
    (bundle / "curves").mkdir(exist_ok=True)
    for name in order:
        ks, mean, std, t = _mean_curve(runs[name], ref)
        curves[name] = (ks, mean, t)
        _write_csv(bundle / "curves" / f"{name}.csv", ["k", "mean_gap", "std_gap", "mean_time_ms"],
                   [[int(k), _f(m), _f(s), _f(tt)] for k, m, s, tt in zip(ks, mean, std, t)])
        finals = np.array([rec.rows[-1][2] - ref for rec in runs[name]])
        walls = np.array([rec.rows[-1][1] for rec in runs[name]])
        rows.append({"algorithm": name, "trials": len(runs[name]), "final_k": int(ks[-1]),
                     "final_gap_mean": float(finals.mean()), "final_gap_std": float(finals.std()),
                     "wall_time_ms_mean": float(walls.mean()), "wall_time_ms_total": float(walls.sum())})
    base = next((r["wall_time_ms_mean"] for r in rows if r["algorithm"] == "SDCA1"), math.nan)
    for r in rows:
        r["time_ratio_vs_SDCA1"] = r["wall_time_ms_mean"] / base if base and base == base else math.nan
    _write_csv(bundle / "summary.csv", SUMMARY_COLUMNS,
               [[r["algorithm"], r["trials"], r["final_k"]] + [_f(r[c]) for c in SUMMARY_COLUMNS[3:]]
                for r in rows])
    title = manifest.get("experiment", "")
    (bundle / "gap_vs_iteration.svg").write_text(line_chart(
        {n: (k, g) for n, (k, g, _) in curves.items()}, title=f"{title}: gap vs iteration",
        xlabel="iteration k", ylabel="validation gap", logy=True), encoding="utf-8")
    if all(np.all(np.isfinite(t)) for _, _, t in curves.values()):
        (bundle / "gap_vs_time.svg").write_text(line_chart(
            {n: (t, g) for n, (_, g, t) in curves.items()}, title=f"{title}: gap vs time",
            xlabel="time (ms)", ylabel="validation gap", logy=True), encoding="utf-8")
    return rows


def format_summary(rows: list[dict]) -> str:
    head = f"{'algorithm':<18}{'trials':>7}{'final_k':>9}{'gap_mean':>13}{'gap_std':>12}{'time_ms':>12}{'ratio':>8}"
    lines = [head]
    for r in rows:
        lines.append(f"{r['algorithm']:<18}{r['trials']:>7}{r['final_k']:>9}{r['final_gap_mean']:>13.4e}"
                     f"{r['final_gap_std']:>12.3e}{r['wall_time_ms_mean']:>12.1f}{r['time_ratio_vs_SDCA1']:>8.2f}")
    return "\n".join(lines)
