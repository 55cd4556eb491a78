"""``sdca-bench`` command line.

Exit codes: 0 success, 1 configuration/input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .algorithms import ConfigError
from .data import Dataset, export_libsvm
from .weights import parse_schedule, verify_conditions

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parse_params(text: str) -> dict:
    """``key=value,key=value`` or a JSON object (inline or ``@file``)."""
    text = text.strip()
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            text = fh.read()
    if text.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON params: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("params must be a JSON object")
        return doc
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {part!r}")
        try:
            out[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            out[key.strip()] = val.strip()
    return out


_GEN_DEFAULTS = {
    "spiked": {"n": 20, "count": 25_000, "strength": 5.0, "seed": 0},
    "phase": {"m": 100, "n": 10, "seed": 0, "noise": 0.0},
}


def _gen_data(params: dict) -> Dataset:
    from .models import planted_phase_retrieval, synth_spiked_gaussian

    p = dict(params)
    kind = p.pop("kind", "spiked")
    if kind not in _GEN_DEFAULTS:
        raise ConfigError(f"unknown data kind {kind!r} (spiked | phase)")
    unknown = set(p) - set(_GEN_DEFAULTS[kind])
    if unknown:
        raise ConfigError(f"unknown parameters for {kind}: {sorted(unknown)}")
    q = {**_GEN_DEFAULTS[kind], **p}
    try:
        if kind == "spiked":
            return synth_spiked_gaussian(int(q["n"]), spike_strength=float(q["strength"]),
                                         count=int(q["count"]), seed=int(q["seed"])).dataset
        return planted_phase_retrieval(int(q["m"]), int(q["n"]), seed=int(q["seed"]),
                                       noise=float(q["noise"])).dataset()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _cmd_run(args) -> int:
    from .bench import format_summary, load_config, run_experiment, summarize

    cfg = load_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    out = run_experiment(cfg, args.out)
    print(f"wrote {out}")
    print(format_summary(summarize(out)))
    return EXIT_OK


def _cmd_summarize(args) -> int:
    from .bench import format_summary, summarize

    print(format_summary(summarize(args.dir)))
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        sched = parse_schedule(args.schedule)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.horizon < 1000:
        raise ConfigError("--horizon must be >= 1000")
    rep = verify_conditions(sched, args.horizon)
    print(rep.summary())
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            rep.to_csv(fh)
    return EXIT_OK


def _cmd_gen(args) -> int:
    ds = _gen_data(_parse_params(args.params))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            export_libsvm(ds, fh)
        print(f"wrote {len(ds)} rows (n={ds.dimension}) to {args.out}", file=sys.stderr)
    else:
        export_libsvm(ds, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdca-bench", description="Stochastic DCA experiments and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, help="concurrent runs")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("summarize", help="rebuild summary and charts of an output bundle")
    s.add_argument("dir")
    s.set_defaults(func=_cmd_summarize)

    v = sub.add_parser("verify-schedule", help="check weight-schedule conditions numerically")
    v.add_argument("schedule", help="constant | power:E | subexp:A,E")
    v.add_argument("--horizon", type=int, required=True, metavar="K")
    v.add_argument("--csv", help="write the per-k condition table here")
    v.set_defaults(func=_cmd_verify)

    g = sub.add_parser("gen-data", help="write a synthetic dataset in LIBSVM format")
    g.add_argument("params", help="e.g. kind=spiked,n=20,count=25000,strength=5,seed=0 or kind=phase,m=100,n=10")
    g.add_argument("--out", help="output file (stdout by default)")
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command != "run" else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
