"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 20] [--m 20000] [--repeat 5]

Both backends run the same inputs; the script checks they agree before
reporting median wall time per call and the speedup.
"""

import argparse
import statistics
import time

import numpy as np

from sdca import kernels


def _time(fn, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return statistics.median(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--m", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the python fallback is available")
    rng = np.random.default_rng(0)
    S = rng.standard_normal((args.m, args.n))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    x0 = rng.standard_normal(args.n)
    x0 *= 0.5 / np.linalg.norm(x0)
    ratios = 1.0 / np.arange(1, args.m + 1)
    steps = 8.0 / np.arange(1, args.m + 1)
    w = np.full(args.m, 1.0 / args.m)

    cases = {
        "sdca12_epca_segment": lambda k: k.sdca12_epca_segment(S, ratios, 1e-6, 1.0, x0.copy(), np.zeros(args.n)),
        "pss_epca_segment": lambda k: k.pss_epca_segment(S, steps, 1.0, x0.copy()),
        "weighted_gram_apply": lambda k: k.weighted_gram_apply(S, w, x0, np.empty(args.n)),
    }
    print(f"m={args.m} samples, n={args.n}, median of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + ("      speedup" if len(backends) > 1 else ""))
    for name, fn in cases.items():
        mods = [kernels.backend(b) for b in backends]
        results = [fn(k) for k in mods]
        if len(results) > 1:
            assert np.allclose(results[0], results[1], rtol=1e-10, atol=1e-12), name
        times = [_time(lambda k=k: fn(k), args.repeat) for k in mods]
        line = f"{name:<22}" + "".join(f"{1e3 * t:>11.3f} ms" for t in times)
        if len(times) > 1:
            line += f"  {times[0] / times[1]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
