"""Benchmark the compiled detector kernel against its pure-Python source.

Runs the same workload through the numba-compiled `_detect_kernel` and the
uncompiled `.py_func` it wraps, checks the outputs are bit-identical, and
reports wall time and per-event throughput for both, plus the smaller
blanking/coincidence/autocorrelation kernels.

Usage:
    python benchmarks/bench_kernels.py [--events 200000] [--rate-cps 2e6]
                                       [--repeats 3] [--seed 7]
"""

import argparse
import time

import numpy as np

from spadsim import _backend, blanking_filter, make_generator, preset
from spadsim import _kernels
from spadsim.detector import _compile_params, _prepare_stimuli
from spadsim.instruments import autocorrelation, coincidence
from spadsim.sources import poisson_times


def _timed(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_detect(n_events: int, rate_cps: float, repeats: int, seed: int) -> None:
    params = preset("spcm-aqrh").params
    duration = int(n_events / rate_cps * 1e12)
    arrivals = poisson_times(make_generator(seed, "source"), rate_cps, duration)
    print(f"detector kernel: {arrivals.size} photons + darks over {duration / 1e12:.3f} s")

    def run(kernel):
        times, kinds = _prepare_stimuli(
            arrivals, params, make_generator(seed, "detector"), duration
        )
        c = _compile_params(params)
        return kernel(times, kinds, *c.as_kernel_args(), make_generator(seed, "detector"))

    # Warm the compiled path so compilation is not billed to the timing.
    run(_kernels._detect_kernel)
    t_jit, out_jit = _timed(lambda: run(_kernels._detect_kernel), repeats)
    t_py, out_py = _timed(lambda: run(_kernels._detect_kernel.py_func), max(1, repeats // 3))

    same = all(np.array_equal(a, b) for a, b in zip(out_jit, out_py))
    n = out_jit[0].size
    print(f"  outputs bit-identical: {same} ({n} pulses)")
    print(f"  compiled : {t_jit * 1e3:9.2f} ms  ({n / t_jit / 1e6:7.2f} M events/s)")
    print(f"  python   : {t_py * 1e3:9.2f} ms  ({n / t_py / 1e6:7.2f} M events/s)")
    print(f"  speedup  : {t_py / t_jit:9.1f}x")
    return


def bench_small(repeats: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    times = np.sort(rng.integers(0, 10_000_000_000, size=300_000)).astype(np.int64)
    b = np.sort(rng.integers(0, 10_000_000_000, size=300_000)).astype(np.int64)

    cases = [
        ("blanking_filter", lambda: blanking_filter(times, 24_000)),
        ("coincidence", lambda: coincidence(times, b, 500)),
        ("autocorrelation", lambda: autocorrelation(times[:60_000], 100_000, 100)),
    ]
    for name, fn in cases:
        fn()  # warm
        t, _ = _timed(fn, repeats)
        print(f"  {name:16s}: {t * 1e3:8.2f} ms")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=200_000, help="photon count for the detector run")
    ap.add_argument("--rate-cps", type=float, default=2e6, help="photon rate")
    ap.add_argument("--repeats", type=int, default=3, help="timing repeats (best-of)")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    print(f"numba backend enabled: {_backend.NUMBA_ENABLED}")
    if not _backend.NUMBA_ENABLED:
        print("  (SPADSIM_NUMBA disabled the compiled path; both timings run the")
        print("   same pure-Python source, so expect a ~1x ratio)")
    bench_detect(args.events, args.rate_cps, args.repeats, args.seed)
    bench_small(args.repeats, args.seed)


if __name__ == "__main__":
    main()
