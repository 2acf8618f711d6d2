"""Wall time of the numba and numpy kernels on the same runs.

    python3 benchmarks/bench_backends.py [--T 5] [--repeat 3]
"""
import argparse
import statistics
import time

import numpy as np

from bridgelab import _backend
from bridgelab.attractor import decompose_simulate, sample_ball
from bridgelab.dynamics import simulate
from bridgelab.params import BridgeParams


def timed(fn, repeat):
    fn()  # warm-up (jit compile / cache load)
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return statistics.median(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if _backend.HAS_NUMBA else [])
    z16 = sample_ball(16, 5.0, 0, 0)
    p = BridgeParams.from_bk(3.0, 1.0, N=16)
    p32 = BridgeParams.from_bk(3.0, 1.0, N=32)
    dt_rk4 = 2.5e-4
    cases = {
        "exponential N=16": lambda be: simulate(p, z16, args.T, backend=be),
        "rk4 N=16": lambda be: simulate(p, z16, args.T, dt=dt_rk4, scheme="rk4", backend=be),
        "split N=16": lambda be: decompose_simulate(p, z16, args.T, backend=be),
        "exponential N=32": lambda be: simulate(p32, sample_ball(32, 5.0, 0, 0), args.T,
                                                dt=2.5e-4, backend=be),
    }
    print(f"T = {args.T}, median of {args.repeat}")
    print(f"{'case':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        times = [timed(lambda: fn(be), args.repeat) for be in backends]
        speed = times[0] / times[-1] if len(times) > 1 else np.nan
        print(f"{name:<20}" + "".join(f"{t:11.3f}s" for t in times) + f"{speed:9.1f}x")


if __name__ == "__main__":
    main()
