"""Time the compiled and pure-Python simulation kernels on the same workload.

    python benchmarks/bench_kernels.py [--arrivals N] [--repeat R]

Both kernels consume identical random streams, so the estimates printed
must agree exactly; only wall time differs.
"""

import argparse
import time

from rosslab.ctmc import Ctmc
from rosslab.queue import Deterministic, Exponential, QueueSpec
from rosslab.sim import KERNELS, simulate_mean_workload


def main():
    ap = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--arrivals", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    chain = Ctmc([[-1, 1, 0], [0.5, -1, 0.5], [0, 1, -1]], [0.3, 0.9, 1.5])
    specs = {"exponential": QueueSpec(chain, 1.0, Exponential(2.0)),
             "deterministic": QueueSpec(chain, 1.0, Deterministic(0.5))}
    print(f"{'service':<14}{'kernel':<10}{'best s':>10}{'arrivals/s':>14}  estimate")
    for name, spec in specs.items():
        best = {}
        for kernel in KERNELS:
            times = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                est = simulate_mean_workload(spec, arrivals=args.arrivals, seed=0, kernel=kernel)
                times.append(time.perf_counter() - t0)
            best[kernel] = min(times)
            print(f"{name:<14}{kernel:<10}{best[kernel]:>10.3f}{args.arrivals / best[kernel]:>14.0f}"
                  f"  {est.value:.6f} +- {est.half_width:.6f}")
        if len(best) == 2:
            print(f"{'':<14}speed-up {best['python'] / best['compiled']:.1f}x")


if __name__ == "__main__":
    main()
