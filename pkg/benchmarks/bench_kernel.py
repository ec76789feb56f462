"""Compare the compiled and pure-Python execution kernels.

    python3 benchmarks/bench_kernel.py [--repeat N]

Runs every variant of the shipped benchmarks on each available backend and
prints retired instructions per second.
"""

import argparse
import time

from faultline import benchmarks as bm
from faultline import emulator as em
from faultline import kernel


def time_backend(name: str, program, repeat: int) -> tuple[float, int]:
    best = float("inf")
    retired = 0
    for _ in range(repeat):
        s = em.load(program)
        t0 = time.perf_counter()
        res = em.run(s, backend=name)
        best = min(best, time.perf_counter() - t0)
        retired = res.retired
    return best, retired


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = sorted(kernel.available_backends())
    print(f"{'benchmark':<10} {'variant':<7} {'instructions':>12} " + " ".join(f"{b + ' MIPS':>12}" for b in backends)
          + ("   speedup" if len(backends) > 1 else ""))
    for name in bm.NAMES:
        for v, p in bm.variants(name).items():
            rates = {}
            for b in backends:
                secs, retired = time_backend(b, p, args.repeat)
                rates[b] = retired / secs / 1e6
            line = f"{name:<10} {v:<7} {retired:>12} " + " ".join(f"{rates[b]:>12.2f}" for b in backends)
            if len(backends) > 1:
                line += f"   {rates['cython'] / rates['python']:8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
