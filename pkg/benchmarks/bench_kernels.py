"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from bwgrape import _pykernels
from bwgrape.propagate import step_propagator

try:
    from bwgrape import _ckernels
except ImportError:
    _ckernels = None


def _cases(rng):
    def herm(*shape):
        a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))

    # quartz-sized: 51 members, 235 evolution periods, D = 2
    steps2 = step_propagator(herm(51, 235, 2, 2), 0.1)
    # electron-nuclear sized: 1 member, 2000 evolution periods, D = 4
    steps4 = step_propagator(herm(1, 2000, 4, 4), 0.1)
    ud2, ud4 = np.eye(2, dtype=complex), np.eye(4, dtype=complex)
    f2, b2 = _pykernels.propagator_chains(steps2, ud2)
    f4, b4 = _pykernels.propagator_chains(steps4, ud4)
    c2 = np.broadcast_to(herm(2, 2), (51, 1, 2, 2)).copy()
    c4 = np.broadcast_to(herm(4, 4), (1, 1, 4, 4)).copy()
    return {
        "propagator_chains 51x235 D=2": ("propagator_chains", (steps2, ud2)),
        "propagator_chains 1x2000 D=4": ("propagator_chains", (steps4, ud4)),
        "period_gradients 51x235 D=2": ("period_gradients", (f2, b2, c2, 0.1)),
        "period_gradients 1x2000 D=4": ("period_gradients", (f4, b4, c4, 0.1)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    impls = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name, _ in impls) + ("     speedup" if _ckernels else ""))
    for label, (fn, fargs) in _cases(rng).items():
        times = []
        for _, mod in impls:
            f = getattr(mod, fn)
            number = max(1, int(0.2 / max(timeit.timeit(lambda: f(*fargs), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: f(*fargs), number=number, repeat=args.repeat)) / number
            times.append(best)
        row = f"{label:32s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
