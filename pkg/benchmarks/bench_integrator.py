"""Wall-clock comparison of the jitted and numpy gradient-flow integrators.

Usage: python benchmarks/bench_integrator.py [--n 64] [--horizon 20] [--repeat 3]

Both backends integrate the same batch of starts; the script reports the best
of ``--repeat`` timings and the largest state difference between backends.
"""
import argparse
import time

import numpy as np

from gradcert.fields import catalog_get
from gradcert.flow import StepControls, integrate_many

CASES = [("cos_example", {}), ("asinh_example", {}), ("dimpled_quadratic", {"dim": 2}),
         ("staircase_radial", {"dim": 3})]


def best_time(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'field':<20}{'dim':>4}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |dx|':>12}")
    for name, params in CASES:
        field = catalog_get(name, params)
        X0 = rng.uniform(-8, 8, size=(args.n, field.dim))
        runs = {}
        for be in ("numba", "numpy"):
            c = StepControls(backend=be)
            integrate_many(field, X0[:2], 1.0, c)  # warm-up (jit compile / cache load)
            runs[be] = best_time(lambda: integrate_many(field, X0, args.horizon, c), args.repeat)
        diff = max(float(np.max(np.abs(a.states - b.states)))
                   for a, b in zip(runs["numba"][1], runs["numpy"][1]))
        tn, tp = runs["numba"][0], runs["numpy"][0]
        print(f"{name:<20}{field.dim:>4}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
