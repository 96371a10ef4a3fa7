"""Compare the compiled kernels with their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Prints wall time per call for each backend, the speedup, and whether the
two backends returned identical output.
"""
import argparse
import time

import numpy as np

from d2oc import _kernels_py as py
from d2oc.transport import _candidates

try:
    from d2oc import _kernels as ext
except ImportError:  # extension not built
    ext = None


def _ot_instance(rng, m, n, side=200.0):
    src = rng.random((m, 2)) * side
    g = (np.arange(int(np.sqrt(n))) + 0.5) * side / int(np.sqrt(n))
    gx, gy = np.meshgrid(g, g)
    dst = np.column_stack((gx.ravel(), gy.ravel()))[:n]
    C = ((src[:, None, :] - dst[None, :, :]) ** 2).sum(axis=2)
    a = rng.random(m) + 0.1
    b = np.exp(-((dst - side / 2) ** 2).sum(axis=1) / (2 * (side / 5) ** 2)) + 1e-3
    return a / a.sum(), b / b.sum(), C


def _time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _same(x, y):
    if isinstance(x, tuple):
        return all(_same(p, q) for p, q in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small sizes only")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    cases = []
    sizes = [(50, 400)] if args.quick else [(50, 400), (150, 900)]
    for m, n in sizes:
        a, b, C = _ot_instance(rng, m, n)
        cand = _candidates(C)
        cases.append((f"network_simplex {m}x{n}", "network_simplex", (a, b, C, cand)))
    for n in ([300] if args.quick else [300, 900]):
        pos = rng.random((n, 2)) * 100.0
        w = rng.random(n)
        cases.append((f"greedy_merge n={n}", "greedy_merge", (pos, w, 2.0)))
        cases.append((f"farthest_point_order n={n}", "farthest_point_order", (pos, w, n // 3)))

    print(f"{'kernel':32s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}  identical")
    for label, name, call_args in cases:
        tp, outp = _time(lambda: getattr(py, name)(*call_args), args.repeat)
        if ext is None:
            print(f"{label:32s} {tp:11.4f} {'n/a':>13s} {'n/a':>8s}  n/a")
            continue
        tc, outc = _time(lambda: getattr(ext, name)(*call_args), args.repeat)
        print(f"{label:32s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}  {_same(outp, outc)}")


if __name__ == "__main__":
    main()
