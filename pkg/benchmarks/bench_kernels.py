"""Compare the compiled and pure-Python kernels on exact rank and Whitney masses.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time
from itertools import combinations

import numpy as np

from hodge_spectra import kernels
from hodge_spectra.meshes import torus2, torus3


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases():
    for mesh in (torus2(32), torus2(64), torus3(6)):
        cx = mesh.complex
        for p in range(cx.dim):
            yield f"rank d_{p} {mesh.name}", lambda b, cx=cx, p=p: kernels.exact_rank(cx.coboundary(p), backend=b)
        n = cx.dim
        g, v = mesh.metric.bary_gram, mesh.metric.volumes
        for p in range(n + 1):
            faces = np.array(list(combinations(range(n + 1), p + 1)))
            yield (f"mass p={p} {mesh.name}",
                   lambda b, g=g, v=v, f=faces, n=n: kernels.whitney_local_mass(g, v, f, n, backend=b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels._ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'case':40s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}  agree")
    for name, fn in cases():
        tc, oc = best_of(lambda: fn("compiled"), args.repeat)
        tp, op = best_of(lambda: fn("python"), args.repeat)
        agree = np.allclose(oc, op, rtol=1e-12, atol=1e-14)
        print(f"{name:40s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}  {agree}")


if __name__ == "__main__":
    main()
