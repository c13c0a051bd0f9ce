"""Compiled kernels against the numpy fallback on typical workloads.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best time of each backend and the
speedup.  Both backends are also checked to agree: to 1e-12 for the
geometric kernels, to 1e-9 for finite-difference volumes.
"""

import argparse
import time

import numpy as np

from divkit import kernels
from divkit.constructions import flat_sphere
from divkit.divergence import FillingProblem, initial_filling
from divkit.geometry import ModelSpace, sphere_sample


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def workloads():
    space = ModelSpace.hyperbolic(2, 2)
    layout = space.layout()
    rng = np.random.default_rng(0)
    P = sphere_sample(space, 3.0, rng, 20000)
    Q = sphere_sample(space, 3.0, rng, 20000)
    t = rng.random(20000)
    f = flat_sphere(space, 2.0, 4)
    m = initial_filling(FillingProblem(space, f, 2.0))
    corners = m.images[m.domain.ordered]
    nodes = m.nodes()
    bary = rng.dirichlet(np.ones(3), len(corners))
    # (kernel, relative agreement): finite differences amplify rounding by 1/step
    return {
        "pair_dist (20000 pairs)": (lambda b: kernels.pair_dist(P, Q, layout, backend=b), 1e-12),
        "geodesic (20000 points)": (lambda b: kernels.geodesic(P, Q, t, layout, backend=b), 1e-12),
        f"cone_eval ({len(corners)} triangles)": (lambda b: kernels.cone_eval(corners, bary, layout, backend=b), 1e-12),
        f"simplex_volumes ({len(corners)} triangles)": (
            lambda b: kernels.simplex_volumes(corners, layout, nodes, 1e-5, backend=b),
            1e-9,
        ),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the numpy fallback can run")
    for name, (fn, rel) in workloads().items():
        tp, outp = best_of(lambda: fn("python"), args.repeat)
        if kernels.BACKEND != "cython":
            print(f"{name:36s} python {tp * 1e3:9.2f} ms")
            continue
        tc, outc = best_of(lambda: fn("cython"), args.repeat)
        err = float(np.max(np.abs(outp - outc)))
        assert err < rel * max(1.0, float(np.max(np.abs(outp)))), (name, err)
        print(f"{name:36s} python {tp * 1e3:9.2f} ms  cython {tc * 1e3:9.2f} ms  speedup {tp / tc:6.1f}x")


if __name__ == "__main__":
    main()
