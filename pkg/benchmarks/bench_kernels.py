"""Timing comparison of the compiled kernels against the numpy fallbacks.

Run twice to see both paths:

    python3 benchmarks/bench_kernels.py
    COLOURCONTAINERS_NO_NUMBA=1 python3 benchmarks/bench_kernels.py

The first invocation includes JIT compilation in the warmup, not in the
reported times.
"""

import time

import numpy as np

from colourcontainers import extremal, graphons, kernels, properties


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_enumerate():
    prop = properties.get_property("rainbow-k3")
    host = prop.host_for(5)
    cs = properties.property_constraints(prop, host)
    out = np.empty((0, 0), dtype=np.int8)

    def run():
        return kernels.enumerate_colourings(
            host.num_sites, prop.k, cs.con_ptr, cs.con_edge, cs.con_col,
            cs.last_ptr, cs.last_idx, 0, out)

    run()
    return "enumerate 3^10 rainbow members", _time(run)


def bench_bb():
    prop = properties.get_property("rainbow-k3")

    def run():
        return extremal.extremal_entropy(prop, 5)

    run()
    return "branch-and-bound rainbow n=5", _time(run)


def bench_cut_norm():
    rng = np.random.default_rng(0)
    wd = rng.standard_normal((16, 16, 2)) / 256.0

    def run():
        return kernels.cut_norm_exact(np.ascontiguousarray(wd), 0)

    run()
    return "cut norm, 16 atoms, k=2", _time(run)


def bench_cut_distance():
    u = graphons.random_step_graphon(8, 3, seed=1)
    w = graphons.random_step_graphon(8, 3, seed=2)

    def run():
        return graphons.cut_distance(u, w)

    run()
    return "cut distance, 8+8 parts, k=3", _time(run)


def main():
    mode = "numba" if kernels.USING_NUMBA else "numpy fallback"
    print("kernel path: %s" % mode)
    for bench in (bench_enumerate, bench_bb, bench_cut_norm,
                  bench_cut_distance):
        name, dt = bench()
        print("%-36s %8.1f ms" % (name, dt * 1e3))


if __name__ == "__main__":
    main()
