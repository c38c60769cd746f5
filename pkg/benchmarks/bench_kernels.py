"""Compare the compiled and pure-python kernels on representative inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from loopsoup import kernels
from loopsoup.planar import AbsorbingDomain, Disc, Point2, soup2d, wos
from loopsoup.rng import RngStream


def cover_inputs():
    g = np.random.default_rng(0)
    counts = g.poisson(60, 2000)
    starts = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    a = g.uniform(0, 2, starts[-1])
    b = a + g.exponential(0.05, starts[-1])
    return (a, b, starts, 1.0, 2.0)


def wos_inputs():
    dom = AbsorbingDomain(Disc(Point2(0, 0), 1.0))
    table = wos._circle_table([Disc(Point2(0.3, 0.2), 0.05)], dom, 1e-6)
    return (table, 0.0, 0.0, 0.0, RngStream(1).key, 0, 20_000, 100_000)


def cluster_inputs():
    loops = soup2d.sample_loop_soup_2d(0.5, rng=RngStream(2), t_min=1e-3).loops
    seg, owner = soup2d._segments(loops)
    delta = np.ascontiguousarray(np.array([l.default_delta for l in loops])[owner])
    members, cs = soup2d._grid_cells(seg, delta)
    return (seg, owner, delta, members, cs, len(loops))


CASES = {"cover_scan": cover_inputs, "wos_run": wos_inputs, "cluster_segments": cluster_inputs}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, make in CASES.items():
        inputs = make()
        times = []
        for b in backends:
            fn = getattr(kernels.get_backend(b), name)
            times.append(min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat)))
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{name:<18}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
