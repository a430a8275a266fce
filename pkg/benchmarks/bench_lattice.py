"""Compare the compiled and numpy lattice sweeps on a 3+1 routing problem.

Usage: python benchmarks/bench_lattice.py [--resolution R] [--repeat N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from minkowski_tasks import _lattice_py, lattice
from minkowski_tasks.geometry import Box, point


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=24)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    box = Box((1, 3), ((-1, 1), (-1, 1), (-1, 1)))
    lat = lattice.Lattice(point(-2, 0, 0, 0), point(8, 0, 0, 0), [box], args.resolution)
    nbr = lattice.neighbour_table(lat.shape, lat.offsets)
    print(f"lattice {lat.slices} slices x {int(np.prod(lat.shape))} cells, {len(lat.offsets)} moves")

    t_py, (reach_py, _) = timed(lambda: _lattice_py.sweep(lat.free, nbr, lat.start), args.repeat)
    print(f"python  {t_py * 1e3:9.2f} ms")
    try:
        from minkowski_tasks import _lattice
    except ImportError:
        print("cython  not built")
        return 0
    t_cy, (reach_cy, _) = timed(lambda: _lattice.sweep(lat.free, nbr, lat.start), args.repeat)
    print(f"cython  {t_cy * 1e3:9.2f} ms  ({t_py / t_cy:.1f}x)")
    same = np.array_equal(np.asarray(reach_py), np.asarray(reach_cy))
    print(f"reachable sets identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
