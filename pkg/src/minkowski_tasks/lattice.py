"""Conservative lattice routing between two events.

The lattice is anchored at the source event.  Every lattice step moves at
most ``speed_cells`` spatial cells per time slice with a time step of
``speed_cells`` cell widths, so each step is a causal segment.  Boxes are
inflated by one step in every axis before blocking lattice points, which
guarantees that a step between two unblocked points never enters a box
interior.  Paths found here are therefore certificates; failures are not.

The inner sweep runs in a compiled extension when it is available and falls
back to numpy otherwise.  Set ``MINKOWSKI_TASKS_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import itertools
import math
import os

import numpy as np

from . import _lattice_py

if os.environ.get("MINKOWSKI_TASKS_PURE"):
    sweep = _lattice_py.sweep
    BACKEND = "python"
else:
    try:
        from ._lattice import sweep
        BACKEND = "cython"
    except ImportError:
        sweep = _lattice_py.sweep
        BACKEND = "python"

# number of final-segment candidates examined before giving up
MAX_EXIT_CANDIDATES = 4000


def ball_offsets(d: int, radius: int) -> np.ndarray:
    """Integer offsets o in Z^d with |o| <= radius, in a fixed order."""
    rng = range(-radius, radius + 1)
    offs = [o for o in itertools.product(rng, repeat=d) if sum(c * c for c in o) <= radius * radius]
    return np.array(offs, dtype=np.int64)


def neighbour_table(shape: tuple[int, ...], offsets: np.ndarray) -> np.ndarray:
    """Flat index of each cell shifted by each offset, -1 when off the grid."""
    grids = np.indices(shape).reshape(len(shape), -1).T
    S = grids.shape[0]
    table = np.empty((S, len(offsets)), dtype=np.int32)
    dims = np.array(shape)
    for j, off in enumerate(offsets):
        moved = grids + off
        ok = np.all((moved >= 0) & (moved < dims), axis=1)
        flat = np.ravel_multi_index(moved.T.clip(0, dims[:, None] - 1), shape)
        table[:, j] = np.where(ok, flat, -1)
    return table


class Lattice:
    def __init__(self, src, dst, boxes, resolution: int, speed_cells: int = 2):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.src, self.dst = src, dst
        d = src.dim
        total = dst.t - src.t
        lo, hi = [], []
        for a in range(d):
            slack = max(0.0, (total - abs(dst.x[a] - src.x[a])) / 2.0)
            lo.append(min(src.x[a], dst.x[a]) - slack)
            hi.append(max(src.x[a], dst.x[a]) + slack)
        extent = max(max(h - l for l, h in zip(lo, hi)), 1e-9)
        self.hx = extent / resolution
        self.ht = speed_cells * self.hx
        self.slices = int(math.floor(total / self.ht + 1e-9)) + 1
        self.origin = []
        shape = []
        for a in range(d):
            below = int(math.ceil((src.x[a] - lo[a]) / self.hx - 1e-9))
            above = int(math.ceil((hi[a] - src.x[a]) / self.hx - 1e-9))
            self.origin.append(below)
            shape.append(below + above + 1)
        self.shape = tuple(shape)
        self.offsets = ball_offsets(d, speed_cells)
        self.start = int(np.ravel_multi_index(tuple(self.origin), self.shape))
        coords = np.indices(self.shape).reshape(d, -1).T
        self.xs = src.as_array()[1:] + (coords - np.array(self.origin)) * self.hx
        self.ts = src.t + np.arange(self.slices) * self.ht
        self.free = self._free_mask(boxes)

    def _free_mask(self, boxes) -> np.ndarray:
        T, S = self.slices, self.xs.shape[0]
        free = np.ones((T, S), dtype=np.uint8)
        margin_x, margin_t = self.ht, self.ht
        for box in boxes:
            (t_lo, t_hi), xb = box.t, box.x
            inside_x = np.ones(S, dtype=bool)
            for a, (lo, hi) in enumerate(xb):
                inside_x &= (self.xs[:, a] > lo - margin_x) & (self.xs[:, a] < hi + margin_x)
            inside_t = (self.ts > t_lo - margin_t) & (self.ts < t_hi + margin_t)
            free[np.ix_(inside_t, inside_x)] = 0
        # prune points that cannot reach the destination at all
        dx = np.linalg.norm(self.xs - self.dst.as_array()[1:], axis=1)
        remaining = self.dst.t - self.ts
        free &= (dx[None, :] <= remaining[:, None] + 1e-12).astype(np.uint8)
        free[0, self.start] = 1
        return np.ascontiguousarray(free)

    def point(self, k: int, s: int):
        from .geometry import SpacetimePoint

        return SpacetimePoint(float(self.ts[k]), tuple(float(v) for v in self.xs[s]))

    def run(self):
        nbr = neighbour_table(self.shape, self.offsets)
        return sweep(self.free, nbr, self.start)

    def backtrack(self, pred: np.ndarray, k: int, s: int) -> list[tuple[int, int]]:
        cells = [(k, s)]
        while k > 0:
            j = int(pred[k, s])
            idx = np.array(np.unravel_index(s, self.shape)) - self.offsets[j]
            s = int(np.ravel_multi_index(tuple(idx), self.shape))
            k -= 1
            cells.append((k, s))
        cells.reverse()
        return cells


def _compress(cells: list[tuple[int, int]], pred_dirs: list[int]) -> list[tuple[int, int]]:
    if len(cells) <= 2:
        return cells
    keep = [cells[0]]
    for i in range(1, len(cells) - 1):
        if pred_dirs[i] != pred_dirs[i + 1]:
            keep.append(cells[i])
    keep.append(cells[-1])
    return keep


def lattice_path(src, dst, boxes, resolution: int, speed_cells: int = 2):
    """Return a causal waypoint path src -> dst avoiding ``boxes`` or None."""
    from .geometry import segment_clear

    lat = Lattice(src, dst, boxes, resolution, speed_cells)
    reach, pred = lat.run()
    ks, ss = np.nonzero(reach)
    if ks.size == 0:
        return None
    order = np.argsort(-ks, kind="stable")[:MAX_EXIT_CANDIDATES]
    for i in order:
        k, s = int(ks[i]), int(ss[i])
        exit_pt = lat.point(k, s)
        if not segment_clear(exit_pt, dst, boxes):
            continue
        dx = math.dist(exit_pt.x, dst.x)
        if dx > dst.t - exit_pt.t + 1e-12:
            continue
        cells = lat.backtrack(pred, k, s)
        dirs = [-1] + [int(pred[kk, cc]) for kk, cc in cells[1:]]
        pts = [lat.point(kk, cc) for kk, cc in _compress(cells, dirs)]
        if pts[-1].close_to(dst, 1e-12):
            return pts
        return pts + [dst]
    return None
