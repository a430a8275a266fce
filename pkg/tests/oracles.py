"""Independent reference computations used to cross-check the package.

Nothing here imports minkowski_tasks; each function recomputes a quantity
from first principles with plain Python or numpy.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# --- 1+1 reachability around boxes by brute-force lattice BFS -------------------

def _inside(t, x, boxes):
    return any(t0 < t < t1 and x0 < x < x1 for (t0, t1, x0, x1) in boxes)


def lattice_reachable(src, dst, boxes, h=0.5):
    """Breadth-first search over lightlike and still steps of size h.

    ``src`` and ``dst`` are (t, x) pairs and boxes are (t0, t1, x0, x1) with
    open interiors blocked.  With integer data and h = 1/2 a step whose ends
    and midpoint avoid every interior avoids it everywhere, and the null
    directions of the lattice cover every causal route around the corners.
    """
    (ts, xs), (td, xd) = src, dst
    if _inside(ts, xs, boxes) or _inside(td, xd, boxes):
        return False
    steps = round((td - ts) / h)
    if steps < 0 or abs(steps * h - (td - ts)) > 1e-9:
        return False
    frontier = {round(xs / h)}
    for k in range(steps):
        t = ts + k * h
        nxt = set()
        for i in frontier:
            for di in (-1, 0, 1):
                j = i + di
                a, b = i * h, j * h
                mid_t, mid_x = t + h / 2, (a + b) / 2
                if _inside(t + h, b, boxes) or _inside(mid_t, mid_x, boxes):
                    continue
                nxt.add(j)
        frontier = nxt
        if not frontier:
            return False
    return round(xd / h) in frontier


def light_cone(src, dst):
    """Closed future light cone membership for (t, x...) tuples."""
    dt = dst[0] - src[0]
    dx2 = sum((a - b) ** 2 for a, b in zip(dst[1:], src[1:]))
    return dt >= 0 and dt * dt >= dx2


# --- CHSH -----------------------------------------------------------------------

def chsh_deterministic_values():
    """Winning probability of each of the 16 deterministic strategies."""
    funcs = list(itertools.product((0, 1), repeat=2))  # output for input 0, input 1
    out = {}
    for fa in funcs:
        for fb in funcs:
            wins = sum((fa[a] ^ fb[b]) == (a & b) for a in (0, 1) for b in (0, 1))
            out[(fa, fb)] = wins / 4
    return out


def singlet_chsh(alice_angles, bob_angles, bob_flips=True):
    """Born-rule CHSH value for a singlet with equatorial measurements."""
    singlet = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)

    def projectors(phi):
        plus = np.array([1, np.exp(1j * phi)]) / math.sqrt(2)
        minus = np.array([1, -np.exp(1j * phi)]) / math.sqrt(2)
        return [np.outer(v, v.conj()) for v in (plus, minus)]

    total = 0.0
    for a in (0, 1):
        for b in (0, 1):
            pa, pb = projectors(alice_angles[a]), projectors(bob_angles[b])
            for x in (0, 1):
                for y in (0, 1):
                    p = float(np.real(singlet.conj() @ np.kron(pa[x], pb[y]) @ singlet))
                    yy = 1 - y if bob_flips else y
                    if (x ^ yy) == (a & b):
                        total += p / 4
    return total


# --- random access codes ------------------------------------------------------

def rac_best(m=2, n=1):
    """Best (m -> n) classical random access code: majority decoding per message."""
    inputs = list(itertools.product((0, 1), repeat=m))
    best = 0.0
    for enc in itertools.product(range(2 ** n), repeat=len(inputs)):
        wins = 0
        for msg in range(2 ** n):
            group = [x for x, e in zip(inputs, enc) if e == msg]
            for y in range(m):
                ones = sum(x[y] for x in group)
                wins += max(ones, len(group) - ones)
        best = max(best, wins / (len(inputs) * m))
    return best


# --- cloning --------------------------------------------------------------------

def measure_prepare_fidelity():
    """Average fidelity of measuring a Haar qubit in a fixed basis and re-preparing."""
    # integral over the Bloch sphere of cos^4(theta/2) + sin^4(theta/2)
    return 2 / 3


# --- null coordinates -----------------------------------------------------------

def diamond_meet(calls, returns):
    """Is there a point in the future of every call and the past of every return (1+1)?

    In null coordinates u = t - x, v = t + x the future of a point is the
    quadrant u >= u0, v >= v0, so the answer is a componentwise comparison.
    """
    u = max(t - x for t, x in calls)
    v = max(t + x for t, x in calls)
    return all(u <= t - x and v <= t + x for t, x in returns)


__all__ = [
    "lattice_reachable", "light_cone", "chsh_deterministic_values", "singlet_chsh", "rac_best",
    "measure_prepare_fidelity", "diamond_meet",
]
