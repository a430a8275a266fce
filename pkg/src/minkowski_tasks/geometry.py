"""Minkowski-space events, causal classification and excluded regions.

Natural units (c = 1).  Points carry a time coordinate ``t`` and a tuple of
spatial coordinates ``x``; the metric signature is (+, -, -, -).
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Relative guard band used to classify near-null intervals as lightlike.
GUARD = 1e-12
# Slack used when testing whether a segment enters an open box.
EPS = 1e-12

DEFAULT_RESOLUTION = 64


class GeometryError(ValueError):
    pass


class DimensionMismatch(GeometryError):
    pass


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(v) for v in self.x)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", xs)
        if not xs:
            raise GeometryError("a spacetime point needs at least one spatial coordinate")
        if not all(math.isfinite(v) for v in (self.t, *xs)):
            raise GeometryError(f"non-finite coordinate in {self!r}")

    @property
    def dim(self) -> int:
        return len(self.x)

    @classmethod
    def of(cls, t: float, *x: float) -> "SpacetimePoint":
        return cls(t, tuple(x))

    def as_array(self) -> np.ndarray:
        return np.array((self.t, *self.x), dtype=float)

    def close_to(self, other: "SpacetimePoint", tol: float = 1e-9) -> bool:
        _check_dims(self, other)
        return abs(self.t - other.t) <= tol and all(
            abs(a - b) <= tol for a, b in zip(self.x, other.x)
        )

    def __str__(self) -> str:
        return "(" + _fmt(self.t) + "; " + ", ".join(_fmt(v) for v in self.x) + ")"


def _fmt(v: float) -> str:
    return f"{v:g}"


def point(t: float, *x: float) -> SpacetimePoint:
    return SpacetimePoint(t, tuple(x))


class Kind(enum.Enum):
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"
    SPACELIKE = "spacelike"


class Direction(enum.Enum):
    FUTURE = "future"
    PAST = "past"
    NONE = "none"


@dataclass(frozen=True)
class CausalRelation:
    kind: Kind
    direction: Direction

    def __post_init__(self):
        if (self.direction is Direction.NONE) != (self.kind is Kind.SPACELIKE):
            raise GeometryError("direction must be NONE exactly for spacelike pairs")

    @property
    def causal(self) -> bool:
        return self.kind is not Kind.SPACELIKE


def _check_dims(a: SpacetimePoint, b: SpacetimePoint) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"points of spatial dimension {a.dim} and {b.dim}")


def interval(a: SpacetimePoint, b: SpacetimePoint) -> float:
    """Squared Minkowski interval (dt)^2 - |dx|^2 between two events."""
    _check_dims(a, b)
    dt = b.t - a.t
    return dt * dt - sum((q - p) ** 2 for p, q in zip(a.x, b.x))


def _scale(a: SpacetimePoint, b: SpacetimePoint) -> float:
    return max(1.0, abs(a.t), abs(b.t), *(abs(v) for v in a.x), *(abs(v) for v in b.x))


def causal_relation(a: SpacetimePoint, b: SpacetimePoint) -> CausalRelation:
    s = interval(a, b)
    if abs(s) < GUARD * _scale(a, b) ** 2:
        kind = Kind.LIGHTLIKE
    elif s > 0:
        kind = Kind.TIMELIKE
    else:
        return CausalRelation(Kind.SPACELIKE, Direction.NONE)
    # coincident points count as future-directed
    direction = Direction.PAST if b.t - a.t < 0 else Direction.FUTURE
    return CausalRelation(kind, direction)


def in_causal_future(src: SpacetimePoint, dst: SpacetimePoint) -> bool:
    """True when ``dst`` lies in the closed future light cone of ``src``."""
    rel = causal_relation(src, dst)
    return rel.causal and rel.direction is Direction.FUTURE


def boost(p: SpacetimePoint, v: float) -> SpacetimePoint:
    """Lorentz boost along the first spatial axis with velocity ``v``."""
    if not -1.0 < v < 1.0:
        raise GeometryError("boost velocity must satisfy |v| < 1")
    g = 1.0 / math.sqrt(1.0 - v * v)
    x0 = p.x[0]
    return SpacetimePoint(g * (p.t - v * x0), (g * (x0 - v * p.t), *p.x[1:]))


@dataclass(frozen=True)
class Box:
    """Axis-aligned spacetime box ``t x x_1 x ... x x_d`` (closed extent)."""

    t: tuple[float, float]
    x: tuple[tuple[float, float], ...]

    def __post_init__(self):
        t = (float(self.t[0]), float(self.t[1]))
        xs = tuple((float(lo), float(hi)) for lo, hi in self.x)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", xs)
        for lo, hi in (t, *xs):
            if not (math.isfinite(lo) and math.isfinite(hi)) or not hi > lo:
                raise GeometryError(f"box extent [{lo}, {hi}] must be finite and positive")

    @property
    def dim(self) -> int:
        return len(self.x)

    def bounds(self) -> list[tuple[float, float]]:
        return [self.t, *self.x]

    def contains_interior(self, p: SpacetimePoint, eps: float = EPS) -> bool:
        if p.dim != self.dim:
            raise DimensionMismatch("box and point dimension differ")
        return all(lo + eps < c < hi - eps for c, (lo, hi) in zip((p.t, *p.x), self.bounds()))

    def meets_segment(self, a: SpacetimePoint, b: SpacetimePoint, eps: float = EPS) -> bool:
        """Does the closed segment a-b enter the open interior of the box?"""
        if a.dim != self.dim or b.dim != self.dim:
            raise DimensionMismatch("box and segment dimension differ")
        s_lo, s_hi = -math.inf, math.inf
        for p0, p1, (lo, hi) in zip((a.t, *a.x), (b.t, *b.x), self.bounds()):
            dp = p1 - p0
            if dp == 0.0:
                if not (lo + eps < p0 < hi - eps):
                    return False
                continue
            u, w = (lo - p0) / dp, (hi - p0) / dp
            if u > w:
                u, w = w, u
            s_lo, s_hi = max(s_lo, u), min(s_hi, w)
        lo_c, hi_c = max(s_lo, 0.0), min(s_hi, 1.0)
        return hi_c - lo_c > eps and s_hi - s_lo > eps

    def corners(self) -> list[SpacetimePoint]:
        import itertools

        out = []
        for combo in itertools.product(*self.bounds()):
            out.append(SpacetimePoint(combo[0], tuple(combo[1:])))
        return out


UNLIMITED = None


@dataclass(frozen=True)
class Region:
    """Named union of boxes from which Alice's agents are excluded.

    ``penetrable=False`` blocks every signal.  A penetrable region may cap the
    classical bits and qubits carried across it (``None`` means unlimited).
    """

    name: str
    boxes: tuple[Box, ...]
    penetrable: bool = False
    bits: int | None = UNLIMITED
    qubits: int | None = UNLIMITED

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.boxes:
            raise GeometryError(f"region {self.name!r} has no boxes")
        dims = {b.dim for b in self.boxes}
        if len(dims) != 1:
            raise DimensionMismatch(f"region {self.name!r} mixes box dimensions")
        if not self.penetrable:
            object.__setattr__(self, "bits", 0)
            object.__setattr__(self, "qubits", 0)
        for budget in (self.bits, self.qubits):
            if budget is not None and (int(budget) != budget or budget < 0):
                raise GeometryError(f"region {self.name!r}: budgets must be nonnegative integers")

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    @property
    def impenetrable(self) -> bool:
        return not self.penetrable

    @property
    def budgeted(self) -> bool:
        return self.penetrable and (self.bits is not None or self.qubits is not None)

    def contains_interior(self, p: SpacetimePoint) -> bool:
        return any(b.contains_interior(p) for b in self.boxes)

    def meets_segment(self, a: SpacetimePoint, b: SpacetimePoint) -> bool:
        return any(box.meets_segment(a, b) for box in self.boxes)


def _blocking_boxes(avoid: Iterable[Region]) -> list[Box]:
    return [b for r in avoid if r.impenetrable for b in r.boxes]


def segment_clear(a: SpacetimePoint, b: SpacetimePoint, boxes: Sequence[Box]) -> bool:
    return not any(box.meets_segment(a, b) for box in boxes)


def path_is_causal(path: Sequence[SpacetimePoint], avoid: Iterable[Region] = ()) -> bool:
    """Check a waypoint path segment by segment."""
    boxes = _blocking_boxes(avoid)
    for a, b in zip(path, path[1:]):
        if not in_causal_future(a, b) or not segment_clear(a, b, boxes):
            return False
    return True


@dataclass(frozen=True)
class PathSearch:
    """Outcome of a causal routing query.

    ``found`` with a waypoint ``path`` is a certificate.  ``resolved=False``
    marks a negative answer that only holds at the lattice resolution used.
    """

    found: bool
    path: tuple[SpacetimePoint, ...] = ()
    resolved: bool = True
    note: str = ""

    def __bool__(self) -> bool:
        return self.found


def _waypoint_search(src, dst, boxes: Sequence[Box]) -> tuple[SpacetimePoint, ...] | None:
    nodes = [src]
    for box in boxes:
        for c in box.corners():
            if not any(b.contains_interior(c) for b in boxes):
                nodes.append(c)
    nodes.append(dst)
    target = len(nodes) - 1
    prev = {0: None}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        if i == target:
            break
        for j in range(1, len(nodes)):
            if j in prev:
                continue
            if in_causal_future(nodes[i], nodes[j]) and segment_clear(nodes[i], nodes[j], boxes):
                prev[j] = i
                queue.append(j)
    if target not in prev:
        return None
    out, k = [], target
    while k is not None:
        out.append(nodes[k])
        k = prev[k]
    return tuple(reversed(out))


def find_causal_path(
    src: SpacetimePoint,
    dst: SpacetimePoint,
    avoid: Sequence[Region] = (),
    resolution: int = DEFAULT_RESOLUTION,
) -> PathSearch:
    """Search for a future-directed causal curve from src to dst avoiding regions.

    In 1+1 dimensions the answer is exact.  In higher dimensions a positive
    answer always comes with a verified waypoint path, while a negative answer
    not already implied by the light-cone test is marked unresolved.
    """
    _check_dims(src, dst)
    if resolution <= 0:
        raise GeometryError("resolution must be positive")
    for r in avoid:
        if r.dim != src.dim:
            raise DimensionMismatch(f"region {r.name!r} has dimension {r.dim}, points have {src.dim}")
    if not in_causal_future(src, dst):
        return PathSearch(False, note="destination outside the future light cone")
    boxes = _blocking_boxes(avoid)
    if any(b.contains_interior(src) or b.contains_interior(dst) for b in boxes):
        return PathSearch(False, note="endpoint inside an impenetrable region")
    if segment_clear(src, dst, boxes):
        return PathSearch(True, (src, dst))
    path = _waypoint_search(src, dst, boxes)
    if path is not None:
        return PathSearch(True, path)
    if src.dim == 1:
        return PathSearch(False, note="no causal route around impenetrable regions")
    from . import lattice

    path = lattice.lattice_path(src, dst, boxes, resolution)
    if path is not None and path_is_causal(path, avoid):
        return PathSearch(True, tuple(path))
    return PathSearch(False, resolved=False, note=f"unresolved at resolution {resolution}")


def causal_path_exists(
    src: SpacetimePoint,
    dst: SpacetimePoint,
    avoid: Sequence[Region] = (),
    resolution: int = DEFAULT_RESOLUTION,
) -> bool:
    return find_causal_path(src, dst, avoid, resolution).found


def in_any_region(p: SpacetimePoint, regions: Iterable[Region]) -> Region | None:
    for r in regions:
        if r.contains_interior(p):
            return r
    return None
