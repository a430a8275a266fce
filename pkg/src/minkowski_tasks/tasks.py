"""Task data model: input events, output requirements and success predicates.

A task supplies classical or quantum inputs at spacetime points and asks for
outputs at points computed from the collated inputs.  Output rules are
expressions that may only read the inputs they declare.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from . import quantum as qm
from .expr import Expr, ExprError
from .geometry import Region, SpacetimePoint

POINT_TOL = 1e-9
PROB_TOL = 1e-12
DEFAULT_GRID = 101


class TaskError(ValueError):
    pass


# --- payloads ---------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalDistribution:
    values: tuple
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def uniform(cls, values: Sequence) -> "ClassicalDistribution":
        values = tuple(values)
        return cls(values, (1.0 / len(values),) * len(values))

    @classmethod
    def constant(cls, value) -> "ClassicalDistribution":
        return cls((value,), (1.0,))

    @classmethod
    def grid(cls, lo: float, hi: float, n: int = DEFAULT_GRID) -> "ClassicalDistribution":
        """Uniform distribution on ``n`` equally spaced reals in [lo, hi]."""
        pts = [lo] if n == 1 else [lo + (hi - lo) * k / (n - 1) for k in range(n)]
        return cls.uniform([round(v, 12) for v in pts])

    @classmethod
    def bit_strings(cls, n: int) -> "ClassicalDistribution":
        return cls.uniform(list(itertools.product((0, 1), repeat=n)))

    def problems(self) -> list[str]:
        out = []
        if not self.values:
            out.append("distribution has empty support")
        if len(self.values) != len(self.probs):
            out.append("distribution values and probabilities differ in length")
        if any(p < 0 or not math.isfinite(p) for p in self.probs):
            out.append("distribution has a negative or non-finite probability")
        if abs(sum(self.probs) - 1.0) > PROB_TOL:
            out.append(f"distribution not normalized (sums to {sum(self.probs):.12g})")
        return out

    def support(self) -> list[tuple[Any, float]]:
        return [(v, p) for v, p in zip(self.values, self.probs) if p > 0]

    def sample(self, rng: np.random.Generator):
        k = rng.choice(len(self.values), p=np.array(self.probs) / sum(self.probs))
        return self.values[int(k)]

    @property
    def bits(self) -> int:
        """Bits needed to name one element of the support."""
        return max(1, math.ceil(math.log2(len(self.values))))


@dataclass(frozen=True)
class QuantumSource:
    """A quantum input register of dimension ``dim``.

    ``prep`` is ``"haar"`` (unknown, uniformly random pure state), a digit
    string naming a basis state, or ``"group"`` when the register is part of
    a shared preparation group.
    """

    dim: int
    prep: str = "haar"
    vector: tuple[complex, ...] | None = None
    group: str | None = None


@dataclass(frozen=True)
class PrepGroup:
    """Inputs prepared jointly, possibly entangled with inaccessible references."""

    name: str
    members: tuple[str, ...]
    state: str = "maxent"
    references: tuple[str, ...] = ()


@dataclass(frozen=True)
class InputEvent:
    name: str
    point: SpacetimePoint | Expr
    payload: ClassicalDistribution | QuantumSource
    inside_region: str | None = None

    @property
    def quantum(self) -> bool:
        return isinstance(self.payload, QuantumSource)


# --- outputs and predicates -------------------------------------------------

@dataclass(frozen=True)
class OutputRequirement:
    """Required output ``name`` at ``point``.

    ``kind`` is ``"classical"`` (exact ``value``), ``"quantum"`` (the state
    of input ``state_of``) or ``"free"`` (any classical value, constrained
    only through a probability predicate).
    """

    name: str
    point: Expr
    kind: str
    value: Expr | None = None
    state_of: str | None = None
    deps: frozenset[str] = frozenset()

    def rule_names(self) -> set[str]:
        names = set(self.point.names)
        if self.value is not None:
            names |= self.value.names
        return names


@dataclass(frozen=True)
class SuccessPredicate:
    kind: str = "exact"  # exact | fidelity | probability
    threshold: float = 1.0
    event: Expr | None = None
    bound: float = 0.0
    direction: str = ">"

    def holds(self, probability: float) -> bool:
        """Aggregate test for probability predicates; success must be certain otherwise."""
        if self.kind != "probability":
            return probability >= 1.0 - 1e-9
        return {
            ">": probability > self.bound,
            ">=": probability >= self.bound - 1e-12,
            "<": probability < self.bound,
            "<=": probability <= self.bound + 1e-12,
        }[self.direction]


EXACT = SuccessPredicate("exact")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    dim: int
    inputs: tuple[InputEvent, ...]
    outputs: tuple[OutputRequirement, ...]
    predicate: SuccessPredicate = EXACT
    regions: tuple[Region, ...] = ()
    groups: tuple[PrepGroup, ...] = ()
    constants: Mapping[str, Any] = field(default_factory=dict)
    notes: str = ""

    def input(self, name: str) -> InputEvent:
        for i in self.inputs:
            if i.name == name:
                return i
        raise TaskError(f"unknown input {name!r}")

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise TaskError(f"unknown region {name!r}")

    def group(self, name: str) -> PrepGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise TaskError(f"unknown preparation group {name!r}")

    def references_of(self, input_name: str) -> tuple[str, ...]:
        src = self.input(input_name).payload
        if isinstance(src, QuantumSource) and src.group:
            return self.group(src.group).references
        return ()


# --- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    where: str = ""

    def __str__(self) -> str:
        return f"{self.where}: {self.message}" if self.where else self.message


def _point_dims_ok(p, d) -> bool:
    return isinstance(p, SpacetimePoint) and p.dim == d


def input_point(event: InputEvent, value, constants: Mapping[str, Any]) -> SpacetimePoint:
    if isinstance(event.point, SpacetimePoint):
        return event.point
    return event.point.evaluate({**constants, event.name: value})


def _support_combos(task: TaskSpec, names: Sequence[str], limit: int = 20000):
    supports = []
    for n in names:
        ev = task.input(n)
        if ev.quantum:
            supports.append([None])
        else:
            supports.append([v for v, _ in ev.payload.support()])
    if math.prod(len(s) for s in supports) > limit:
        return None
    return (dict(zip(names, combo)) for combo in itertools.product(*supports))


def validate(task: TaskSpec) -> list[Diagnostic]:
    """Structured diagnostics; an empty list means the task is well formed."""
    out: list[Diagnostic] = []
    d = task.dim
    if d not in (1, 3):
        out.append(Diagnostic("dimension", f"spatial dimension {d} unsupported (use 1 or 3)"))
    names = [i.name for i in task.inputs] + [o.name for o in task.outputs]
    for n in sorted({n for n in names if names.count(n) > 1}):
        out.append(Diagnostic("duplicate", f"name {n!r} used more than once"))
    for c, v in task.constants.items():
        if isinstance(v, SpacetimePoint) and v.dim != d:
            out.append(Diagnostic("dimension", f"point has dimension {v.dim}, task has {d}", c))
    region_names = {r.name for r in task.regions}
    for r in task.regions:
        if r.dim != d:
            out.append(Diagnostic("dimension", f"region dimension {r.dim} != {d}", r.name))
    group_names = {g.name for g in task.groups}
    input_names = {i.name for i in task.inputs}
    for ev in task.inputs:
        if isinstance(ev.payload, ClassicalDistribution):
            for msg in ev.payload.problems():
                out.append(Diagnostic("distribution", msg, ev.name))
            values = [v for v, _ in ev.payload.support()] or [None]
        else:
            src = ev.payload
            values = [None]
            if src.dim < 2:
                out.append(Diagnostic("register", "quantum input dimension must be >= 2", ev.name))
            if src.group is not None and src.group not in group_names:
                out.append(Diagnostic("dangling", f"unknown preparation group {src.group!r}", ev.name))
        if isinstance(ev.point, Expr):
            extra = ev.point.names - {ev.name} - set(task.constants)
            if extra:
                out.append(Diagnostic("dependency", f"input point reads {sorted(extra)}", ev.name))
                continue
        for v in values:
            try:
                p = input_point(ev, v, task.constants)
            except (ExprError, TaskError) as exc:
                out.append(Diagnostic("point", str(exc), ev.name))
                break
            if not _point_dims_ok(p, d):
                out.append(Diagnostic("dimension", "input point has wrong dimension", ev.name))
                break
            if ev.inside_region is not None:
                if ev.inside_region not in region_names:
                    out.append(Diagnostic("dangling", f"unknown region {ev.inside_region!r}", ev.name))
                    break
                if not task.region(ev.inside_region).contains_interior(p):
                    out.append(Diagnostic("region", f"point {p} not inside region {ev.inside_region!r}", ev.name))
                    break
    for g in task.groups:
        for m in g.members:
            if m not in input_names or not task.input(m).quantum:
                out.append(Diagnostic("dangling", f"group member {m!r} is not a quantum input", g.name))
        if g.state not in ("maxent", "singlet", "ghz"):
            out.append(Diagnostic("register", f"unknown group state {g.state!r}", g.name))
    if not task.outputs:
        out.append(Diagnostic("outputs", "task has no outputs"))
    for o in task.outputs:
        unknown = o.deps - input_names
        if unknown:
            out.append(Diagnostic("dependency", f"declared dependencies {sorted(unknown)} are not inputs", o.name))
        undeclared = o.rule_names() - o.deps - set(task.constants)
        if undeclared:
            out.append(Diagnostic("dependency", f"undeclared dependency {sorted(undeclared)}", o.name))
            continue
        if o.kind == "quantum":
            if o.state_of not in input_names or not task.input(o.state_of).quantum:
                out.append(Diagnostic("dangling", f"required state of {o.state_of!r} is not a quantum input", o.name))
                continue
        elif o.kind == "classical" and o.value is None:
            out.append(Diagnostic("outputs", "classical output without a value rule", o.name))
        elif o.kind not in ("classical", "quantum", "free"):
            out.append(Diagnostic("outputs", f"unknown output kind {o.kind!r}", o.name))
        combos = _support_combos(task, sorted(o.point.names & input_names))
        if combos is None:
            continue
        for env in combos:
            try:
                p = o.point.evaluate({**task.constants, **env})
            except ExprError as exc:
                out.append(Diagnostic("point", f"output point not determined: {exc}", o.name))
                break
            if not _point_dims_ok(p, d):
                out.append(Diagnostic("dimension", "output point rule does not yield a point of the task dimension", o.name))
                break
    pred = task.predicate
    if pred.kind == "fidelity" and not 0 < pred.threshold <= 1:
        out.append(Diagnostic("predicate", "fidelity threshold must lie in (0, 1]"))
    if pred.kind == "probability":
        if not 0 <= pred.bound <= 1:
            out.append(Diagnostic("predicate", "probability bound must lie in [0, 1]"))
        if pred.event is None:
            out.append(Diagnostic("predicate", "probability predicate needs an event"))
        else:
            unknown = pred.event.names - set(names) - set(task.constants)
            if unknown:
                out.append(Diagnostic("predicate", f"event reads unknown names {sorted(unknown)}"))
    if pred.kind not in ("exact", "fidelity", "probability"):
        out.append(Diagnostic("predicate", f"unknown predicate kind {pred.kind!r}"))
    return out


def ensure_valid(task: TaskSpec) -> TaskSpec:
    diags = validate(task)
    if diags:
        raise TaskError("; ".join(str(d) for d in diags))
    return task


# --- assignments ------------------------------------------------------------

@dataclass
class InputAssignment:
    """Concrete inputs: classical values, event points and prepared registers."""

    values: dict[str, Any]
    points: dict[str, SpacetimePoint]
    state: qm.QuantumState | None = None

    def describe(self) -> dict[str, Any]:
        return {k: _plain(v) for k, v in self.values.items() if v is not None}


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(e) for e in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _group_vector(group: PrepGroup, dims: Sequence[int]) -> np.ndarray:
    if group.state in ("maxent", "singlet"):
        if len(dims) != 2 or dims[0] != dims[1]:
            raise TaskError(f"group {group.name!r}: {group.state} needs two registers of equal dimension")
        frame = qm.SINGLET_FRAME if group.state == "singlet" else (0, 0)
        return qm.max_entangled_vector(dims[0], frame)
    d = dims[0]
    if any(x != d for x in dims):
        raise TaskError(f"group {group.name!r}: ghz needs equal dimensions")
    v = np.zeros(d ** len(dims), dtype=complex)
    for k in range(d):
        v[sum(k * d**i for i in range(len(dims)))] = 1
    return v / np.linalg.norm(v)


def _quantum_blocks(task: TaskSpec):
    """Preparation blocks in declaration order: (labels, dims, kind, payload)."""
    blocks, seen = [], set()
    for ev in task.inputs:
        if not ev.quantum or ev.name in seen:
            continue
        src = ev.payload
        if src.group:
            g = task.group(src.group)
            labels = list(g.members) + list(g.references)
            dims = [task.input(m).payload.dim for m in g.members]
            dims += [dims[0]] * len(g.references)
            blocks.append((tuple(labels), tuple(dims), "group", g))
            seen.update(g.members)
        else:
            blocks.append(((ev.name,), (src.dim,), "single", src))
            seen.add(ev.name)
    return blocks


def _single_options(src: QuantumSource, rng: np.random.Generator | None, exact: bool):
    if src.vector is not None:
        return [(np.asarray(src.vector, dtype=complex), 1.0)]
    if src.prep == "haar":
        if exact:
            probes = qm.mub_vectors(src.dim)
            return [(v, 1.0 / len(probes)) for v in probes]
        return [(qm.haar_vector(src.dim, rng), 1.0)]
    if src.prep.isdigit():
        return [(qm.basis_vector([src.dim], [int(src.prep)]), 1.0)]
    raise TaskError(f"unknown preparation {src.prep!r}")


def _build_state(blocks, choice) -> qm.QuantumState | None:
    state = None
    for (labels, dims, _, _), vec in zip(blocks, choice):
        st = qm.pure(qm.RegisterSystem(labels, dims), vec)
        state = st if state is None else qm.tensor(state, st)
    return state


def _points_for(task: TaskSpec, values: Mapping[str, Any]) -> dict[str, SpacetimePoint]:
    return {ev.name: input_point(ev, values.get(ev.name), task.constants) for ev in task.inputs}


def sample_inputs(task: TaskSpec, seed: int | np.random.Generator) -> InputAssignment:
    """Draw one input assignment; identical seeds give identical assignments."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    values = {}
    for ev in task.inputs:
        values[ev.name] = None if ev.quantum else ev.payload.sample(rng)
    blocks = _quantum_blocks(task)
    choice = []
    for labels, dims, kind, payload in blocks:
        if kind == "group":
            choice.append(_group_vector(payload, dims))
        else:
            choice.append(_single_options(payload, rng, exact=False)[0][0])
    return InputAssignment(values, _points_for(task, values), _build_state(blocks, choice))


def enumerate_inputs(task: TaskSpec) -> Iterator[tuple[float, InputAssignment]]:
    """Every assignment with its probability.

    Unknown (Haar) qudits are replaced by a complete set of mutually unbiased
    basis states with equal weights, a state 2-design: averages of quantities
    quadratic in the input state (such as fidelities) are then exact.
    """
    classical = [ev for ev in task.inputs if not ev.quantum]
    supports = [ev.payload.support() for ev in classical]
    blocks = _quantum_blocks(task)
    qopts = []
    for labels, dims, kind, payload in blocks:
        if kind == "group":
            qopts.append([(_group_vector(payload, dims), 1.0)])
        else:
            qopts.append(_single_options(payload, None, exact=True))
    for combo in itertools.product(*supports):
        p_c = math.prod(p for _, p in combo)
        values = {ev.name: None for ev in task.inputs}
        values.update({ev.name: v for ev, (v, _) in zip(classical, combo)})
        points = _points_for(task, values)
        for qc in itertools.product(*qopts):
            p = p_c * math.prod(w for _, w in qc)
            yield p, InputAssignment(dict(values), dict(points), _build_state(blocks, [v for v, _ in qc]))


# --- scoring ----------------------------------------------------------------

@dataclass(frozen=True)
class Produced:
    """An output produced by a strategy at ``point``.

    Classical outputs carry ``value``; quantum outputs name the ``register``
    holding the state in the record's final global state.
    """

    point: SpacetimePoint
    value: Any = None
    register: str | None = None

    @property
    def quantum(self) -> bool:
        return self.register is not None


@dataclass
class OutputRecord:
    produced: list[Produced]
    final_state: qm.QuantumState | None = None
    original_state: qm.QuantumState | None = None


@dataclass(frozen=True)
class OutputStatus:
    name: str
    point: SpacetimePoint
    matched: bool
    ok: bool
    fidelity: float | None = None
    detail: str = ""
    value: Any = None


@dataclass
class SuccessReport:
    statuses: list[OutputStatus]
    unmatched: list[Produced]
    success: bool
    event: bool | None = None

    @property
    def fidelities(self) -> dict[str, float]:
        return {s.name: s.fidelity for s in self.statuses if s.fidelity is not None}


def required_outputs(task: TaskSpec, assignment: InputAssignment) -> list[tuple[OutputRequirement, SpacetimePoint, Any]]:
    """Evaluate every output rule, reading only its declared dependencies."""
    out = []
    for o in task.outputs:
        env = {**task.constants, **{k: assignment.values.get(k) for k in o.deps}}
        pt = o.point.evaluate(env)
        if o.kind == "classical":
            data = o.value.evaluate(env)
        elif o.kind == "quantum":
            data = o.state_of
        else:
            data = None
        out.append((o, pt, data))
    return out


def _quantum_fidelity(task, record: OutputRecord, register: str, input_name: str) -> float:
    refs = task.references_of(input_name)
    if record.final_state is None or record.original_state is None:
        return 0.0
    if register not in record.final_state.labels:
        return 0.0
    got = qm.partial_trace(record.final_state, (register, *refs))
    want = qm.partial_trace(record.original_state, (input_name, *refs))
    if got.system.dims != want.system.dims:
        return 0.0
    return qm.fidelity(got, want)


def _score(task, record, req, data, prod: Produced) -> tuple[bool, float | None, str]:
    if req.kind == "quantum":
        if not prod.quantum:
            return False, None, "classical data where a quantum state was required"
        f = _quantum_fidelity(task, record, prod.register, data)
        theta = task.predicate.threshold if task.predicate.kind == "fidelity" else 1.0 - 1e-9
        return f >= theta, f, f"fidelity {f:.6g}"
    if prod.quantum:
        return False, None, "quantum state where classical data was required"
    if req.kind == "free":
        return True, None, ""
    ok = _plain(prod.value) == _plain(data)
    return ok, None, "" if ok else f"expected {data!r}, got {prod.value!r}"


def evaluate_success(task: TaskSpec, assignment: InputAssignment, record: OutputRecord) -> SuccessReport:
    """Match produced outputs to requirements by location and score them."""
    reqs = required_outputs(task, assignment)
    pool = list(record.produced)
    # group requirements and productions that share a location
    groups: list[tuple[list[int], list[int]]] = []
    for i, (_, pt, _) in enumerate(reqs):
        for g in groups:
            if reqs[g[0][0]][1].close_to(pt, POINT_TOL):
                g[0].append(i)
                break
        else:
            groups.append(([i], []))
    leftover = []
    for j, prod in enumerate(pool):
        for g in groups:
            if reqs[g[0][0]][1].close_to(prod.point, POINT_TOL):
                g[1].append(j)
                break
        else:
            leftover.append(j)
    statuses: dict[int, OutputStatus] = {}
    values: dict[str, Any] = {}
    for req_ids, prod_ids in groups:
        best, best_key = None, None
        k = min(len(req_ids), len(prod_ids))
        for chosen in itertools.permutations(prod_ids, k):
            trial = {}
            for ri, pj in zip(req_ids, chosen):
                req, pt, data = reqs[ri]
                trial[ri] = (pj, *_score(task, record, req, data, pool[pj]))
            key = (sum(1 for v in trial.values() if v[1]), sum(v[2] or 0.0 for v in trial.values()))
            if best_key is None or key > best_key:
                best, best_key = trial, key
        best = best or {}
        used = {v[0] for v in best.values()}
        leftover.extend(j for j in prod_ids if j not in used)
        for ri in req_ids:
            req, pt, _ = reqs[ri]
            if ri in best:
                pj, ok, fid, detail = best[ri]
                val = None if pool[pj].quantum else _plain(pool[pj].value)
                statuses[ri] = OutputStatus(req.name, pt, True, ok, fid, detail, val)
                if not pool[pj].quantum:
                    values[req.name] = pool[pj].value
            else:
                statuses[ri] = OutputStatus(req.name, pt, False, False, None, "no output produced here")
    ordered = [statuses[i] for i in range(len(reqs))]
    unmatched = [pool[j] for j in sorted(leftover)]
    if task.predicate.kind == "probability":
        env = {**task.constants, **assignment.values}
        env.update({s.name: None for s in ordered})
        env.update(values)
        if any(not s.matched for s in ordered) or unmatched:
            event = False
        else:
            try:
                event = bool(task.predicate.event.evaluate(env))
            except ExprError:
                event = False
        return SuccessReport(ordered, unmatched, event, event)
    success = all(s.ok for s in ordered) and not unmatched
    return SuccessReport(ordered, unmatched, success)
