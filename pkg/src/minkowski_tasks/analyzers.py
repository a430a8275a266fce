"""Static necessary-condition checks with checkable witnesses."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .geometry import (
    Kind,
    Region,
    SpacetimePoint,
    causal_relation,
    find_causal_path,
    in_causal_future,
)
from .tasks import QuantumSource, TaskSpec, input_point

CLONE_THETA = 0.99
COMBO_LIMIT = 20000


class AnalysisError(ValueError):
    pass


class Status(str, enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNRESOLVED = "Unresolved"


@dataclass
class Verdict:
    check: str
    status: Status
    witness: Any = None
    rationale: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE

    def __str__(self) -> str:
        return f"{self.check}: {self.status.value}" + (f" ({self.rationale})" if self.rationale else "")


def _spacelike(a: SpacetimePoint, b: SpacetimePoint) -> bool:
    return causal_relation(a, b).kind is Kind.SPACELIKE


def _combos(task: TaskSpec, names: Iterable[str]):
    """Joint supports of the named classical inputs, or None when too large."""
    names = sorted(set(names))
    supports = []
    for n in names:
        ev = task.input(n)
        supports.append([None] if ev.quantum else [v for v, _ in ev.payload.support()])
    if math.prod(len(s) for s in supports) > COMBO_LIMIT:
        return None
    return [dict(zip(names, c)) for c in itertools.product(*supports)]


def _eval_point(task: TaskSpec, expr, values) -> SpacetimePoint:
    return expr.evaluate({**task.constants, **values})


def _fixed_point(task: TaskSpec, name: str) -> SpacetimePoint:
    ev = task.input(name)
    if isinstance(ev.point, SpacetimePoint):
        return ev.point
    if ev.point.names - set(task.constants):
        raise AnalysisError(f"input {name} must arrive at a fixed point")
    return ev.point.evaluate(dict(task.constants))


# --- routing ------------------------------------------------------------------

def classical_routing_check(task: TaskSpec, resolution: int = 64) -> Verdict:
    """Can every depended-on input reach its output point for every outcome?"""
    paths = []
    unresolved = []
    for o in task.outputs:
        needed = set(o.deps)
        if o.state_of:
            needed.add(o.state_of)
        combos = _combos(task, needed)
        if combos is None:
            return Verdict("routing", Status.UNRESOLVED, None, f"{o.name}: input support too large to enumerate")
        seen = set()
        for values in combos:
            q = _eval_point(task, o.point, values)
            for n in sorted(needed):
                p = input_point(task.input(n), values.get(n), task.constants)
                if (n, p, q) in seen:
                    continue
                seen.add((n, p, q))
                found = find_causal_path(p, q, task.regions, resolution)
                if found.found:
                    paths.append({"output": o.name, "input": n, "path": list(found.path)})
                elif found.resolved:
                    note = ""
                    if task.input(n).quantum:
                        note = "; quantum payloads may still be delivered by teleportation with predistributed entanglement"
                    return Verdict("routing", Status.INFEASIBLE,
                                   {"output": o.name, "input": n, "from": p, "to": q},
                                   f"no causal path from {n} at {p} to {o.name} at {q}: {found.note}{note}")
                else:
                    unresolved.append((o.name, n, p, q, found.note))
    if unresolved:
        o, n, p, q, note = unresolved[0]
        return Verdict("routing", Status.UNRESOLVED, {"output": o, "input": n, "from": p, "to": q},
                       f"routing from {p} to {q} not certified: {note}")
    return Verdict("routing", Status.FEASIBLE, paths, f"{len(paths)} causal paths")


def verify_paths(task: TaskSpec, witness) -> bool:
    """Re-check a Feasible routing witness segment by segment."""
    from .geometry import path_is_causal

    return all(path_is_causal(w["path"], task.regions) for w in witness)


# --- cloning ------------------------------------------------------------------

def _unknown(task: TaskSpec, name: str) -> bool:
    src = task.input(name).payload
    if not isinstance(src, QuantumSource):
        return False
    return src.group is not None or (src.vector is None and src.prep == "haar")


def _required_threshold(task: TaskSpec) -> float:
    if task.predicate.kind == "fidelity":
        return task.predicate.threshold
    return 1.0


def clone_demand_check(task: TaskSpec, theta: float = CLONE_THETA) -> Verdict:
    """Flag two spacelike demands for high-fidelity copies of one unknown state."""
    if _required_threshold(task) <= theta:
        return Verdict("clone", Status.FEASIBLE, [], f"required fidelity does not exceed {theta}")
    qouts = [o for o in task.outputs if o.kind == "quantum" and _unknown(task, o.state_of)]
    checked = []
    for a, b in itertools.combinations(qouts, 2):
        if a.state_of != b.state_of:
            continue
        combos = _combos(task, a.deps | b.deps)
        if combos is None:
            return Verdict("clone", Status.UNRESOLVED, None, "input support too large to enumerate")
        for values in combos:
            qa, qb = _eval_point(task, a.point, values), _eval_point(task, b.point, values)
            if _spacelike(qa, qb):
                return Verdict("clone", Status.INFEASIBLE,
                               {"outputs": (a.name, b.name), "points": (qa, qb), "register": a.state_of},
                               f"{a.name} and {b.name} demand copies of {a.state_of} at spacelike points")
            checked.append((a.name, b.name, qa, qb))
    return Verdict("clone", Status.FEASIBLE, checked, "no spacelike copy demands")


# --- summoning ----------------------------------------------------------------

@dataclass
class RouteEntry:
    call: dict
    call_points: list[SpacetimePoint]
    return_point: SpacetimePoint
    meeting_point: SpacetimePoint | None = None


def _summoning_shape(task: TaskSpec):
    quantum = [i for i in task.inputs if i.quantum]
    if len(quantum) != 1:
        raise AnalysisError("summoning analysis needs exactly one quantum input")
    q = quantum[0].name
    outs = [o for o in task.outputs if o.kind == "quantum" and o.state_of == q]
    if not outs:
        raise AnalysisError(f"no output requires the state of {q}")
    return q, outs


def summoning_table(task: TaskSpec) -> tuple[str, SpacetimePoint, list[list[RouteEntry]]]:
    """Per call value: call points and every demanded return point."""
    q, outs = _summoning_shape(task)
    state_point = _fixed_point(task, q)
    deps = set().union(*(o.deps for o in outs))
    combos = _combos(task, deps)
    if combos is None:
        raise AnalysisError("call support too large to enumerate")
    table = []
    for values in combos:
        calls = [input_point(task.input(n), values[n], task.constants) for n in sorted(deps)]
        table.append([RouteEntry(values, calls, _eval_point(task, o.point, values)) for o in outs])
    return q, state_point, table


def _violation(m: np.ndarray, before: np.ndarray, after: np.ndarray) -> float:
    """Largest amount by which m fails to lie after ``before`` and before ``after``."""
    worst = -math.inf
    for p in before:
        worst = max(worst, np.linalg.norm(m[1:] - p[1:]) - (m[0] - p[0]))
    for r in after:
        worst = max(worst, np.linalg.norm(r[1:] - m[1:]) - (r[0] - m[0]))
    return worst


def meeting_point(calls: Sequence[SpacetimePoint], returns: Sequence[SpacetimePoint]) -> SpacetimePoint | None:
    """A point in the future of every call point and the past of every return point."""
    if not returns:
        return None
    if not calls:
        cands = list(returns)
        for m in cands:
            if all(in_causal_future(m, r) for r in returns):
                return m
        return None
    d = returns[0].dim
    if d == 1:
        u_lo = max(c.t - c.x[0] for c in calls)
        v_lo = max(c.t + c.x[0] for c in calls)
        u_hi = min(r.t - r.x[0] for r in returns)
        v_hi = min(r.t + r.x[0] for r in returns)
        if u_lo > u_hi + 1e-12 or v_lo > v_hi + 1e-12:
            return None
        return SpacetimePoint((u_lo + v_lo) / 2, ((v_lo - u_lo) / 2,))
    ok = lambda m: all(in_causal_future(c, m) for c in calls) and all(in_causal_future(m, r) for r in returns)
    cands = list(returns) + list(calls)
    if len(calls) == 1:
        cands.insert(0, calls[0])
    for m in cands:
        if ok(m):
            return m
    from scipy.optimize import minimize

    before = np.array([c.as_array() for c in calls])
    after = np.array([r.as_array() for r in returns])
    x0 = np.vstack([before, after]).mean(axis=0)
    res = minimize(lambda m: _violation(m, before, after), x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-13, "maxiter": 20000})
    m = SpacetimePoint(float(res.x[0]), tuple(float(v) for v in res.x[1:]))
    return m if ok(m) else None


def summoning_check(task: TaskSpec, resolution: int = 64) -> Verdict:
    """Decide summoning-type tasks by clone and causal-diamond arguments.

    Feasible verdicts carry a teleportation routing table: the state is
    teleported from its arrival point, the entangled partner waits at a
    meeting point M that every call reaches, and M forwards it to the return
    point selected by the call.
    """
    q, state_point, table = summoning_table(task)
    for row in table:
        rets = [e.return_point for e in row]
        for a, b in itertools.combinations(rets, 2):
            if _spacelike(a, b):
                return Verdict("summoning", Status.INFEASIBLE,
                               {"kind": "clone", "call": row[0].call, "points": (a, b)},
                               f"one call demands {q} at spacelike points {a} and {b}")
        if len(set(rets)) > 1:
            return Verdict("summoning", Status.UNRESOLVED, {"call": row[0].call},
                           "several causally ordered returns per call are outside this analysis")
    entries = [row[0] for row in table]
    for e in entries:
        if not in_causal_future(state_point, e.return_point):
            return Verdict("summoning", Status.INFEASIBLE,
                           {"kind": "reach", "from": state_point, "to": e.return_point},
                           f"return point {e.return_point} is outside the causal future of the state at {state_point}")
        found = find_causal_path(state_point, e.return_point, task.regions, resolution)
        if not found.found and found.resolved:
            return Verdict("summoning", Status.INFEASIBLE,
                           {"kind": "reach", "from": state_point, "to": e.return_point},
                           f"regions block every path from the state to {e.return_point}")
    for a, b in itertools.combinations(entries, 2):
        ab = all(in_causal_future(c, b.return_point) for c in a.call_points)
        ba = all(in_causal_future(c, a.return_point) for c in b.call_points)
        if not ab and not ba:
            return Verdict("summoning", Status.INFEASIBLE,
                           {"kind": "diamonds", "calls": (a.call, b.call),
                            "call_points": (a.call_points, b.call_points),
                            "return_points": (a.return_point, b.return_point)},
                           "two call diamonds are causally disconnected, so a strategy answering both would clone the state")
    calls = [c for e in entries for c in e.call_points]
    m = meeting_point(calls, [e.return_point for e in entries])
    if m is None:
        return Verdict("summoning", Status.UNRESOLVED, None, "no common meeting point for the teleportation routing")
    if task.regions:
        legs = [(c, m) for c in calls] + [(m, e.return_point) for e in entries]
        for a, b in legs:
            if not find_causal_path(a, b, task.regions, resolution).found:
                return Verdict("summoning", Status.UNRESOLVED, None, f"routing leg {a} -> {b} not certified")
        if any(r.contains_interior(m) for r in task.regions):
            return Verdict("summoning", Status.UNRESOLVED, None, "meeting point lies in an excluded region")
    for e in entries:
        e.meeting_point = m
    return Verdict("summoning", Status.FEASIBLE,
                   {"state": q, "state_point": state_point, "routes": entries},
                   f"teleport from {state_point}, hold the partner at {m}")


# --- commitment ---------------------------------------------------------------

@dataclass(frozen=True)
class OracleInputModel:
    """Events carrying labelled information pieces; any sufficient set determines b."""

    events: tuple[tuple[SpacetimePoint, frozenset[str]], ...]
    sufficient_sets: tuple[frozenset[str], ...]

    def __post_init__(self):
        events = tuple((p, frozenset(ls)) for p, ls in self.events)
        sets = tuple(frozenset(s) for s in self.sufficient_sets)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "sufficient_sets", sets)
        labels = set().union(*(ls for _, ls in events)) if events else set()
        for s in sets:
            missing = s - labels
            if missing:
                raise AnalysisError(f"labels {sorted(missing)} appear in no oracle event")

    @classmethod
    def single(cls, point: SpacetimePoint) -> "OracleInputModel":
        return cls(((point, frozenset({"b"})),), (frozenset({"b"}),))

    @classmethod
    def redundant(cls, points: Sequence[SpacetimePoint]) -> "OracleInputModel":
        """Independent oracles each delivering the whole bit."""
        labels = [f"b{k}" for k in range(len(points))]
        return cls(tuple((p, frozenset({l})) for p, l in zip(points, labels)),
                   tuple(frozenset({l}) for l in labels))


def _reaches(a: SpacetimePoint, b: SpacetimePoint, regions) -> bool:
    if not in_causal_future(a, b):
        return False
    return not regions or find_causal_path(a, b, regions).found


def available_labels(model: OracleInputModel, p: SpacetimePoint, regions=()) -> set[str]:
    out = set()
    for q, labels in model.events:
        if _reaches(q, p, regions):
            out |= labels
    return out


def commitment_deducibility(model: OracleInputModel, p: SpacetimePoint,
                            regions: Sequence[Region] = ()) -> Verdict:
    """Is the bit deducible at ``p`` from oracle events in its causal past?"""
    have = available_labels(model, p, regions)
    for s in model.sufficient_sets:
        if s <= have:
            carriers = [q for q, labels in model.events if labels & s and _reaches(q, p, regions)]
            return Verdict("commitment", Status.FEASIBLE, {"set": sorted(s), "events": carriers, "point": p},
                           f"deducible at {p}")
    missing = [sorted(s - have) for s in model.sufficient_sets]
    return Verdict("commitment", Status.INFEASIBLE, {"available": sorted(have), "missing": missing, "point": p},
                   f"not deducible at {p}")


def _grid(points: Sequence[SpacetimePoint], centre: SpacetimePoint, n: int, pad: float = 1.25) -> np.ndarray:
    """Grid with equal steps in t and x anchored at ``centre``; light rays from it hit grid points."""
    half = n // 2
    reach = max(max(abs(p.t - centre.t), *(abs(a - b) for a, b in zip(p.x, centre.x))) for p in points)
    h = max(reach, 1.0) * pad / half
    axes = [np.arange(-half, half + 1) * h for _ in range(centre.dim + 1)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, centre.dim + 1)
    return mesh + centre.as_array()


def _before(grid: np.ndarray, q: SpacetimePoint) -> np.ndarray:
    """Mask of grid points in the closed causal past of q (same guard as geometry)."""
    qa = q.as_array()
    dt = qa[0] - grid[:, 0]
    dx = np.linalg.norm(grid[:, 1:] - qa[1:], axis=1)
    scale = np.maximum(1.0, np.maximum(np.abs(grid).max(axis=1), np.abs(qa).max()))
    s = dt * dt - dx * dx
    return (dt >= 0) & (s >= -1e-12 * scale * scale) | (np.abs(dt) + dx < 1e-12)


def unveiling_consistency_check(model: OracleInputModel | None, unveil_points: Sequence[SpacetimePoint],
                                commit_point: SpacetimePoint, regions: Sequence[Region] = (),
                                models: str = "general", grid: int | None = None) -> Verdict:
    """Does valid unveiling at every unveil point force deducibility at the commit point?

    The given model (if any) is checked directly.  Then oracle placements on
    a grid are searched for a model that unveils validly but is not
    deducible at ``commit_point``: single-oracle models only, or also
    redundant models with one independent oracle per unveil point.
    """
    if models not in ("single", "general"):
        raise ValueError("models must be 'single' or 'general'")
    witness: dict[str, Any] = {"grid": None}
    if model is not None:
        unveils = all(commitment_deducibility(model, u, regions).feasible for u in unveil_points)
        committed = commitment_deducibility(model, commit_point, regions).feasible
        witness["model_unveils"] = unveils
        witness["model_committed"] = committed
        if unveils and not committed:
            return Verdict("unveiling", Status.INFEASIBLE, {**witness, "counterexample": model},
                           "the given model unveils validly without being committed")
    n = grid or (41 if commit_point.dim == 1 else 9)
    pts = _grid(list(unveil_points) + [commit_point], commit_point, n)
    witness["grid"] = n
    if regions:
        past = [np.array([_reaches(SpacetimePoint(r[0], tuple(r[1:])), u, regions) for r in pts]) for u in unveil_points]
        at_p = np.array([_reaches(SpacetimePoint(r[0], tuple(r[1:])), commit_point, regions) for r in pts])
    else:
        past = [_before(pts, u) for u in unveil_points]
        at_p = _before(pts, commit_point)
    bad = ~at_p
    single = np.logical_and.reduce(past) & bad
    if single.any():
        x = pts[int(np.flatnonzero(single)[0])]
        cx = OracleInputModel.single(SpacetimePoint(x[0], tuple(x[1:])))
        return Verdict("unveiling", Status.INFEASIBLE, {**witness, "counterexample": cx},
                       "a single oracle serves every unveiling without reaching the commit point")
    if models == "general":
        chosen = []
        after_p = np.array([in_causal_future(commit_point, SpacetimePoint(r[0], tuple(r[1:]))) for r in pts])
        for mask in past:
            cand = np.flatnonzero(mask & bad)
            if cand.size == 0:
                break
            # prefer points on light rays out of the commit point, earliest first
            rays = [k for k in cand if after_p[k] and causal_relation(commit_point, _pt(pts[k])).kind is Kind.LIGHTLIKE]
            pool = rays or list(cand)
            k = min(pool, key=lambda k: (pts[k][0], float(np.linalg.norm(pts[k] - commit_point.as_array()))))
            chosen.append(_pt(pts[k]))
        else:
            cx = OracleInputModel.redundant(chosen)
            return Verdict("unveiling", Status.INFEASIBLE, {**witness, "counterexample": cx, "oracles": chosen},
                           "independent oracles serve every unveiling while the bit is absent at the commit point")
    return Verdict("unveiling", Status.FEASIBLE, witness,
                   f"every searched {models} model that unveils validly is committed at {commit_point}")


def _pt(row: np.ndarray) -> SpacetimePoint:
    return SpacetimePoint(float(row[0]), tuple(float(v) for v in row[1:]))


# --- budgets ------------------------------------------------------------------

def budget_audit(task: TaskSpec, report) -> Verdict:
    """Compare a run's per-region ledger against the region budgets."""
    totals = {}
    over = []
    for r in task.regions:
        if not r.penetrable:
            continue
        led = report.ledger.get(r.name, {"bits": 0, "qubits": 0})
        totals[r.name] = {"bits": led["bits"], "qubits": led["qubits"], "bit_budget": r.bits, "qubit_budget": r.qubits}
        if r.bits is not None and led["bits"] > r.bits:
            over.append(f"{r.name}: {led['bits']} bits > {r.bits}")
        if r.qubits is not None and led["qubits"] > r.qubits:
            over.append(f"{r.name}: {led['qubits']} qubits > {r.qubits}")
    if over:
        return Verdict("budget", Status.INFEASIBLE, totals, "; ".join(over))
    return Verdict("budget", Status.FEASIBLE, totals, "all crossings within budget")


# --- random access codes ------------------------------------------------------

@dataclass
class RacResult:
    best: float
    strategies: int
    encoder: tuple[int, ...] = field(default_factory=tuple)
    decoder: tuple[int, ...] = field(default_factory=tuple)


def random_access_code(m: int = 2, n: int = 1) -> RacResult:
    """Best deterministic classical (m -> n) random access code by exhaustion.

    Alice holds m uniform bits and sends an n-bit message; Bob, given a
    uniform index y, must guess bit y.  Encoders map inputs to messages,
    decoders map (message, y) to a guess.
    """
    inputs = list(itertools.product((0, 1), repeat=m))
    n_msg = 2 ** n
    best, count, arg = -1.0, 0, ((), ())
    # for a fixed encoder the optimal decoder is a majority vote, but every pair is scored
    for enc in itertools.product(range(n_msg), repeat=len(inputs)):
        for dec in itertools.product((0, 1), repeat=n_msg * m):
            count += 1
            wins = 0
            for i, x in enumerate(inputs):
                for y in range(m):
                    wins += dec[enc[i] * m + y] == x[y]
            p = wins / (len(inputs) * m)
            if p > best:
                best, arg = p, (enc, dec)
    return RacResult(best, count, *arg)
