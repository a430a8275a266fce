"""Causality-enforcing execution of strategies against tasks.

A strategy places agents at *stations* (spacetime points), optionally
predistributes entangled pairs or classical strings among them, and gives
each station a straight-line program.  Stations run once, in a fixed linear
extension of the causal order.  Every classical datum carries the set of
trace events it was derived from; reading a datum whose sources are not in
the causal past of the current station, or touching a register the station
does not hold, is a :class:`CausalityViolation`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import quantum as qm
from .expr import Expr, ExprError
from .geometry import (
    SpacetimePoint,
    find_causal_path,
    in_causal_future,
)
from .tasks import (
    InputAssignment,
    OutputRecord,
    Produced,
    TaskSpec,
    enumerate_inputs,
    evaluate_success,
    sample_inputs,
)

DEFAULT_BRANCH_CAP = 1 << 16


class ExecutionError(RuntimeError):
    pass


class CausalityViolation(ExecutionError):
    pass


class RegionViolation(ExecutionError):
    pass


class BudgetExceeded(ExecutionError):
    pass


class BranchCapExceeded(ExecutionError):
    pass


# --- strategy description ---------------------------------------------------

@dataclass(frozen=True)
class Station:
    """An agent location.

    ``point`` is a fixed event, an expression over inputs and constants, or
    one of the forms ``"@I"`` (wherever input I arrives) and ``"@J"`` (the
    location of required output J).
    """

    name: str
    point: SpacetimePoint | Expr | str
    agent: str | None = None


@dataclass(frozen=True)
class Pair:
    registers: tuple[str, str]
    stations: tuple[str, str]
    state: str = "maxent"
    dim: int = 2

    @property
    def frame(self) -> tuple[int, int]:
        return qm.SINGLET_FRAME if self.state == "singlet" else (0, 0)


@dataclass(frozen=True)
class SharedString:
    """Classical string predistributed to several stations."""

    name: str
    value: Any
    stations: tuple[str, ...]
    bits: int = 1


# handler statements

@dataclass(frozen=True)
class Let:
    var: str
    expr: Expr
    bits: int | None = None


@dataclass(frozen=True)
class Send:
    expr: Expr
    dest: str
    var: str
    bits: int | None = None
    via: tuple[str, ...] = ()


@dataclass(frozen=True)
class SendQ:
    register: str
    dest: str
    via: tuple[str, ...] = ()


@dataclass(frozen=True)
class Broadcast:
    var: str
    bits: int | None = None


@dataclass(frozen=True)
class TeleportSend:
    register: str
    local: str
    var: str


@dataclass(frozen=True)
class TeleportReceive:
    register: str
    var: str


@dataclass(frozen=True)
class Measure:
    register: str
    basis: str
    var: str
    angle: Expr | None = None


@dataclass(frozen=True)
class Apply:
    gate: str
    registers: tuple[str, ...]


@dataclass(frozen=True)
class Prepare:
    register: str
    basis: str
    arg: Expr
    dim: int = 2


@dataclass(frozen=True)
class Output:
    expr: Expr


@dataclass(frozen=True)
class Discard:
    register: str


@dataclass(frozen=True)
class If:
    cond: Expr | None
    body: Any
    have: str | None = None


@dataclass(frozen=True)
class Strategy:
    name: str
    stations: tuple[Station, ...]
    programs: dict[str, tuple] = field(default_factory=dict)
    pairs: tuple[Pair, ...] = ()
    shared: tuple[SharedString, ...] = ()
    notes: str = ""

    def station(self, name: str) -> Station:
        for s in self.stations:
            if s.name == name:
                return s
        raise ExecutionError(f"unknown station {name!r}")


# --- run records --------------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    index: int
    kind: str
    station: str
    point: SpacetimePoint
    detail: str
    deps: tuple[int, ...] = ()


@dataclass(frozen=True)
class MessageRecord:
    src: str
    dst: str
    kind: str
    payload: str
    bits: int
    qubits: int
    path: tuple[SpacetimePoint, ...]
    regions: tuple[str, ...]


@dataclass
class RunReport:
    task: str
    strategy: str
    inputs: dict[str, Any]
    statuses: list
    success: bool
    event: bool | None
    probability: float
    ledger: dict[str, dict[str, int]]
    messages: list[MessageRecord]
    trace: list[TraceEvent]
    unmatched: int = 0
    branch: tuple[int, ...] = ()

    @property
    def fidelities(self) -> dict[str, float]:
        return {s.name: s.fidelity for s in self.statuses if s.fidelity is not None}


def audit_trace(report: RunReport) -> list[str]:
    """Every dependency edge must point forward in the trace and in causal order."""
    problems = []
    for ev in report.trace:
        for d in ev.deps:
            src = report.trace[d]
            if d >= ev.index:
                problems.append(f"event {ev.index} depends on later event {d}")
            if not in_causal_future(src.point, ev.point):
                problems.append(f"event {ev.index} ({ev.kind} at {ev.station}) depends on event {d} outside its causal past")
    return problems


# --- execution ----------------------------------------------------------------

@dataclass
class _Datum:
    value: Any
    prov: frozenset
    bits: int


def _bits_for_count(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


class _Chooser:
    """Measurement outcome selection: sampled (rng) or replayed (exact)."""

    def __init__(self, rng: np.random.Generator | None = None, prefix: Sequence[int] = ()):
        self.rng = rng
        self.prefix = list(prefix)
        self.decisions: list[tuple[int, list[int]]] = []
        self.weight = 1.0

    def choose(self, probs: Sequence[float]) -> int:
        possible = [k for k, p in enumerate(probs) if p > 1e-14]
        depth = len(self.decisions)
        if self.rng is not None:
            p = np.array([probs[k] for k in possible])
            k = possible[int(self.rng.choice(len(possible), p=p / p.sum()))]
        elif depth < len(self.prefix):
            k = self.prefix[depth]
        else:
            k = possible[0]
        self.decisions.append((k, possible))
        self.weight *= probs[k]
        return k


class _Run:
    def __init__(self, task: TaskSpec, strategy: Strategy, assignment: InputAssignment,
                 chooser: _Chooser, enforce_budgets: bool):
        self.task = task
        self.strategy = strategy
        self.assignment = assignment
        self.chooser = chooser
        self.enforce_budgets = enforce_budgets
        self.regions = task.regions
        self.trace: list[TraceEvent] = []
        self.messages: list[MessageRecord] = []
        self.ledger = {r.name: {"bits": 0, "qubits": 0} for r in task.regions if r.penetrable}
        self.produced: list[Produced] = []
        self.state = assignment.state
        self.original = assignment.state
        self.reg_holder: dict[str, str | None] = {}
        self.reg_prov: dict[str, frozenset] = {}
        self.env: dict[str, dict[str, _Datum]] = {s.name: {} for s in strategy.stations}
        self.done: set[str] = set()
        self.locations: dict[str, SpacetimePoint] = {}
        self.location_prov: dict[str, frozenset] = {}
        self.input_events: dict[str, int] = {}

    # trace helpers
    def event(self, kind, station, point, detail, deps=()) -> int:
        idx = len(self.trace)
        self.trace.append(TraceEvent(idx, kind, station, point, detail, tuple(sorted(set(deps)))))
        return idx

    def _resolve_locations(self):
        names = {s.name for s in self.strategy.stations}
        if len(names) != len(self.strategy.stations):
            raise ExecutionError("duplicate station names")
        outputs = {o.name: o for o in self.task.outputs}
        input_names = {i.name for i in self.task.inputs}
        for s in self.strategy.stations:
            p, deps = s.point, set()
            if isinstance(p, str) and p.startswith("@"):
                ref = p[1:]
                if ref in input_names:
                    loc = self.assignment.points[ref]
                    rule = self.task.input(ref).point
                    deps = set(rule.names & input_names) | {ref} if isinstance(rule, Expr) else set()
                elif ref in outputs:
                    o = outputs[ref]
                    env = {**self.task.constants, **{k: self.assignment.values.get(k) for k in o.deps}}
                    loc = o.point.evaluate(env)
                    deps = set(o.point.names & input_names)
                else:
                    raise ExecutionError(f"station {s.name}: unknown reference {p!r}")
            elif isinstance(p, Expr):
                env = {**self.task.constants, **self.assignment.values}
                loc = p.evaluate(env)
                deps = set(p.names & input_names)
            else:
                loc = p
            if not isinstance(loc, SpacetimePoint) or loc.dim != self.task.dim:
                raise ExecutionError(f"station {s.name} does not resolve to a point of dimension {self.task.dim}")
            for r in self.regions:
                if r.contains_interior(loc):
                    raise RegionViolation(f"station {s.name} at {loc} lies inside excluded region {r.name!r}")
            self.locations[s.name] = loc
            self.location_prov[s.name] = frozenset(deps)

    def _schedule(self) -> list[Station]:
        order = {s.name: k for k, s in enumerate(self.strategy.stations)}
        return sorted(self.strategy.stations, key=lambda s: (self.locations[s.name].t, order[s.name]))

    def _earliest_input_time(self) -> float:
        times = [p.t for p in self.assignment.points.values()]
        return min(times) if times else min(l.t for l in self.locations.values())

    def _predistribute(self):
        t0 = self._earliest_input_time()
        for pair in self.strategy.pairs:
            a, b = pair.registers
            deps = []
            for reg, st in zip(pair.registers, pair.stations):
                self._check_fixed(st, "predistributed resources")
                loc = self.locations[st]
                at = SpacetimePoint(min(t0, loc.t), loc.x)
                self._check_wait(st, at, loc)
                deps.append(self.event("place", st, at, f"pair half {reg}"))
            half = qm.make_state(qm.RegisterSystem((a, b), (pair.dim, pair.dim)),
                                 "singlet" if pair.state == "singlet" else "maxent", registers=(a, b))
            self.state = half if self.state is None else qm.tensor(self.state, half)
            for reg, st, d in zip(pair.registers, pair.stations, deps):
                self.reg_holder[reg] = st
                self.reg_prov[reg] = frozenset([d])
        for sh in self.strategy.shared:
            for st in sh.stations:
                self._check_fixed(st, "predistributed resources")
                loc = self.locations[st]
                at = SpacetimePoint(min(t0, loc.t), loc.x)
                self._check_wait(st, at, loc)
                e = self.event("place", st, at, f"shared string {sh.name}")
                self.env[st][sh.name] = _Datum(sh.value, frozenset([e]), sh.bits)

    def _check_fixed(self, station: str, what: str):
        if self.location_prov[station]:
            raise CausalityViolation(f"{what} cannot be placed at input-dependent station {station}")

    def _check_wait(self, station, a, b):
        for r in self.regions:
            if r.impenetrable and r.meets_segment(a, b):
                raise RegionViolation(f"resource for {station} would wait inside region {r.name!r}")

    def _deliver_inputs(self, st: Station, loc: SpacetimePoint):
        for ev in self.task.inputs:
            p = self.assignment.points[ev.name]
            if not p.close_to(loc):
                continue
            if ev.name not in self.input_events:
                self.input_events[ev.name] = self.event("input", st.name, p, f"receive {ev.name}")
            e = self.input_events[ev.name]
            if ev.quantum:
                if self.reg_holder.get(ev.name) is None:
                    self.reg_holder[ev.name] = st.name
                    self.reg_prov[ev.name] = frozenset([e])
            else:
                width = ev.payload.bits
                self.env[st.name][ev.name] = _Datum(self.assignment.values[ev.name], frozenset([e]), width)

    # data access
    def _check_prov(self, station: str, prov, what: str):
        here = self.locations[station]
        for d in prov:
            if not in_causal_future(self.trace[d].point, here):
                raise CausalityViolation(f"{station} reads {what}, which depends on an event outside its causal past")

    def _eval(self, station: str, expr: Expr) -> _Datum:
        local = self.env[station]
        env = dict(self.task.constants)
        prov, bits = set(), 1
        for n in expr.names:
            if n in local:
                env[n] = local[n].value
                prov |= local[n].prov
                bits = max(bits, local[n].bits)
            elif n not in env:
                raise CausalityViolation(f"{station} reads {n!r}, which is not available there")
        self._check_prov(station, prov, expr.text)
        try:
            value = expr.evaluate(env)
        except ExprError as exc:
            raise ExecutionError(f"{station}: {exc}") from None
        return _Datum(value, frozenset(prov), bits)

    def _hold(self, station: str, reg: str):
        holder = self.reg_holder.get(reg, None)
        if holder != station:
            where = "nowhere" if holder is None else f"at {holder}"
            raise CausalityViolation(f"{station} uses register {reg!r}, which is {where}")
        self._check_prov(station, self.reg_prov[reg], f"register {reg}")

    # transport
    def _route(self, station: str, dest: str, via: Sequence[str], aimed: bool = True) -> tuple[SpacetimePoint, ...]:
        if dest not in self.locations:
            raise ExecutionError(f"{station}: unknown destination {dest!r}")
        if aimed:
            # aiming at a station requires knowing where it is
            self._check_prov(station, self._location_events(dest), f"the location of {dest}")
        if dest in self.done:
            raise CausalityViolation(f"message from {station} reaches {dest} after it has acted")
        src_pt, dst_pt = self.locations[station], self.locations[dest]
        if list(via) == ["auto"]:
            found = find_causal_path(src_pt, dst_pt, self.regions)
            if not found:
                raise CausalityViolation(f"no causal route from {station} to {dest}: {found.note}")
            return found.path
        pts = [src_pt]
        for w in via:
            pts.append(self._waypoint(w))
        pts.append(dst_pt)
        for a, b in zip(pts, pts[1:]):
            if not in_causal_future(a, b):
                raise CausalityViolation(f"signal from {station} cannot reach {dest}: {a} -> {b} is not future-directed causal")
            for r in self.regions:
                if r.impenetrable and r.meets_segment(a, b):
                    raise RegionViolation(f"signal from {station} to {dest} enters impenetrable region {r.name!r}")
        return tuple(pts)

    def _waypoint(self, name: str) -> SpacetimePoint:
        if name in self.locations:
            return self.locations[name]
        v = self.task.constants.get(name)
        if isinstance(v, SpacetimePoint):
            return v
        raise ExecutionError(f"unknown waypoint {name!r}")

    def _location_events(self, station: str) -> set[int]:
        out = set()
        for ref in self.location_prov[station]:
            if ref not in self.input_events:
                # the defining input has not been observed by anyone yet
                p = self.assignment.points[ref]
                self.input_events[ref] = self.event("input", "-", p, f"arrival of {ref}")
            out.add(self.input_events[ref])
        return out

    def _meter(self, path, bits: int, qubits: int) -> tuple[str, ...]:
        crossed = []
        for r in self.regions:
            if not r.penetrable:
                continue
            if any(r.meets_segment(a, b) for a, b in zip(path, path[1:])):
                crossed.append(r.name)
                led = self.ledger[r.name]
                led["bits"] += bits
                led["qubits"] += qubits
                if self.enforce_budgets:
                    if r.bits is not None and led["bits"] > r.bits:
                        raise BudgetExceeded(f"region {r.name!r}: {led['bits']} bits exceed budget {r.bits}")
                    if r.qubits is not None and led["qubits"] > r.qubits:
                        raise BudgetExceeded(f"region {r.name!r}: {led['qubits']} qubits exceed budget {r.qubits}")
        return tuple(crossed)

    def _send_classical(self, station, dest, var, datum: _Datum, bits, via=(), aimed=True):
        path = self._route(station, dest, via, aimed)
        width = datum.bits if bits is None else bits
        crossed = self._meter(path, width, 0)
        e = self.event("send", station, self.locations[station], f"{var} -> {dest}", datum.prov)
        self.messages.append(MessageRecord(station, dest, "classical", var, width, 0, path, crossed))
        inbox = self.env[dest]
        if var in inbox and inbox[var].value != datum.value:
            raise ExecutionError(f"{dest} receives conflicting values for {var!r}")
        inbox[var] = _Datum(datum.value, datum.prov | {e}, width)

    # statements
    def run_statement(self, st: Station, stmt):
        name = st.name
        here = self.locations[name]
        if isinstance(stmt, If):
            if stmt.have is not None:
                present = stmt.have in self.env[name] or self.reg_holder.get(stmt.have) == name
                if present:
                    self.run_statement(st, stmt.body)
                return
            if self._eval(name, stmt.cond).value:
                self.run_statement(st, stmt.body)
            return
        if isinstance(stmt, Let):
            d = self._eval(name, stmt.expr)
            self.env[name][stmt.var] = _Datum(d.value, d.prov, stmt.bits or d.bits)
        elif isinstance(stmt, Send):
            self._send_classical(name, stmt.dest, stmt.var, self._eval(name, stmt.expr), stmt.bits, stmt.via)
        elif isinstance(stmt, Broadcast):
            if stmt.var not in self.env[name]:
                raise CausalityViolation(f"{name} broadcasts {stmt.var!r}, which is not available there")
            datum = self.env[name][stmt.var]
            for other in self.strategy.stations:
                o = other.name
                if o == name or o in self.done or not in_causal_future(here, self.locations[o]):
                    continue
                try:
                    self._send_classical(name, o, stmt.var, datum, stmt.bits, via=("auto",) if self.regions else (), aimed=False)
                except (CausalityViolation, RegionViolation):
                    continue
        elif isinstance(stmt, SendQ):
            self._hold(name, stmt.register)
            path = self._route(name, stmt.dest, stmt.via)
            dim = self.state.system.dim(stmt.register)
            nq = math.ceil(math.log2(dim))
            crossed = self._meter(path, 0, nq)
            e = self.event("sendq", name, here, f"{stmt.register} -> {stmt.dest}", self.reg_prov[stmt.register])
            self.messages.append(MessageRecord(name, stmt.dest, "quantum", stmt.register, 0, nq, path, crossed))
            self.reg_holder[stmt.register] = stmt.dest
            self.reg_prov[stmt.register] = self.reg_prov[stmt.register] | {e}
        elif isinstance(stmt, TeleportSend):
            self._hold(name, stmt.register)
            self._hold(name, stmt.local)
            dim = self.state.system.dim(stmt.register)
            branches = qm.teleport_branches(self.state, stmt.register, stmt.local)
            k = self.chooser.choose([b[1] for b in branches])
            msg, _, rem = branches[k]
            prov = self.reg_prov[stmt.register] | self.reg_prov[stmt.local]
            e = self.event("measure", name, here, f"bell({stmt.register},{stmt.local}) = {msg}", prov)
            self.state = rem
            for r in (stmt.register, stmt.local):
                self.reg_holder[r] = None
            width = 2 * _bits_for_count(dim)
            self.env[name][stmt.var] = _Datum(tuple(msg), frozenset(prov | {e}), width)
        elif isinstance(stmt, TeleportReceive):
            self._hold(name, stmt.register)
            d = self._eval(name, Expr(stmt.var))
            frame = self._frame_of(stmt.register)
            self.state = qm.teleport_receive(self.state, stmt.register, tuple(int(v) for v in d.value), frame)
            e = self.event("correct", name, here, f"correct {stmt.register} by {d.value}", d.prov | self.reg_prov[stmt.register])
            self.reg_prov[stmt.register] = self.reg_prov[stmt.register] | d.prov | {e}
        elif isinstance(stmt, Measure):
            self._hold(name, stmt.register)
            dim = self.state.system.dim(stmt.register)
            prov = set(self.reg_prov[stmt.register])
            if stmt.basis == "angle":
                ang = self._eval(name, stmt.angle)
                prov |= ang.prov
                basis = qm.equator_basis(float(ang.value))
            else:
                basis = qm.named_basis(stmt.basis, dim)
            outcomes = qm.measure(self.state, (stmt.register,), basis)
            k = self.chooser.choose([o.probability for o in outcomes])
            self.state = outcomes[k].post_state
            e = self.event("measure", name, here, f"{stmt.register} in {stmt.basis} = {k}", prov)
            self.reg_prov[stmt.register] = frozenset(prov | {e})
            self.env[name][stmt.var] = _Datum(k, frozenset(prov | {e}), _bits_for_count(dim))
        elif isinstance(stmt, Apply):
            for r in stmt.registers:
                self._hold(name, r)
            gate = qm.GATES.get(stmt.gate)
            if gate is None:
                raise ExecutionError(f"unknown gate {stmt.gate!r}")
            self.state = qm.apply_unitary(self.state, stmt.registers, gate)
        elif isinstance(stmt, Prepare):
            if stmt.register in self.reg_holder:
                raise ExecutionError(f"register {stmt.register!r} already exists")
            d = self._eval(name, stmt.arg)
            vec = _prepared_vector(stmt.basis, d.value, stmt.dim)
            new = qm.pure(qm.RegisterSystem((stmt.register,), (stmt.dim,)), vec)
            self.state = new if self.state is None else qm.tensor(self.state, new)
            e = self.event("prepare", name, here, f"prepare {stmt.register}", d.prov)
            self.reg_holder[stmt.register] = name
            self.reg_prov[stmt.register] = frozenset(d.prov | {e})
        elif isinstance(stmt, Discard):
            self._hold(name, stmt.register)
            self.state = qm.discard(self.state, (stmt.register,)) if len(self.state.labels) > 1 else None
            self.reg_holder[stmt.register] = None
        elif isinstance(stmt, Output):
            reg = stmt.expr.bare_name
            if reg is not None and self.reg_holder.get(reg) == name:
                self._hold(name, reg)
                self.event("output", name, here, f"output register {reg}", self.reg_prov[reg])
                self.produced.append(Produced(here, register=reg))
                self.reg_holder[reg] = None
            else:
                d = self._eval(name, stmt.expr)
                self.event("output", name, here, f"output {d.value!r}", d.prov)
                self.produced.append(Produced(here, value=d.value))
        else:
            raise ExecutionError(f"unknown statement {stmt!r}")

    def _frame_of(self, register: str) -> tuple[int, int]:
        for p in self.strategy.pairs:
            if register in p.registers:
                return p.frame
        return (0, 0)

    def run(self) -> None:
        self._resolve_locations()
        self._predistribute()
        for st in self._schedule():
            loc = self.locations[st.name]
            self._deliver_inputs(st, loc)
            self.event("station", st.name, loc, "act", ())
            for stmt in self.strategy.programs.get(st.name, ()):
                self.run_statement(st, stmt)
            self.done.add(st.name)


def _prepared_vector(basis: str, value, dim: int) -> np.ndarray:
    if basis == "z":
        return qm.basis_vector([dim], [int(value) % dim])
    if basis == "x":
        return qm.equator_basis(0.0)[:, int(value) % 2]
    if basis == "y":
        return qm.equator_basis(math.pi / 2)[:, int(value) % 2]
    if basis == "bloch":
        theta, phi = value
        return qm.bloch_vector(float(theta), float(phi))
    raise ExecutionError(f"unknown preparation basis {basis!r}")


def _execute(task, strategy, assignment, chooser, enforce_budgets=True) -> RunReport:
    run = _Run(task, strategy, assignment, chooser, enforce_budgets)
    run.run()
    record = OutputRecord(run.produced, run.state, run.original)
    rep = evaluate_success(task, assignment, record)
    return RunReport(
        task=task.name,
        strategy=strategy.name,
        inputs=assignment.describe(),
        statuses=rep.statuses,
        success=rep.success,
        event=rep.event,
        probability=chooser.weight,
        ledger={k: dict(v) for k, v in run.ledger.items()},
        messages=run.messages,
        trace=run.trace,
        unmatched=len(rep.unmatched),
        branch=tuple(k for k, _ in chooser.decisions),
    )


def execute(task: TaskSpec, strategy: Strategy, assignment: InputAssignment,
            seed: int | np.random.Generator = 0, enforce_budgets: bool = True) -> RunReport:
    """Run one branch of ``strategy``; measurement outcomes are sampled from ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _execute(task, strategy, assignment, _Chooser(rng=rng), enforce_budgets)


def branches(task: TaskSpec, strategy: Strategy, assignment: InputAssignment,
             cap: int = DEFAULT_BRANCH_CAP, enforce_budgets: bool = True) -> list[RunReport]:
    """Every measurement branch for one assignment, each weighted by its probability."""
    out = []
    stack = [[]]
    while stack:
        prefix = stack.pop()
        chooser = _Chooser(prefix=prefix)
        rep = _execute(task, strategy, assignment, chooser, enforce_budgets)
        out.append(rep)
        if len(out) > cap:
            raise BranchCapExceeded(f"more than {cap} measurement branches")
        for i in range(len(prefix), len(chooser.decisions)):
            k, possible = chooser.decisions[i]
            base = [d for d, _ in chooser.decisions[:i]]
            for alt in possible:
                if alt > k:
                    stack.append(base + [alt])
    return out


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent per-trial stream derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


@dataclass
class Estimate:
    mode: str
    probability: float
    low: float
    high: float
    runs: int
    predicate_holds: bool
    mean_fidelity: dict[str, float] = field(default_factory=dict)
    mean_min_fidelity: float | None = None
    max_ledger: dict[str, dict[str, int]] = field(default_factory=dict)
    reports: list[RunReport] = field(default_factory=list, repr=False)


def wilson_interval(successes: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(successes, n, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def _haar_unknown(task: TaskSpec) -> bool:
    return any(ev.quantum and ev.payload.prep == "haar" and ev.payload.vector is None and ev.payload.group is None
               for ev in task.inputs)


def _haar_success(task: TaskSpec, weighted: list[tuple[float, RunReport]]) -> float:
    """Success mass under Haar-random inputs from runs on 2-design probe states.

    Runs with the same classical inputs and measurement path belong to one
    Kraus branch.  Its weighted fidelity deficit p_b (1 - F) is quadratic in
    the input state, so the probe average is the Haar average.  Being
    nonnegative, it vanishes iff the branch returns every state exactly;
    otherwise exact return happens only on a Haar-null set of inputs.
    """
    if task.predicate.kind == "fidelity" and task.predicate.threshold < 1.0 - 1e-9:
        raise ExecutionError("exact mode cannot score a fidelity threshold below 1 on unknown states; use mc")
    groups: dict[tuple, list] = {}
    for w, r in weighted:
        key = (tuple(sorted(r.inputs.items())), r.branch)
        g = groups.setdefault(key, [0.0, 0.0, True])
        g[0] += w
        g[1] += w * sum(1.0 - s.fidelity for s in r.statuses if s.fidelity is not None)
        g[2] = g[2] and r.unmatched == 0 and all(s.ok or s.fidelity is not None for s in r.statuses)
    return sum(mass for mass, deficit, ok in groups.values() if ok and deficit <= 1e-9 * mass)


def _collect(task, weighted: list[tuple[float, RunReport]], mode: str, runs: int, keep: bool) -> Estimate:
    total = sum(w for w, _ in weighted)
    if mode == "exact" and task.predicate.kind != "probability" and _haar_unknown(task):
        p = _haar_success(task, weighted) / total
    else:
        p = sum(w for w, r in weighted if r.success) / total
    fid: dict[str, float] = {}
    min_fid = None
    names = [o.name for o in task.outputs if o.kind == "quantum"]
    if names:
        min_fid = 0.0
        for w, r in weighted:
            fs = r.fidelities
            vals = [fs.get(n, 0.0) for n in names]
            for n, v in zip(names, vals):
                fid[n] = fid.get(n, 0.0) + w * v / total
            min_fid += w * min(vals) / total
    ledger: dict[str, dict[str, int]] = {}
    for _, r in weighted:
        for name, led in r.ledger.items():
            cur = ledger.setdefault(name, {"bits": 0, "qubits": 0})
            cur["bits"] = max(cur["bits"], led["bits"])
            cur["qubits"] = max(cur["qubits"], led["qubits"])
    if mode == "exact":
        lo = hi = p
    else:
        lo, hi = wilson_interval(int(round(p * total)), int(total))
    return Estimate(mode, p, lo, hi, runs, task.predicate.holds(p), fid, min_fid, ledger,
                    [r for _, r in weighted] if keep else [])


def estimate(task: TaskSpec, strategy: Strategy, mode: str = "exact", trials: int = 1000,
             seed: int = 0, cap: int = DEFAULT_BRANCH_CAP, keep_reports: bool = False,
             enforce_budgets: bool = True) -> Estimate:
    """Success probability: exact enumeration or seeded Monte Carlo with a Wilson interval."""
    weighted: list[tuple[float, RunReport]] = []
    if mode == "exact":
        count = 0
        for p_in, assignment in enumerate_inputs(task):
            for rep in branches(task, strategy, assignment, cap, enforce_budgets):
                count += 1
                if count > cap:
                    raise BranchCapExceeded(f"more than {cap} runs in exact mode")
                weighted.append((p_in * rep.probability, rep))
        return _collect(task, weighted, "exact", count, keep_reports)
    if mode != "mc":
        raise ValueError(f"unknown estimation mode {mode!r}")
    if trials <= 0:
        raise ValueError("trials must be positive")
    for k in range(trials):
        rng = trial_rng(seed, k)
        assignment = sample_inputs(task, rng)
        rep = _execute(task, strategy, assignment, _Chooser(rng=rng), enforce_budgets)
        weighted.append((1.0, rep))
    return _collect(task, weighted, "mc", trials, keep_reports)


def output_table(task: TaskSpec, strategy: Strategy, cap: int = DEFAULT_BRANCH_CAP) -> list[tuple[float, InputAssignment, RunReport]]:
    """Exact joint law of inputs and runs: (weight, assignment, report) rows."""
    rows = []
    for p_in, assignment in enumerate_inputs(task):
        for rep in branches(task, strategy, assignment, cap):
            rows.append((p_in * rep.probability, assignment, rep))
    return rows


def no_signalling_audit(task: TaskSpec, strategy: Strategy) -> float:
    """Largest shift in an output marginal caused by a spacelike-separated input.

    For each required output and each classical input whose event is never
    in the causal past of that output, the law of the value produced there,
    conditioned on the input, must not depend on the input's value.
    """
    rows = output_table(task, strategy)
    worst = 0.0
    for o in task.outputs:
        for ev in task.inputs:
            if ev.quantum:
                continue
            cond: dict = {}
            spacelike = True
            for w, assignment, rep in rows:
                status = next(s for s in rep.statuses if s.name == o.name)
                if in_causal_future(assignment.points[ev.name], status.point):
                    spacelike = False
                    break
                key = repr(assignment.values[ev.name])
                tab = cond.setdefault(key, {})
                out = repr(status.value)
                tab[out] = tab.get(out, 0.0) + w
            if not spacelike or len(cond) < 2:
                continue
            laws = []
            for tab in cond.values():
                z = sum(tab.values())
                laws.append({k: v / z for k, v in tab.items()})
            keys = set().union(*laws)
            for l1 in laws:
                for l2 in laws:
                    for k in keys:
                        worst = max(worst, abs(l1.get(k, 0.0) - l2.get(k, 0.0)))
    return worst
