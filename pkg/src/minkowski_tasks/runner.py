"""Run a scenario's checks and simulations and compare with its expectations."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from types import SimpleNamespace

from . import analyzers as an
from . import engine as en
from .expr import Expr, ExprError
from .geometry import causal_relation
from .report import Finding, Report, Simulation, rounded
from .scenario import Directive, Scenario
from .strategies import generic_teleport
from .tasks import ClassicalDistribution, InputEvent, TaskSpec, sample_inputs

STATIC = ("routing", "clone", "summoning", "commitment", "unveiling", "relation", "rac")
ERROR_KINDS = {
    en.CausalityViolation: "violation",
    en.RegionViolation: "region",
    en.BudgetExceeded: "budget",
}


@dataclass
class RunOptions:
    """Overrides from the command line; None keeps the scenario's value."""

    mode: str | None = None
    trials: int | None = None
    seed: int | None = None
    resolution: int = 64
    static_only: bool = False
    dynamic_only: bool = False


class DirectiveError(ValueError):
    pass


def _number(text: str, constants) -> float:
    try:
        return float(Expr(text).evaluate(dict(constants)))
    except (ExprError, TypeError, ValueError):
        raise DirectiveError(f"expected a number, got {text!r}") from None


def _compare(d: Directive, observed, constants, low=None, high=None) -> tuple[bool, str | None]:
    """Match an observation against ``expect``; numbers use ``tol``."""
    if d.expect is None:
        return True, None
    op, text = d.expect
    expected = f"{op if op != '=' else ''}{text}"
    if isinstance(observed, str):
        return op == "=" and observed.lower() == text.lower(), expected
    try:
        target = _number(text, constants)
    except DirectiveError:
        return False, expected
    tol = float(d.options.get("tol", "1e-9"))
    if op == "<=":
        return observed <= target + tol, expected
    if op == ">=":
        return observed >= target - tol, expected
    if low is not None and d.options.get("mode") == "mc":
        return low - tol <= target <= high + tol, expected
    return abs(observed - target) <= tol, expected


def _points(scn: Scenario, names: str):
    out = []
    for n in names.split(","):
        p = scn.task.constants.get(n.strip())
        if p is None or not hasattr(p, "t"):
            raise DirectiveError(f"unknown point {n!r}")
        out.append(p)
    return out


def _model(scn: Scenario, d: Directive):
    if "oracles" not in d.options:
        return None
    pts = _points(scn, d.options["oracles"])
    mode = d.options.get("mode", "single")
    if mode == "single":
        if len(pts) != 1:
            raise DirectiveError("a single-oracle model has exactly one oracle")
        return an.OracleInputModel.single(pts[0])
    if mode == "redundant":
        return an.OracleInputModel.redundant(pts)
    raise DirectiveError(f"unknown oracle mode {mode!r}")


def trace_digest(report: en.RunReport) -> tuple[str, list[str]]:
    lines = [f"{e.index} {e.kind} {e.station} {e.point} {e.detail} <- {list(e.deps)}" for e in report.trace]
    h = hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]
    return h, lines[:6]


def simulate(task: TaskSpec, strategy: en.Strategy, mode: str, trials: int, seed: int,
             enforce_budgets: bool = True) -> Simulation:
    est = en.estimate(task, strategy, mode, trials, seed, keep_reports=True, enforce_budgets=enforce_budgets)
    problems = sum(len(en.audit_trace(r)) for r in est.reports)
    sample = en.execute(task, strategy, sample_inputs(task, en.trial_rng(seed, 0)), en.trial_rng(seed, 1),
                        enforce_budgets=enforce_budgets)
    digest, head = trace_digest(sample)
    return Simulation(
        strategy=strategy.name,
        mode=mode,
        seed=seed,
        runs=est.runs,
        probability=rounded(est.probability),
        low=rounded(est.low),
        high=rounded(est.high),
        predicate_holds=est.predicate_holds,
        mean_min_fidelity=rounded(est.mean_min_fidelity),
        ledger=est.max_ledger,
        messages=len(sample.messages),
        trace_events=len(sample.trace),
        trace_digest=digest,
        trace_head=head,
        audit_problems=problems,
    )


def _fix_input(task: TaskSpec, name: str, value) -> TaskSpec:
    inputs = tuple(
        InputEvent(ev.name, ev.point, ClassicalDistribution.constant(value), ev.inside_region) if ev.name == name else ev
        for ev in task.inputs
    )
    return replace(task, inputs=inputs, name=f"{task.name}[{name}={value:g}]" if isinstance(value, float) else task.name)


def run_directive(scn: Scenario, d: Directive, opts: RunOptions) -> Finding:
    task = scn.variant(d.options.get("variant"))
    consts = task.constants
    sim = None
    value = None
    detail = ""
    kind = d.kind
    if kind in ("routing", "clone", "summoning"):
        fn = {"routing": lambda t: an.classical_routing_check(t, opts.resolution),
              "clone": an.clone_demand_check,
              "summoning": lambda t: an.summoning_check(t, opts.resolution)}[kind]
        try:
            v = fn(task)
            observed, detail = v.status.value, v.rationale
        except an.AnalysisError as exc:
            observed, detail = "error", str(exc)
    elif kind == "family":
        name = d.options.get("input")
        if name is None:
            raise DirectiveError("family needs input=NAME")
        ev = task.input(name)
        feasible = succeeded = agree = 0
        values = [v for v, _ in ev.payload.support()]
        for val in values:
            sub = _fix_input(task, name, val)
            v = an.summoning_check(sub, opts.resolution)
            ok_run = False
            if v.feasible:
                feasible += 1
                est = en.estimate(sub, generic_teleport(sub, opts.resolution), "exact")
                ok_run = est.probability >= 1 - 1e-9
                succeeded += ok_run
            agree += v.feasible == ok_run
        observed = "Feasible" if feasible == len(values) and succeeded == len(values) else (
            "Infeasible" if feasible == 0 else "Mixed")
        value = float(feasible)
        detail = f"{feasible}/{len(values)} feasible, {succeeded} with exact success 1, verdict and engine agree on {agree}"
        if agree != len(values):
            observed = "Inconsistent"
    elif kind == "relation":
        p, q = _points(scn, d.options.get("args", ""))
        rel = causal_relation(p, q)
        observed = rel.kind.value
        detail = f"{rel.kind.value}, {rel.direction.value}"
    elif kind == "rac":
        res = an.random_access_code(int(d.options.get("m", 2)), int(d.options.get("n", 1)))
        value = res.best
        observed = f"{res.best:.12g}"
        detail = f"{res.strategies} deterministic strategies enumerated"
    elif kind == "commitment":
        model = _model(scn, d)
        if model is None:
            raise DirectiveError("commitment needs oracles=")
        (at,) = _points(scn, d.options.get("at", ""))
        v = an.commitment_deducibility(model, at, task.regions)
        observed, detail = v.status.value, v.rationale
    elif kind == "unveiling":
        unveil = _points(scn, d.options.get("unveil", ""))
        (commit,) = _points(scn, d.options.get("commit", ""))
        grid = int(d.options["grid"]) if "grid" in d.options else None
        v = an.unveiling_consistency_check(_model(scn, d), unveil, commit, task.regions,
                                           d.options.get("models", "general"), grid)
        observed, detail = v.status.value, v.rationale
        cx = v.witness.get("counterexample") if isinstance(v.witness, dict) else None
        if cx is not None:
            detail += "; oracles at " + ", ".join(str(p) for p, _ in cx.events)
    elif kind in ("simulate", "budget", "nosignal"):
        strategy_name = d.options.get("strategy")
        try:
            strategy = scn.strategy(strategy_name, task, opts.resolution)
        except an.AnalysisError as exc:
            return Finding(kind, d.line, d.text, "error", _compare(d, "error", consts)[1], False, str(exc))
        if kind == "nosignal":
            value = en.no_signalling_audit(task, strategy)
            observed = f"{value:.3g}"
            detail = "largest change of an output marginal under a spacelike input"
        else:
            mode = opts.mode or d.options.get("mode", "exact")
            trials = opts.trials or int(d.options.get("trials", 1000))
            seed = opts.seed if opts.seed is not None else int(d.options.get("seed", scn.seed))
            if kind == "budget":
                mode = "exact"
            try:
                sim = simulate(task, strategy, mode, trials, seed, enforce_budgets=(kind != "budget"))
            except en.ExecutionError as exc:
                observed = next((v for k, v in ERROR_KINDS.items() if isinstance(exc, k)), "error")
                ok, expected = _compare(d, observed, consts)
                return Finding(kind, d.line, d.text, observed, expected, ok, str(exc))
            if kind == "budget":
                v = an.budget_audit(task, SimpleNamespace(ledger=sim.ledger))
                observed, detail = v.status.value, v.rationale
            else:
                metric = d.options.get("metric", "success")
                if metric == "success":
                    value = sim.probability
                elif metric == "min_fidelity":
                    value = sim.mean_min_fidelity
                else:
                    raise DirectiveError(f"unknown metric {metric!r}")
                observed = f"{value:.12g}"
                if sim.audit_problems:
                    detail = f"{sim.audit_problems} causal-trace audit problems"
    else:
        raise DirectiveError(f"unknown check {kind!r}")
    if value is not None and not isinstance(value, str):
        value = rounded(value)
    d_opts = d if kind != "simulate" else replace(d, options={**d.options, "mode": sim.mode if sim else "exact"})
    num = value if (value is not None and kind in ("simulate", "nosignal", "rac")) else observed
    ok, expected = _compare(d_opts, num, consts, sim.low if sim else None, sim.high if sim else None)
    if sim is not None and sim.audit_problems:
        ok = False
    return Finding(kind, d.line, d.text, observed, expected, ok, detail, value, sim)


def run_scenario(scn: Scenario, opts: RunOptions | None = None) -> Report:
    opts = opts or RunOptions()
    report = Report(scn.name, scn.caption)
    for d in scn.directives:
        if opts.static_only and d.kind not in STATIC:
            continue
        if opts.dynamic_only and d.kind in STATIC:
            continue
        try:
            report.findings.append(run_directive(scn, d, opts))
        except (DirectiveError, KeyError, an.AnalysisError) as exc:
            report.findings.append(Finding(d.kind, d.line, d.text, "error", None, False, str(exc)))
    return report


def default_simulations(scn: Scenario, opts: RunOptions) -> Report:
    """Simulate every strategy when a scenario has no simulate directives."""
    report = Report(scn.name, scn.caption)
    mode = opts.mode or "exact"
    for name in scn.strategies:
        d = Directive("simulate", {"strategy": name, "mode": mode}, None, 0, f"simulate strategy={name} mode={mode}")
        f = run_directive(scn, d, opts)
        if f.simulation is not None:
            # without recorded expectations the task's own predicate decides
            f.ok = f.ok and f.simulation.predicate_holds
            f.expected = "task predicate"
        report.findings.append(f)
    return report


__all__ = ["RunOptions", "run_scenario", "run_directive", "simulate", "trace_digest", "default_simulations",
           "DirectiveError"]
