"""Reports: what a scenario run found, rendered as text or as versioned JSON."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

SCHEMA = "minkowski-tasks/report"
SCHEMA_VERSION = 1


def rounded(x: float | None, digits: int = 12) -> float | None:
    """Round to ``digits`` significant figures so renderings are byte-stable."""
    if x is None:
        return None
    return float(f"{float(x):.{digits}g}")


@dataclass
class Simulation:
    strategy: str
    mode: str
    seed: int
    runs: int
    probability: float
    low: float
    high: float
    predicate_holds: bool
    mean_min_fidelity: float | None = None
    ledger: dict[str, dict[str, int]] = field(default_factory=dict)
    messages: int = 0
    trace_events: int = 0
    trace_digest: str = ""
    trace_head: list[str] = field(default_factory=list)
    audit_problems: int = 0


@dataclass
class Finding:
    check: str
    line: int
    directive: str
    observed: str
    expected: str | None
    ok: bool
    detail: str = ""
    value: float | None = None
    simulation: Simulation | None = None


@dataclass
class Report:
    scenario: str
    caption: str = ""
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.findings)


def to_dict(report: Report) -> dict[str, Any]:
    d = asdict(report)
    d["ok"] = report.ok
    return d


def from_dict(d: dict[str, Any]) -> Report:
    findings = []
    for f in d["findings"]:
        f = dict(f)
        sim = f.pop("simulation")
        findings.append(Finding(**f, simulation=Simulation(**sim) if sim else None))
    return Report(d["scenario"], d.get("caption", ""), findings)


def to_machine(reports: list[Report]) -> str:
    doc = {"schema": SCHEMA, "version": SCHEMA_VERSION, "reports": [to_dict(r) for r in reports]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def from_machine(text: str) -> list[Report]:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA:
        raise ValueError("not a report document")
    if doc.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report version {doc.get('version')!r}")
    return [from_dict(r) for r in doc["reports"]]


def _interval(s: Simulation) -> str:
    if s.mode == "exact":
        return f"success = {s.probability:.6f} (exact, {s.runs} branches)"
    return f"success = {s.probability:.6f}, 95% interval [{s.low:.6f}, {s.high:.6f}] over {s.runs} trials"


def to_text(reports: list[Report]) -> str:
    lines = []
    for r in reports:
        lines.append(f"== {r.scenario} ==")
        if r.caption:
            lines.append(f"   {r.caption}")
        for f in r.findings:
            mark = "ok  " if f.ok else "FAIL"
            exp = f" (expected {f.expected})" if f.expected is not None else ""
            lines.append(f"[{mark}] line {f.line}: {f.check}: {f.observed}{exp}")
            if f.detail:
                lines.append(f"       {f.detail}")
            s = f.simulation
            if s is not None:
                lines.append(f"       {s.strategy}: {_interval(s)}")
                if s.mean_min_fidelity is not None:
                    lines.append(f"       mean min fidelity = {s.mean_min_fidelity:.6f}")
                for name, led in sorted(s.ledger.items()):
                    lines.append(f"       region {name}: {led['bits']} bits, {led['qubits']} qubits (max per run)")
                lines.append(f"       trace: {s.trace_events} events, {s.messages} messages, digest {s.trace_digest}, "
                             f"audit {'clean' if s.audit_problems == 0 else str(s.audit_problems) + ' problems'}")
                for t in s.trace_head:
                    lines.append(f"         {t}")
        failed = [f for f in r.findings if not f.ok]
        if failed:
            lines.append(f"   {len(failed)} of {len(r.findings)} checks failed:")
            for f in failed:
                lines.append(f"     line {f.line}: {f.directive}")
        else:
            lines.append(f"   all {len(r.findings)} checks passed")
        lines.append("")
    return "\n".join(lines)
