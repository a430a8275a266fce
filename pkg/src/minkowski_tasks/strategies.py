"""Strategies generated from a task rather than written by hand."""
from __future__ import annotations

from .analyzers import AnalysisError, summoning_check
from .engine import (
    Broadcast,
    If,
    Output,
    Pair,
    Send,
    SendQ,
    Station,
    Strategy,
    TeleportReceive,
    TeleportSend,
)
from .expr import Expr
from .tasks import TaskSpec


def generic_teleport(task: TaskSpec, resolution: int = 64) -> Strategy:
    """Teleport the unknown state and let the call steer the entangled partner.

    The state is teleported where it arrives and the two classical dits are
    broadcast.  The partner register waits at the meeting point from the
    summoning routing table, where every call arrives; it is then sent to the
    called return point and corrected there.
    """
    verdict = summoning_check(task, resolution)
    if not verdict.feasible:
        raise AnalysisError(f"no teleportation routing: {verdict.rationale}")
    q = verdict.witness["state"]
    routes = verdict.witness["routes"]
    m = routes[0].meeting_point
    outs = [o for o in task.outputs if o.kind == "quantum" and o.state_of == q]
    if len(outs) != 1:
        raise AnalysisError("generic teleport handles a single quantum return")
    out = outs[0]
    dim = task.input(q).payload.dim
    # call stations come first: coincident stations act in declaration order
    stations = [Station("STATE", f"@{q}")]
    programs = {
        "STATE": (TeleportSend(q, "tp_a", "tp_msg"), Broadcast("tp_msg")),
        "MEET": (SendQ("tp_b", "RETURN", via=("auto",) if task.regions else ()),),
        "RETURN": (If(None, TeleportReceive("tp_b", "tp_msg"), have="tp_b"),
                   If(None, Output(Expr("tp_b")), have="tp_b")),
    }
    for k, name in enumerate(sorted(out.deps)):
        st = f"CALL{k}"
        stations.append(Station(st, f"@{name}"))
        via = ("auto",) if task.regions else ()
        programs[st] = (Send(Expr(name), "MEET", name, via=via),)
    stations.append(Station("MEET", m))
    stations.append(Station("RETURN", f"@{out.name}"))
    return Strategy(
        "generic_teleport",
        tuple(stations),
        programs,
        pairs=(Pair(("tp_a", "tp_b"), ("STATE", "MEET"), "maxent", dim),),
        notes=f"meeting point {m}",
    )


BUILTIN = {"generic_teleport": generic_teleport}
