"""Reference values for each public operation, including lightlike and degenerate cases."""
import math

import numpy as np
import pytest

from minkowski_tasks import analyzers as an
from minkowski_tasks import engine as en
from minkowski_tasks import quantum as qm
from minkowski_tasks.catalog import load, source
from minkowski_tasks.geometry import Box, Direction, Kind, Region, causal_relation, find_causal_path, interval, point
from minkowski_tasks.scenario import parse_scenario
from minkowski_tasks.tasks import sample_inputs
from oracles import lattice_reachable

O3 = point(0, 0, 0, 0)
P2 = point(2, 3, 0, 0)
Q0 = point(6, 3, 4, 0)


def test_intervals():
    assert interval(O3, Q0) == 11
    assert interval(O3, O3) == 0
    assert interval(O3, P2) == -5


def test_relations():
    assert causal_relation(O3, P2).kind is Kind.SPACELIKE
    assert causal_relation(O3, P2).direction is Direction.NONE
    r = causal_relation(P2, Q0)
    assert (r.kind, r.direction) == (Kind.LIGHTLIKE, Direction.FUTURE)
    r = causal_relation(O3, O3)
    assert (r.kind, r.direction) == (Kind.LIGHTLIKE, Direction.FUTURE)


@pytest.mark.parametrize("dst,box,expected", [
    ((2, 0), None, True),
    ((2, 0), (0.5, 1.5, -1, 1), False),
    ((4, 0), (1, 2, -0.5, 0.5), True),
])
def test_box_routing(dst, box, expected):
    regions = [] if box is None else [Region("R", (Box(box[:2], (box[2:],)),))]
    assert find_causal_path(point(0, 0), point(*dst), regions).found is expected
    # same answer from the brute-force lattice at a finer step
    assert lattice_reachable((0, 0), dst, [box] if box else [], h=0.25) is expected


def test_basic_states_and_gates():
    zero = qm.make_state(qm.system(a=2), "0")
    assert np.allclose(zero.matrix, np.diag([1, 0]))
    assert np.allclose(qm.apply_unitary(zero, ("a",), qm.X).matrix, np.diag([0, 1]))
    s2 = qm.system(a=2, b=2)
    bell = qm.apply_unitary(qm.apply_unitary(qm.make_state(s2, "00"), ("a",), qm.H), ("a", "b"), qm.CNOT)
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(bell.matrix, np.outer(phi, phi))
    plus = qm.pure(qm.system(a=2), [1, 1])
    assert [o.probability for o in qm.measure(plus, ("a",), np.eye(2))] == pytest.approx([0.5, 0.5])
    assert qm.fidelity(zero, plus) == pytest.approx(0.5)
    assert qm.fidelity(zero, qm.make_state(qm.system(a=2), "1")) == pytest.approx(0.0)


def test_singlet_marginals_are_mixed():
    s = qm.make_state(qm.system(A=2, B=2), "singlet", ("A", "B"))
    for keep in ("A", "B"):
        assert np.allclose(qm.partial_trace(s, (keep,)).matrix, np.eye(2) / 2)


def test_teleport_message_uniform_and_distant_half_mixed():
    psi = qm.haar_vector(2, np.random.default_rng(3))
    full = qm.pure(qm.RegisterSystem(("s", "a", "b"), (2, 2, 2)),
                   np.kron(psi, qm.max_entangled_vector(2, qm.SINGLET_FRAME)))
    branches = qm.teleport_branches(full, "s", "a")
    assert [p for _, p, _ in branches] == pytest.approx([0.25] * 4)
    avg = sum(p * rem.matrix for _, p, rem in branches)
    assert np.allclose(avg, np.eye(2) / 2)


def test_wrong_correction_gives_orthogonal_state():
    zero = qm.make_state(qm.system(b=2), "0")
    assert np.allclose(qm.teleport_correction(2, (0, 0)), np.eye(2))
    wrong = qm.apply_unitary(zero, ("b",), qm.teleport_correction(2, (1, 0)))
    assert qm.fidelity(wrong, zero) == pytest.approx(0.0)


def test_validation_messages():
    with pytest.raises(Exception, match="distribution not normalized"):
        parse_scenario(source("fig2_signalling").replace("values=0,1", "values=0,1 probs=0.5,0.4"))
    with pytest.raises(Exception, match="undeclared dependency"):
        parse_scenario(source("fig2_signalling").replace("value I1 needs I1", "value I1"))


def test_summoning_call_points_within_bound():
    task = load("fig5_summoning").task
    for seed in range(50):
        a = sample_inputs(task, seed)
        assert abs(a.points["I2"].x[0]) <= 10 - 1 + 1e-12
        assert a.points["I2"].t == 9


def test_fidelity_predicate_failure():
    scn = load("fig4_cloning")
    est = en.estimate(scn.task, scn.strategy("forward_one", scn.task))
    assert est.probability < 1 and not est.predicate_holds


def test_teleport_mc_is_certain():
    scn = load("sec33_teleport")
    est = en.estimate(scn.task, scn.strategy("teleport", scn.task), "mc", trials=1000, seed=1)
    assert est.probability == 1.0


def test_routing_verdicts():
    sec = load("sec33_teleport")
    assert an.classical_routing_check(sec.task).feasible
    same = parse_scenario("""\
[points]
P = 1; 2
[inputs]
I = classical @P values=0,1
[outputs]
J = at P value I needs I
""").task
    assert an.classical_routing_check(same).feasible


def test_known_states_may_be_copied():
    text = source("fig4_cloning").replace("prep=haar", "prep=0")
    assert an.clone_demand_check(parse_scenario(text).task).feasible
    text = source("fig4_cloning").replace("quantum @P1 dim=2 prep=haar", "classical @P1 values=0,1")
    text = text.replace("state I1", "value I1 needs I1").split("[strategy")[0]
    assert an.clone_demand_check(parse_scenario(text).task).feasible


def test_summoning_both_calls_and_single_call():
    base = source("sec33_teleport").split("[strategy")[0]
    both = base.replace("J1 = at select(I2==0,Q0,Q1) state I1 needs I2", "J1 = at Q0 state I1\nJ2 = at Q1 state I1")
    v = an.summoning_check(parse_scenario(both).task)
    assert v.status is an.Status.INFEASIBLE
    assert interval(point(6, 3, 4, 0), point(6, 3, -4, 0)) == -64
    single = base.replace("J1 = at select(I2==0,Q0,Q1) state I1 needs I2", "J1 = at Q0 state I1")
    assert an.summoning_check(parse_scenario(single).task).feasible


def test_commitment_degenerate_cases():
    p = point(1, 1)
    assert an.commitment_deducibility(an.OracleInputModel.single(p), p).feasible
    v = an.unveiling_consistency_check(None, [p], p)
    assert v.feasible
    c8 = load("fig8_bc_defeat").task.constants
    model = an.OracleInputModel.redundant([c8["Q1p"], c8["Q2p"]])
    assert not an.commitment_deducibility(model, c8["P1"]).feasible


def test_budget_zero_ledger():
    scn = load("fig11_infocausality")
    task = scn.variant("full")
    quiet = en.Strategy("quiet", (en.Station("C", "@J1"),), {"C": (en.Output(en.Expr("(0, 0)")),)})
    est = en.estimate(task, quiet)
    v = an.budget_audit(task, type("R", (), {"ledger": est.max_ledger})())
    assert v.feasible
    assert all(led["bits"] == 0 for led in est.max_ledger.values())


def test_bell_predicate_bound():
    pred = load("fig3_bell").task.predicate
    assert pred.kind == "probability" and pred.bound == 0.75 and pred.direction == ">"


def test_ledger_equals_message_sum():
    scn = load("fig11_infocausality")
    for name in ("send_x0", "send_both"):
        est = en.estimate(scn.task, scn.strategy(name, scn.task), keep_reports=True, enforce_budgets=False)
        for r in est.reports:
            crossing = sum(m.bits for m in r.messages if "Wall" in m.regions)
            assert r.ledger.get("Wall", {"bits": 0})["bits"] == crossing


def test_adding_a_region_never_opens_a_path():
    import random

    rng = random.Random(5)
    for _ in range(200):
        dst = point(rng.randint(0, 8), rng.randint(-8, 8))
        boxes = [Box((rng.randint(0, 5),) * 1 + (0,), ((0, 1),)) for _ in range(0)]
        t0, x0 = rng.randint(0, 5), rng.randint(-4, 3)
        first = Region("A", (Box((t0, t0 + rng.randint(1, 3)), ((x0, x0 + rng.randint(1, 3)),)),))
        t1, x1 = rng.randint(0, 5), rng.randint(-4, 3)
        second = Region("B", (Box((t1, t1 + rng.randint(1, 3)), ((x1, x1 + rng.randint(1, 3)),)),))
        one = find_causal_path(point(0, 0), dst, [first]).found
        two = find_causal_path(point(0, 0), dst, [first, second]).found
        assert not (two and not one)
        assert not boxes


def test_exact_and_mc_agree_on_catalog():
    from minkowski_tasks.catalog import NAMES

    checked = 0
    for name in NAMES:
        scn = load(name)
        for sname in scn.strategies:
            try:
                strat = scn.strategy(sname, scn.task)
                exact = en.estimate(scn.task, strat)
            except (en.ExecutionError, an.AnalysisError):
                continue
            mc = en.estimate(scn.task, strat, "mc", trials=400, seed=scn.seed)
            assert mc.low - 1e-12 <= exact.probability <= mc.high + 1e-12, (name, sname)
            checked += 1
    assert checked >= 12
