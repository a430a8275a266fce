import pytest

from minkowski_tasks.catalog import NAMES, load, source
from minkowski_tasks.geometry import point
from minkowski_tasks.scenario import ScenarioError, parse_scenario

MINIMAL = """\
[scenario]
name = mini
dimension = 1

[points]
P = 0; 0
Q = 2; 1

[inputs]
I = classical @P values=0,1

[outputs]
J = at Q value I needs I

[strategy relay]
station A @P
station B @J
A: send I -> B
B: output I
"""


def error_of(text):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    return info.value


def test_minimal_parses():
    scn = parse_scenario(MINIMAL)
    assert scn.name == "mini"
    assert scn.task.constants["Q"] == point(2, 1)
    assert set(scn.strategies) == {"relay"}


def test_empty_file():
    err = error_of("")
    assert (err.line, err.col) == (1, 1)
    assert "missing required section [points]" in str(err)


def test_unknown_section_position():
    err = error_of(MINIMAL + "\n[bogus]\n")
    assert "unknown section [bogus]" in str(err)
    assert err.line == MINIMAL.count("\n") + 2


def test_bad_point_reports_line():
    err = error_of(MINIMAL.replace("Q = 2; 1", "Q = 2; x"))
    assert err.line == 7


def test_undeclared_dependency_is_an_error():
    err = error_of(MINIMAL.replace("needs I", ""))
    assert "undeclared dependency" in str(err)


def test_unknown_statement():
    err = error_of(MINIMAL.replace("B: output I", "B: teleport I"))
    assert (err.line, err.col) == (19, 3)
    assert "unknown statement" in str(err)


def test_wrong_dimension_point():
    err = error_of(MINIMAL.replace("Q = 2; 1", "Q = 2; 1, 0, 0"))
    assert err.line == 7 and "spatial coordinates" in str(err)


@pytest.mark.parametrize("name", NAMES)
def test_catalog_parses(name):
    scn = load(name)
    assert scn.name == name
    assert scn.caption
    assert source(name).startswith("#")


def test_variants_replace_outputs():
    scn = load("fig2_signalling")
    task = scn.variant("spacelike")
    assert [o.name for o in task.outputs] == ["J1"]
    assert task.outputs[0].point.evaluate(task.constants) == point(1, 3)
    with pytest.raises(KeyError):
        scn.variant("nope")
