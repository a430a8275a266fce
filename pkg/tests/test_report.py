import json

import pytest

from minkowski_tasks.report import SCHEMA, SCHEMA_VERSION, Finding, Report, from_machine, rounded, to_machine, to_text
from minkowski_tasks.runner import RunOptions, run_scenario
from minkowski_tasks.catalog import load


@pytest.fixture(scope="module")
def bell_report():
    return run_scenario(load("fig3_bell"), RunOptions())


def test_machine_roundtrip(bell_report):
    text = to_machine([bell_report])
    back = from_machine(text)
    assert to_machine(back) == text


def test_machine_header(bell_report):
    data = json.loads(to_machine([bell_report]))
    assert data["schema"] == SCHEMA and data["version"] == SCHEMA_VERSION


def test_from_machine_rejects_other_schema():
    with pytest.raises(ValueError):
        from_machine(json.dumps({"schema": "other", "version": 1, "reports": []}))


def test_text_shows_probability_and_interval(bell_report):
    text = to_text([bell_report])
    assert "success = 0.853553" in text
    assert "interval" in text
    assert "all 6 checks passed" in text


def test_text_failure_table():
    rep = Report("demo", "", [Finding("simulate", 3, "simulate strategy=x expect=1", "0.5", "1", False, "")])
    text = to_text([rep])
    assert "FAIL" in text and "line 3" in text


def test_rounding():
    assert rounded(0.1 + 0.2) == 0.3
    assert rounded(None) is None
    assert rounded(1 / 3) == pytest.approx(1 / 3, rel=1e-11)
