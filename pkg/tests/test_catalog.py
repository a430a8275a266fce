import json
import os
from pathlib import Path

import pytest

from minkowski_tasks.catalog import NAMES
from minkowski_tasks.report import to_machine

GOLDEN = Path(__file__).parent / "golden"


def test_catalog_all_checks_pass_within_a_minute(catalog_run):
    reports, elapsed = catalog_run
    assert [r.scenario for r in reports] == list(NAMES)
    failed = [(r.scenario, f.line, f.observed, f.expected) for r in reports for f in r.findings if not f.ok]
    assert failed == []
    assert elapsed < 60


@pytest.mark.parametrize("name", NAMES)
def test_golden_report(catalog_run, name):
    reports, _ = catalog_run
    report = next(r for r in reports if r.scenario == name)
    text = to_machine([report])
    path = GOLDEN / f"{name}.json"
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(text, encoding="utf-8")
    assert json.loads(text) == json.loads(path.read_text(encoding="utf-8"))
