"""Built-in scenarios with recorded expectations."""
from __future__ import annotations

from importlib import resources

from ..report import Report
from ..runner import RunOptions, run_scenario
from ..scenario import Scenario, parse_scenario

NAMES = (
    "fig2_signalling",
    "fig3_bell",
    "fig4_cloning",
    "fig5_summoning",
    "fig6_bc",
    "fig7_bc_classical",
    "fig8_bc_defeat",
    "fig9_excluded",
    "fig10_relbc_rounds",
    "fig11_infocausality",
    "sec33_teleport",
)


def source(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown catalog scenario {name!r}; choose from {', '.join(NAMES)}")
    return resources.files(__package__).joinpath(f"{name}.scn").read_text(encoding="utf-8")


def load(name: str) -> Scenario:
    return parse_scenario(source(name))


def run_catalog(name: str | None = None, opts: RunOptions | None = None) -> list[Report]:
    """Run one scenario (or all of them) with every declared check."""
    names = NAMES if name in (None, "all") else (name,)
    return [run_scenario(load(n), opts) for n in names]
