"""Helpers shared by the unit and acceptance suites."""

from __future__ import annotations

from mdagmi import catalog
from mdagmi.validity import analyze, subsample_verdict


def check_scenario(scenario_id: str) -> list[str]:
    """Differences between ``analyze`` and the scenario's expected verdicts (empty when they agree)."""
    sc = catalog.get(scenario_id)
    exp = sc.expected
    report = analyze(sc.graph)
    problems = []
    if set(report.phi) != set(exp.phi):
        problems.append(f"phi {sorted(report.phi)} != {sorted(exp.phi)}")
    if report.cra.status.value != exp.cra:
        problems.append(f"cra {report.cra.status.value} != {exp.cra}")
    if report.full_mi.status.value != exp.full_mi:
        problems.append(f"full_mi {report.full_mi.status.value} != {exp.full_mi}")
    for q, status in exp.subsamples.items():
        got = subsample_verdict(sc.graph, sorted(q)).verdict.status.value
        if got != status:
            problems.append(f"Q={sorted(q)}: {got} != {status}")
    if report.warning.flag != exp.warning:
        problems.append(f"warning {report.warning.flag} != {exp.warning}")
    if report.any_unbiased != exp.any_valid:
        problems.append(f"any_valid {report.any_unbiased} != {exp.any_valid}")
    return problems
