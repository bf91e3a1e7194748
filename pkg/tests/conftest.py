"""Shared fixtures and the per-criterion PASS/FAIL summary."""

from collections import defaultdict

import pytest

_OUTCOMES: dict[int, list[bool]] = defaultdict(list)

TITLES = {
    1: "bulk refractive indices",
    2: "mode solver against slab oracle, grid convergence",
    3: "TM0/TE2 degeneracy",
    4: "poling periods",
    5: "coupling coefficients",
    6: "Schmidt engine and Schmidt numbers",
    7: "marginal spectra",
    8: "JSA normalization and coupled amplitudes",
    9: "brightness",
    10: "report determinism",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _OUTCOMES[mark.args[0]].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        ok = all(_OUTCOMES[n])
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:2d}: {TITLES.get(n, '')}")
