from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import pytest

from exprag.synth import BenchmarkSpec, generate_benchmark

_criteria: dict[int, dict] = defaultdict(lambda: {"title": "", "outcomes": []})


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _criteria[number]
    entry["title"] = title
    entry["outcomes"].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        outs = entry["outcomes"]
        if any(o == "failed" for o in outs):
            verdict = "FAIL"
        elif outs and all(o == "skipped" for o in outs):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {entry['title']} ({len(outs)} checks)")


@pytest.fixture(scope="session")
def bench_dir(tmp_path_factory) -> Path:
    """Default-seed synthetic benchmark, generated once per session."""
    out = tmp_path_factory.mktemp("bench")
    generate_benchmark(BenchmarkSpec(), out, evaluate=False)
    return out


@pytest.fixture(scope="session")
def bench_datasets(bench_dir):
    from exprag.harness import load_dataset_dir
    from exprag.synth import TASKS

    return [load_dataset_dir(bench_dir / t) for t in TASKS]
