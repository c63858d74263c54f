"""Shared fixtures plus the acceptance-gate terminal summary."""

import itertools

import pytest

from medlink.kg import load_graph

_gate_results = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.rsplit("::", 1)[-1]
        _gate_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    if not _gate_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _gate_results:
        label = name.removeprefix("test_").replace("_", " ")
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{label}: {status}")


@pytest.fixture
def graph_factory(tmp_path):
    """Build a ConceptGraph from {sctid: [labels]} plus edge pairs."""
    counter = itertools.count()

    def build(concepts, edges=(), tag="finding"):
        d = tmp_path / f"graph{next(counter)}"
        d.mkdir()
        cpath = d / "concepts.tsv"
        epath = d / "edges.tsv"
        with open(cpath, "w", encoding="utf-8") as fh:
            for sctid, labels in concepts.items():
                fh.write(f"{sctid}\t{'|'.join(labels)}\t{tag}\n")
        with open(epath, "w", encoding="utf-8") as fh:
            for child, parent in edges:
                fh.write(f"{child}\t{parent}\n")
        return load_graph(cpath, epath)

    return build
