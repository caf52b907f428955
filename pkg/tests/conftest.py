import sys

import pytest

from pdnet.cli import bench_dir
from pdnet.program import parse
from pdnet.translate import translate, translate_block

BENCH = bench_dir()
BENCH_NAMES = ["fib", "lamport", "dekker", "szymanski", "peterson",
               "sync", "datarace", "rwlock", "varmutex", "lazy"]


def bench_source(name):
    return (BENCH / f"{name}.cpl").read_text()


def bench_formula(name, k):
    return (BENCH / f"{name}.psi{k}.ltl").read_text().strip()


@pytest.fixture
def motivating():
    return parse(bench_source("motivating"))


@pytest.fixture
def motivating_net(motivating):
    return translate(motivating)


@pytest.fixture
def fragment_net():
    return translate_block(parse(bench_source("fragment")))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
