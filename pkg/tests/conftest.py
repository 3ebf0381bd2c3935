import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pgft_route import PgftSpec, build_pgft  # noqa: E402
from helpers import fig2_topology, fig3_topology, fig4_topology  # noqa: E402

FIG1 = "3;2.2.3;1.2.2;1.2.1"


@pytest.fixture
def fig1():
    return build_pgft(PgftSpec.parse(FIG1))


@pytest.fixture
def fig2():
    return fig2_topology()


@pytest.fixture
def fig3():
    return fig3_topology()


@pytest.fixture
def fig4():
    return fig4_topology()


# one line per acceptance criterion, filled in by test_acceptance.py
CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record PASS/FAIL for the acceptance criterion named by the test."""
    num = int(request.node.name.split("_")[1])
    title = request.node.function.__doc__.strip().splitlines()[0]
    yield
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed and CRITERIA.get(num, ("PASS",))[0] == "PASS"
    CRITERIA[num] = ("PASS" if ok else "FAIL", title)


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        status, title = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {title}")
