import pytest

from edaflow.agent import Orchestrator, SessionStore
from edaflow.executor import ExecutionBackend
from edaflow.services import StageServices

EXAMPLE_PROMPT = (
    'Synthesize design "b14" on FreePDK45 with fanout limit 4.74. Then run placement with high '
    "level of effort for timing driven global placer and medium wire length optimization effort level."
)


@pytest.fixture
def services(tmp_path):
    return StageServices(tmp_path / "ws", ExecutionBackend())


@pytest.fixture
def orchestrator(services, tmp_path):
    return Orchestrator(services, SessionStore(tmp_path / "sessions"))


@pytest.fixture
def through_cts(services):
    """A b14 workspace with synthesis, placement and CTS done."""
    services.run_synthesis({"design": "b14"})
    services.run_placement({"design": "b14", "syn_ver": "v1"})
    services.run_cts({"design": "b14", "impl_ver": "v1__g0__p0"})
    return services


# -- acceptance reporting --------------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, title = mark.args
    failed = call.excinfo is not None
    if failed or call.when == "call":
        prev = _ACCEPTANCE.get(number, (title, True))[1]
        _ACCEPTANCE[number] = (title, prev and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
