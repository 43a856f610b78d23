import pytest

from sar_adapt.mdp import RewardParams
from sar_adapt.usersim import default_model


@pytest.fixture(scope="session")
def healthy():
    return default_model("healthy")


@pytest.fixture(scope="session")
def mci():
    return default_model("mci")


@pytest.fixture(scope="session")
def reward():
    return RewardParams()


ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (passed, detail) before asserting."""
    name = request.node.name

    def record(passed: bool, detail: str) -> bool:
        ACCEPTANCE_RESULTS[name] = (passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in sorted(ACCEPTANCE_RESULTS.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
