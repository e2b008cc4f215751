import pytest

from esfreq import analysis, cli, grid

ACCEPTANCE_LINES = []
RECORDED_RUNS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def record_runs():
    """Route every simulation through a recorder so all traces can be audited."""
    original = grid.run_simulation

    def recorder(model, scenario, devices=(), **kw):
        trace = original(model, scenario, devices, **kw)
        RECORDED_RUNS.append((scenario, trace))
        return trace

    mp = pytest.MonkeyPatch()
    for mod in (grid, analysis, cli):
        mp.setattr(mod, "run_simulation", recorder)
    yield RECORDED_RUNS
    mp.undo()
