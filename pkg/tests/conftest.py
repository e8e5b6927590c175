import pytest

from noisecool.params import desk_params, load_cfg, paper_params

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def paper():
    return paper_params()


@pytest.fixture(scope="session")
def desk():
    return desk_params()


@pytest.fixture(scope="session")
def desk_cfg():
    return load_cfg("desk")


@pytest.fixture
def record_criterion():
    def record(number, name, passed, detail):
        line = f"CRITERION {number:>2} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

