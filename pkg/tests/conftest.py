import math

import pytest
from hypothesis import settings

from shockcert.model import burgers

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

INF = math.inf

# four nearly non-decreasing pieces, three down-jumps
EXP1 = [
    (-INF, 0.25, "const", [3.0]),
    (0.25, 0.5, "affine", [1.0, 2.0]),
    (0.5, 0.625, "affine", [0.0, 1.0]),
    (0.625, INF, "const", [0.0]),
]
EXP1_T = 0.3

# one rapidly decreasing piece between nearly non-decreasing neighbours
EXP2 = [
    (-INF, 0.2, "const", [2.5]),
    (0.2, 0.4, "affine", [3.5, -5.0]),
    (0.4, 0.625, "affine", [1.1, 1.0]),
    (0.625, INF, "const", [0.0]),
]
EXP2_T = 0.22


@pytest.fixture(scope="session")
def model():
    return burgers(4.0)


# one line per acceptance check, printed in the terminal summary
VERDICTS = []


def verdict(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    VERDICTS.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
