import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def surface_ground_state():
    from mpstomo.dmrg import DmrgConfig, dmrg_solve
    from mpstomo.hamiltonians import surface_code_mpo

    return dmrg_solve(surface_code_mpo(3, 3), DmrgConfig(chi_max=10)).state


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_LINES

    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
