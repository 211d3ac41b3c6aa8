import json
import pathlib
import sys
from importlib import resources

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from biharm import shooting  # noqa: E402
from biharm.radial_ode import IntegratorControls  # noqa: E402

REGIME = IntegratorControls(r_target=1e10)


@pytest.fixture(scope="session")
def golden():
    return json.loads(resources.files("biharm").joinpath("golden.json").read_text())


_certs = {}


def regime_certificate(q):
    """Threshold bracket at the regime horizon, cached per q."""
    if q not in _certs:
        _certs[q] = shooting.find_beta_star(q, None, 1e-14, REGIME)
    return _certs[q]


@pytest.fixture(scope="session")
def cert_at():
    return regime_certificate


_acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: (int("".join(c for c in s.split()[2] if c.isdigit())), s)):
            terminalreporter.write_line(line)
