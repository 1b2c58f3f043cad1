import os
import re

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = {}
_DETAILS = {}
_CRITERION = re.compile(r"test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None or (report.when != "call" and report.outcome == "passed"):
        return
    n = int(m.group(1))
    _ACCEPTANCE[n] = _ACCEPTANCE.get(n, True) and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if _ACCEPTANCE[n] else 'FAIL'}")
        for line in _DETAILS.get(n, []):
            terminalreporter.write_line(f"    {line}")


@pytest.fixture
def measured(request):
    """``measured("text")`` attaches a measured value to the criterion's summary line."""
    m = _CRITERION.search(request.node.nodeid)
    n = int(m.group(1)) if m else 0

    def log(text):
        _DETAILS.setdefault(n, []).append(text)

    return log


@pytest.fixture
def cfg_dir(tmp_path):
    """Potential and coefficient files used by the CLI tests."""
    files = {
        "zero.toml": 'harmonics = []\nn_max = 0\n[schedule]\nkind = "geometric"\nrho = 8\n',
        "sin8.toml": 'harmonics = [[1, 0.0, 1.0]]\nn_max = 1\n[schedule]\nkind = "geometric"\nrho = 8\n',
        "sin81.toml": ('harmonics = [[1, 0.0, 1.0], [81, 0.0, -1.0]]\nn_max = 0\n'
                       '[schedule]\nkind = "geometric"\nrho = 81\n'),
        "lam.toml": 'kind = "trig"\nconstant = 2.0\nharmonics = [[1, 0.0, 0.5]]\n',
        "mu.toml": 'kind = "piecewise"\nvalues = [1.0, 2.0, 1.5]\n',
    }
    for name, text in files.items():
        (tmp_path / name).write_text(text)
    return tmp_path
