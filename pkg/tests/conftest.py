import numpy as np
import pytest

from bwgrape import _pykernels

try:
    from bwgrape import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))

TWO_PI = 2.0 * np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.ATTEMPTED:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.ATTEMPTED):
        ok, detail = mod.RESULTS.get(n, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
