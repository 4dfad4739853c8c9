import os

# the thread-count determinism check needs more than one numba worker available
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from phasetomo.potential import PhysicalParams, Potential1D, synth_paper_corrugation

_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}

TITLES = {
    1: "kernel branches and K(0)",
    2: "13-angle FBP round trip",
    3: "harmonic null test",
    4: "period perturbation theory",
    5: "angular dispersion",
    6: "collision robustness",
    7: "time-of-flight stretch",
    8: "Wigner reconstruction",
    9: "squeezing",
    10: "wire corrugation",
    11: "determinism",
}


@pytest.fixture
def record():
    """Record one sub-check of an acceptance criterion for the summary table."""

    def _record(criterion: int, name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((name, bool(ok), detail))
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[c]
        ok = all(o for _, o, _ in checks)
        tr.write_line(f"criterion {c:2d} {'PASS' if ok else 'FAIL'}  {TITLES.get(c, '')}")
        for name, o, detail in checks:
            tr.write_line(f"    [{'ok' if o else 'FAIL'}] {name}: {detail}")


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def harmonic(params):
    return Potential1D(params)


@pytest.fixture(scope="session")
def corrugated(params):
    return Potential1D(params, corrugation=synth_paper_corrugation())


@pytest.fixture(scope="session")
def E_shift(params):
    return 0.5 * params.mass * params.omega0**2 * (85e-6) ** 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
