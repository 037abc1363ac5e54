import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dfrc.model import ArrayConfig, Scenario, Waveform

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_hermitian(rng, n):
    a = crandn(rng, n, n)
    return 0.5 * (a + a.conj().T)


def random_cm(scenario, rng):
    return Waveform(rng.uniform(-np.pi, np.pi, scenario.n_x), scenario.n_tx, scenario.code_length,
                    scenario.total_energy)


def small_scenario(n_tx=3, n_rx=2, L=4, interferers=((-40.0, 1000.0), (35.0, 100.0)), energy=5.0):
    return Scenario(array=ArrayConfig(n_tx, n_rx), interferers=interferers, code_length=L,
                    total_energy=energy)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting ---------------------------------------------------
# Acceptance tests call ``record``; the terminal summary prints one PASS/FAIL
# line per criterion so the verdicts appear in plain ``pytest -v`` output.

ACCEPTANCE: dict = {}


def record(criterion: int, title: str, label: str, ok: bool, detail: str = "") -> bool:
    entry = ACCEPTANCE.setdefault(criterion, {"title": title, "checks": []})
    entry["checks"].append((label, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'} [{criterion}] {label}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[crit]
        ok = all(c[1] for c in entry["checks"])
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {entry['title']}")
        for label, good, detail in entry["checks"]:
            terminalreporter.write_line(f"    {'ok  ' if good else 'FAIL'} {label}: {detail}")
