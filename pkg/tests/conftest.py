import numpy as np
import pytest

from suploc import RngSpec, SawtoothCombParams, build_sawtooth_comb, build_triangle

_ACCEPTANCE = []


def record_acceptance(criterion, name, passed, detail=""):
    line = f"criterion {criterion:>2} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    _ACCEPTANCE.append((criterion, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return RngSpec(12345)


@pytest.fixture
def np_rng():
    return np.random.default_rng(2024)


def comb_params_small():
    return SawtoothCombParams(t=1.0, T=2.0, tau=1.5, r=1.2, k=5, R=500.0)


def comb_params_prop41():
    return SawtoothCombParams(t=1.0, T=3.0, tau=1.05, r=1.02, k=200)


# (label, waveform, T) for every shipped phase-shift configuration
def shipped_waveforms():
    return [
        ("triangle-1", build_triangle(1.0), 2.0),
        ("triangle-T", build_triangle(2.0), 2.0),
        ("sawtooth-k5", build_sawtooth_comb(comb_params_small()), 2.0),
        ("sawtooth-k200", build_sawtooth_comb(comb_params_prop41()), 3.0),
    ]
