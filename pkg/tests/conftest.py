import math

import numpy as np
import pytest

from orbfbl.channel import BpskAwgnChannel, DensityChannel


def _gauss(mean, sd):
    c = 1.0 / (sd * math.sqrt(2.0 * math.pi))
    return lambda y: c * np.exp(-0.5 * ((np.asarray(y, dtype=float) - mean) / sd) ** 2)


def gaussian_density_channel(sd_plus, sd_minus, name="gauss"):
    """Binary-input Gaussian channel with per-input noise levels, through the generic path."""

    def sampler(x, rng):
        z = rng.standard_normal(np.shape(x))
        return np.where(x > 0, 1.0 + sd_plus * z, -1.0 + sd_minus * z)

    lo = min(-1.0 - 9.0 * sd_minus, 1.0 - 9.0 * sd_plus)
    hi = max(1.0 + 9.0 * sd_plus, -1.0 + 9.0 * sd_minus)
    return DensityChannel(_gauss(1.0, sd_plus), _gauss(-1.0, sd_minus), (lo, hi), sampler, name)


@pytest.fixture(scope="session")
def awgn0():
    return BpskAwgnChannel(0.0)


@pytest.fixture(scope="session")
def asym_channel():
    return gaussian_density_channel(0.6, 1.3, "asym")


# -- acceptance summary -------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and item.name.startswith("test_criterion_"):
        if report.when == "call" or (report.when == "setup" and report.failed):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _ACCEPTANCE[item.name] = (report.outcome, doc)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        outcome, doc = _ACCEPTANCE[name]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {name.split('_')[2]}: {status}  {doc}")
