from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def within_se(value: float, target: float, se: float, k: float = 3.0) -> bool:
    return abs(value - target) <= k * se


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ensemble_half_integral(sampler, prefactor, grid, lo, hi, dc, n_paths, seed):
    """``int_lo^hi E[w_{1/2} | c] p(c) dc`` from one weighted ensemble per ``c``.

    ``p(c) E[w_{1/2} | c]`` is ``prefactor`` times the mean over all proposals
    of ``weight * w_{1/2}``; dropped proposals contribute zeros.
    """
    from brownian_average.paths import RngStream

    cs = np.linspace(lo, hi, int(round((hi - lo) / dc)) + 1)
    trap = np.full(cs.size, hi - lo) / (cs.size - 1)
    trap[[0, -1]] /= 2
    total, var = 0.0, 0.0
    for i, c in enumerate(cs):
        ens = sampler(c, n_paths, grid, RngStream(seed).spawn(i))
        raw = np.zeros(ens.n_proposals)
        raw[: len(ens)] = ens.weights * ens.normalizer * ens.n_proposals * ens.paths.at(0.5)
        m, se = mean_se(raw)
        total += trap[i] * prefactor * m
        var += (trap[i] * prefactor * se) ** 2
    return total, math.sqrt(var)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
