import math

import numpy as np
import pytest

from cisum.signals import Cisoid, CisoidEnsemble


def make_ensemble(freqs_cycles, amps, phases, ts=1.0) -> CisoidEnsemble:
    """Ensemble from normalized frequencies in cycles per sample."""
    comps = tuple(
        Cisoid(amplitude=a, omega=2.0 * math.pi * f / ts, phase=p)
        for f, a, p in zip(freqs_cycles, amps, phases))
    return CisoidEnsemble(comps, ts)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_test_ensemble(rng, k=None, ts=1.0) -> CisoidEnsemble:
    """Well-separated random ensemble for oracle tests (K <= 12)."""
    k = k if k is not None else int(rng.integers(1, 13))
    freqs = np.sort(rng.uniform(0.05, 0.45, size=k))
    while k > 1 and np.min(np.diff(freqs)) < 0.01:
        freqs = np.sort(rng.uniform(0.05, 0.45, size=k))
    amps = np.exp(rng.normal(0.0, 0.8, size=k))
    phases = rng.uniform(-math.pi, math.pi, size=k)
    return make_ensemble(freqs, amps, phases, ts)
