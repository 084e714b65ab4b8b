import numpy as np
import pytest

from hemsim.env import HomeConfig
from hemsim.traces import SyntheticTraceSpec, TraceSet, gen_synthetic


@pytest.fixture(scope="session")
def home() -> HomeConfig:
    return HomeConfig()


@pytest.fixture(scope="session")
def hot_trace() -> TraceSet:
    """Two noiseless summer days: hot afternoons, evening demand peak, TOU price."""
    return gen_synthetic(SyntheticTraceSpec(days=2, seed=5))


@pytest.fixture(scope="session")
def mild_trace() -> TraceSet:
    """Three days with outdoor temperature inside the comfort band, so comfort
    is free and costs come only from demand, solar, and storage choices."""
    return gen_synthetic(SyntheticTraceSpec(
        days=3, solar_peak_kw=1.5, demand_base_kw=0.8, demand_peak_kw=2.5,
        outdoor_mean_f=70.0, outdoor_amplitude_f=3.0, seed=9))


def flat_trace(n_days=1, demand=0.0, solar=0.0, outdoor=70.0, price=0.1) -> TraceSet:
    """Constant-valued trace for hand-computed scenarios."""
    n = 24 * n_days
    return TraceSet(np.full(n, solar), np.full(n, demand), np.full(n, outdoor), np.full(n, price))
