"""Shared test configuration.

Property-based tests exercise numpy-heavy code whose first call pays a
compilation/caching cost, so the suite-wide hypothesis profile disables the
per-example deadline rather than sprinkling overrides.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
