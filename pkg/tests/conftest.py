"""Shared fixtures and hypothesis configuration."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from agmn.graph import build_schedule, default_hand_tree
from agmn.oracle import random_potentials

# Property tests build numpy arrays inside the test body; the default deadline
# flags the first (compilation-warm) example as slow, so it is disabled. The
# fixture check is off because the only fixture shared across examples is
# tmp_path, and those tests write one file per generated seed.
settings.register_profile(
    "agmn",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("agmn")


@pytest.fixture(scope="session")
def hand_tree():
    return default_hand_tree()


@pytest.fixture(scope="session")
def hand_schedule(hand_tree):
    return build_schedule(hand_tree)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture(scope="session")
def small_instance():
    # 3-node chain on a 4x4 grid: big enough to exercise every code path,
    # small enough that the brute-force oracle is instant.
    return random_potentials(seed=7, n=3, grid_size=4, kernel_size=3)
