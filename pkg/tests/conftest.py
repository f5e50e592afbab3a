import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def peakon_state():
    """c = 1 peakon on 400 alpha nodes."""
    from chpeakon.scenarios import initial_state, make_peakon

    return initial_state(make_peakon(1.0, n_nodes=2**14 + 1), 400, 5.0)


@pytest.fixture(scope="session")
def pair_state():
    from chpeakon.scenarios import initial_state, make_peakon_antipeakon

    return initial_state(make_peakon_antipeakon(1.0, 5.0, n_nodes=2**14 + 1), 400, 5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
