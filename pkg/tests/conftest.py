import numpy as np
import pytest

from ndtsim.ratecalc import NetworkState
from ndtsim.scenario import ScenarioConfig, build_realization, generate


def random_state(realization, rng):
    P_max = realization.P_max
    P_d = rng.uniform(0, 1, realization.n) * P_max
    P_a = rng.uniform(0, 1, realization.n) * (P_max - P_d)
    a = rng.integers(0, 2, realization.n)
    a[~realization.has_relay_candidate] = 1
    return NetworkState(P_d=P_d, P_a=P_a, a=a)


def two_ue_network(g_ded, g_ad, poa=(0, 1), channel=(0, 0), eta_r=1e15, W_d=1e6, W_a=5e5, n_d=1e-3,
                   n_a=5e-4, P_max=1.0):
    """One relay (PoA 0) and the BS (PoA 1)."""
    return build_realization(g_ded, g_ad, poa, channel, W_d, W_a, n_d, n_a, eta_r, P_max)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def default_realization():
    return generate(ScenarioConfig(), 0)
