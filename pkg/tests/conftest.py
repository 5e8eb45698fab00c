import numpy as np
import pytest

from isac_ee.model import ScenarioConfig, scenario_channels


@pytest.fixture(scope="session")
def table1():
    return ScenarioConfig.table1()


@pytest.fixture(scope="session")
def table1_channels(table1):
    return scenario_channels(table1)


@pytest.fixture(scope="session")
def table1_result(table1):
    from isac_ee.pipeline import solve_scenario

    return solve_scenario(table1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    return scale * (g @ g.conj().T) / rank


def small_scenario(rng, n=4, k=2, m=1, **kw):
    """Random small instance with generous power so the thresholds are reachable."""
    users = rng.uniform(-70, 70, size=k)
    targets = rng.uniform(-70, 70, size=m)
    base = dict(
        num_antennas=n, num_users=k, num_targets=m, user_aods=users, target_angles=targets,
        pathloss_db=rng.uniform(-100, -95, size=k), noise_power=1e-11, sinr_thresholds=10 ** 0.3,
        beampattern_thresholds=10 ** (-1.5), p_max=1.0, p_c=10 ** -0.5, amplifier_efficiency=0.35,
        dynamic_power_coeff=10 ** -5.6,
    )
    base.update(kw)
    return ScenarioConfig(**base)
