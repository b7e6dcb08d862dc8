import pytest

from rare_reach.cumulant import LevyModel, NormalLaw, TwoPointLaw, brownian
from rare_reach.paths import SimConfig


@pytest.fixture(scope="session")
def levy_example() -> LevyModel:
    """Two-sided exponential-jump process whose constants are known exactly:
    lambda* = 2, psi'(2) = 8/3, tilted parameters (4, 2, 1, 3)."""
    return LevyModel(
        drift_mu=1.0,
        sigma=1.0,
        pos_rate=2.0,
        pos_jump_rate=4.0,
        neg_rate=3.0,
        neg_jump_rate=1.0,
    )


@pytest.fixture(scope="session")
def walk45() -> TwoPointLaw:
    return TwoPointLaw(0.45)


@pytest.fixture(scope="session")
def normal02() -> NormalLaw:
    return NormalLaw(mean_step=-0.2, var_step=1.0)


@pytest.fixture(scope="session")
def brownian02() -> LevyModel:
    return brownian(0.2)


@pytest.fixture()
def cfg() -> SimConfig:
    return SimConfig(master_seed=0, dt=0.01)


@pytest.fixture()
def cfg_fast() -> SimConfig:
    """Coarser sub-steps; hit probabilities stay exact thanks to the bridge."""
    return SimConfig(master_seed=0, dt=0.05)
