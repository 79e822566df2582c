from dataclasses import replace

import pytest

from mho.scenario import (
    ScenarioConfig,
    derive_seeds,
    sample_initial_states,
    simulate_plant,
)


def tiny_config(**overrides):
    """Short-window, short-run study configuration for fast tests."""
    base = dict(N=40, N_sim=260, N_s=3, master_seed=908172)
    base.update(overrides)
    return replace(ScenarioConfig(), **base)


@pytest.fixture(scope="session")
def tiny_plant():
    cfg = tiny_config()
    _, plant_seeds = derive_seeds(cfg.master_seed, cfg.N_s)
    return cfg, simulate_plant(cfg, plant_seeds[0])


@pytest.fixture(scope="session")
def tiny_starts():
    cfg = tiny_config()
    init_seed, _ = derive_seeds(cfg.master_seed, cfg.N_s)
    return sample_initial_states(cfg, init_seed)
