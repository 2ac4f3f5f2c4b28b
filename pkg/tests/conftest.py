"""Shared test fixtures: small scenarios sized so the whole suite stays fast."""

import numpy as np
import pytest

from oransleep.scenario import AgentParams, ScenarioConfig


def small_agent_params(**overrides) -> AgentParams:
    """Tiny networks and batches for unit tests that exercise learning code paths."""
    base = dict(
        hidden_layers=(16, 16),
        dqn_hidden_layers=(16, 16),
        batch_size=8,
        buffer_capacity=256,
    )
    base.update(overrides)
    return AgentParams(**base)


def tiny_scenario(**overrides) -> ScenarioConfig:
    """M=2, K=4 high-SNR instance with short episodes; the unit-test workhorse."""
    base = dict(
        name="tiny",
        num_rus=2,
        num_ues=4,
        area_side_m=200.0,
        episode_length=20,
        episodes=5,
        eval_episodes=2,
        seed=7,
        agent=small_agent_params(),
    )
    base.update(overrides)
    return ScenarioConfig.build(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(123)


@pytest.fixture
def tiny_cfg():
    return tiny_scenario()
