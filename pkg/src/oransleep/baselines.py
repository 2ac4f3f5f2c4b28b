"""Reference policies: everything-on, and the exhaustive one-step oracle."""

from __future__ import annotations

import numpy as np

from .agents import _EpisodeTally, decode_multi_action
from .environment import SleepModeEnv
from .metrics import EpisodeMetrics
from .scenario import ScenarioConfig

ORACLE_MAX_RUS = 12


def _env_for(scenario: ScenarioConfig, seed: int | None) -> SleepModeEnv:
    # same stream derivation as TrainingLoop so equal seeds share trajectories
    base = scenario.seed if seed is None else seed
    env_ss = np.random.SeedSequence(base).spawn(4)[0]
    return SleepModeEnv(scenario, np.random.default_rng(env_ss))


def baseline_all_on(scenario: ScenarioConfig, seed: int | None = None,
                    episodes: int | None = None) -> list[EpisodeMetrics]:
    """Keep every RU active for whole episodes; the no-sleep reference."""
    env = _env_for(scenario, seed)
    episodes = episodes if episodes is not None else scenario.eval_episodes
    modes = np.ones(scenario.num_rus, dtype=int)
    out_metrics = []
    for ep in range(episodes):
        env.reset()
        tally = _EpisodeTally()
        done = False
        while not done:
            out = env.step(modes)
            tally.add(out.reward, out.power_total_w, out.unsatisfied_count,
                      scenario.num_rus, env.switch_on_count())
            done = out.done
        out_metrics.append(tally.finalize(ep, scenario.num_ues, scenario.num_rus,
                                          scenario.time_step_s))
    return out_metrics


def myopic_best_modes(env: SleepModeEnv, gains: np.ndarray) -> tuple[np.ndarray, float]:
    """Enumerate all 2^M mode vectors against one frozen snapshot and return the
    reward-maximizing one. Ties prefer fewer active RUs, then the lowest bitmap."""
    m = env.cfg.num_rus
    best_modes = None
    best_reward = -np.inf
    best_active = m + 1
    for code in range(2**m):
        modes = decode_multi_action(code, m)
        _, _, reward = env.evaluate_modes(modes, gains)
        active = int(modes.sum())
        if reward > best_reward or (reward == best_reward and active < best_active):
            best_modes, best_reward, best_active = modes, reward, active
    return best_modes, best_reward


def baseline_myopic_oracle(scenario: ScenarioConfig, seed: int | None = None,
                           episodes: int | None = None) -> list[EpisodeMetrics]:
    """Greedy per-slot optimum by exhaustive enumeration; an upper reference for
    one-step reward, blind to future transition costs."""
    if scenario.num_rus > ORACLE_MAX_RUS:
        raise ValueError(
            f"the exhaustive oracle enumerates 2^M vectors and is capped at "
            f"M <= {ORACLE_MAX_RUS}; got M = {scenario.num_rus}"
        )
    env = _env_for(scenario, seed)
    episodes = episodes if episodes is not None else scenario.eval_episodes
    out_metrics = []
    for ep in range(episodes):
        env.reset()
        tally = _EpisodeTally()
        done = False
        while not done:
            gains = env.begin_step()
            modes, _ = myopic_best_modes(env, gains)
            out = env.complete_step(modes, gains)
            tally.add(out.reward, out.power_total_w, out.unsatisfied_count,
                      int(modes.sum()), env.switch_on_count())
            done = out.done
        out_metrics.append(tally.finalize(ep, scenario.num_ues, scenario.num_rus,
                                          scenario.time_step_s))
    return out_metrics
