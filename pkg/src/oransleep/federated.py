"""Federated training: regional loops, weighted parameter averaging, distribution.

The only payload crossing the aggregation boundary is flat parameter vectors
(plus batch-norm running stats, which ride alongside). Online and target
networks in every region are overwritten with the global model after each round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import TrainingLoop, build_agent
from .metrics import EpisodeMetrics
from .nn import save_checkpoint
from .scenario import FederatedParams, ScenarioConfig


def fedavg(vectors, weights=None) -> np.ndarray:
    """Weighted elementwise average sum(w_j p_j) / sum(w_j) of flat parameter vectors."""
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if not vecs:
        raise ValueError("fedavg needs at least one vector")
    length = vecs[0].shape
    if any(v.shape != length for v in vecs):
        raise ValueError("fedavg requires equally sized vectors")
    if weights is None:
        w = np.ones(len(vecs))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(vecs),):
            raise ValueError("need exactly one weight per vector")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with a positive sum")
    stacked = np.stack(vecs, axis=0)
    return (w[:, None] * stacked).sum(axis=0) / w.sum()


@dataclass
class GlobalModel:
    """Aggregated parameters by network name, with a strictly increasing version."""

    params: dict[str, np.ndarray]
    bn_stats: dict[str, np.ndarray]
    version: int


@dataclass
class FederatedResult:
    region_metrics: list[list[EpisodeMetrics]]
    mean_rewards: np.ndarray  # per episode, averaged across regions
    rounds: int
    final_model: GlobalModel


class FederatedTrainer:
    """Runs R regional loops in lockstep and periodically averages their models.

    Aggregation happens at episode boundaries every `aggregation_interval`
    episodes (or every that many global steps with granularity 'steps'). Regions
    execute sequentially; results are schedule-independent because nothing is
    shared between aggregation barriers.
    """

    def __init__(self, scenario: ScenarioConfig, seed: int | None = None,
                 episodes: int | None = None, agent_kind: str | None = None,
                 exchange_dir=None, region_seeds: list | None = None):
        scenario = scenario.validate()
        if scenario.federated is None and scenario.layout != "composite_1000":
            raise ValueError(
                "federated training requires a composite layout or a federated block "
                "in the scenario config"
            )
        self.scenario = scenario
        self.fed: FederatedParams = scenario.federated or FederatedParams()
        region_cfgs = scenario.region_scenarios()
        if self.fed.weights is not None and len(self.fed.weights) != len(region_cfgs):
            raise ValueError("federated.weights length must match the region count")
        base_seed = scenario.seed if seed is None else seed
        if region_seeds is None:
            region_seeds = list(np.random.SeedSequence(base_seed).spawn(len(region_cfgs)))
        if len(region_seeds) != len(region_cfgs):
            raise ValueError("need one seed per region")
        self.episodes = episodes if episodes is not None else scenario.episodes
        self.regions = [
            TrainingLoop(cfg, seed=rs, episodes=self.episodes, agent_kind=agent_kind)
            for cfg, rs in zip(region_cfgs, region_seeds)
        ]
        self.exchange_dir = Path(exchange_dir) if exchange_dir is not None else None
        self.version = 0
        self.global_model: GlobalModel | None = None
        self._weights = None if self.fed.weights is None else np.asarray(self.fed.weights, float)
        self._global_step = 0

    # ---- aggregation ----------------------------------------------------------

    def _collect(self) -> tuple[dict[str, list[np.ndarray]], dict[str, list[np.ndarray]]]:
        params: dict[str, list[np.ndarray]] = {}
        stats: dict[str, list[np.ndarray]] = {}
        for region in self.regions:
            for name, net in region.agent.networks().items():
                params.setdefault(name, []).append(net.get_flat_params())
                stats.setdefault(name, []).append(net.get_bn_stats())
        return params, stats

    def _average(self) -> GlobalModel:
        params, stats = self._collect()
        avg_params = {name: fedavg(vecs, self._weights) for name, vecs in params.items()}
        avg_stats = {}
        for name, vecs in stats.items():
            if vecs[0].size == 0:
                avg_stats[name] = np.empty(0)
            elif self.fed.include_bn_stats:
                avg_stats[name] = fedavg(vecs, self._weights)
            else:
                avg_stats[name] = vecs[0].copy()  # stats stay local; keep a reference copy
        return GlobalModel(params=avg_params, bn_stats=avg_stats, version=self.version + 1)

    def aggregate_and_distribute(self) -> GlobalModel:
        """One federated round: average every network, overwrite online and target
        copies in all regions with the result."""
        model = self._average()
        self.version = model.version
        self.global_model = model
        for region in self.regions:
            self._install(region, model)
            if self.fed.reset_optimizers:
                for name, opt in region.agent.optimizers().items():
                    opt.m[:] = 0.0
                    opt.v[:] = 0.0
                    opt.t = 0
        if self.exchange_dir is not None:
            self._write_round(model)
        return model

    def _install(self, region: TrainingLoop, model: GlobalModel) -> None:
        for name, net in region.agent.networks().items():
            net.set_flat_params(model.params[name].copy())
            if model.bn_stats[name].size and self.fed.include_bn_stats:
                net.set_bn_stats(model.bn_stats[name].copy())
        for name, net in region.agent.target_networks().items():
            net.set_flat_params(model.params[name].copy())
            if model.bn_stats[name].size and self.fed.include_bn_stats:
                net.set_bn_stats(model.bn_stats[name].copy())

    def _write_round(self, model: GlobalModel) -> None:
        round_dir = self.exchange_dir / f"round_{model.version}"
        round_dir.mkdir(parents=True, exist_ok=True)
        for j, region in enumerate(self.regions):
            save_checkpoint(round_dir / f"region_{j}.params", region.agent.networks())
        global_agent = self.build_global_agent()
        save_checkpoint(round_dir / "global.params", global_agent.networks(),
                        extra={"version": model.version})

    def build_global_agent(self):
        """Fresh agent carrying the current global model (for evaluation/export)."""
        model = self.global_model if self.global_model is not None else self._average()
        cfg = self.regions[0].scenario
        agent = build_agent(cfg, np.random.default_rng(0), kind=self._agent_kind())
        for name, net in agent.networks().items():
            net.set_flat_params(model.params[name].copy())
            if model.bn_stats[name].size:
                net.set_bn_stats(model.bn_stats[name].copy())
        for name, net in agent.target_networks().items():
            net.set_flat_params(model.params[name].copy())
            if model.bn_stats[name].size:
                net.set_bn_stats(model.bn_stats[name].copy())
        return agent

    def _agent_kind(self) -> str:
        from .agents import DqnAgent, Td3Agent  # local to avoid cycle noise

        agent = self.regions[0].agent
        if isinstance(agent, Td3Agent):
            return "td3"
        if isinstance(agent, DqnAgent):
            return "dqn_single" if agent.variant == "single" else "dqn_multi"
        raise TypeError(f"unknown agent type {type(agent)!r}")

    # ---- training -------------------------------------------------------------

    def run(self, progress_every: int = 0) -> FederatedResult:
        interval = self.fed.aggregation_interval
        by_steps = self.fed.granularity == "steps"
        for ep in range(self.episodes):
            for region in self.regions:
                region.begin_episode()
            for _ in range(self.scenario.episode_length):
                for region in self.regions:
                    region.step_once()
                self._global_step += 1
                if by_steps and self._global_step % interval == 0:
                    self.aggregate_and_distribute()
            for region in self.regions:
                region.end_episode()
            if not by_steps and (ep + 1) % interval == 0:
                self.aggregate_and_distribute()
            if progress_every and (ep + 1) % progress_every == 0:
                last = [r.metrics[-1].mean_reward for r in self.regions]
                print(
                    f"episode {ep + 1}/{self.episodes} "
                    f"mean regional reward {np.mean(last):.4f}",
                    flush=True,
                )
        if self.global_model is None or (not by_steps and self.episodes % interval != 0):
            # terminal read-out: average without distributing (not a counted round)
            final = self._average()
            final = GlobalModel(final.params, final.bn_stats, version=self.version)
            self.global_model = final
        region_metrics = [list(r.metrics) for r in self.regions]
        mean_rewards = np.mean(
            [[m.mean_reward for m in ms] for ms in region_metrics], axis=0
        )
        return FederatedResult(
            region_metrics=region_metrics,
            mean_rewards=mean_rewards,
            rounds=self.version,
            final_model=self.global_model,
        )
