"""Experiment driver: seeded runs, greedy evaluation, deterministic run directories.

Run directory layout (one per scenario/mode/seed):
    config.json              resolved scenario (overrides applied)
    metrics.csv              training curve, one row per episode
    region_<j>_metrics.csv   federated runs only
    eval.csv                 greedy evaluation episodes
    eval_region_<j>.csv      federated runs only
    checkpoint.json          final networks (+ optimizer state for centralized runs)
    summary.json             headline numbers, all reproducible from the CSVs

Nothing here embeds wall-clock state, so repeated runs with the same inputs are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agents import evaluate_policy, train_centralized
from .baselines import baseline_all_on, baseline_myopic_oracle
from .federated import FederatedTrainer
from .metrics import EpisodeMetrics, detect_convergence, write_metrics_csv
from .nn import load_checkpoint, save_checkpoint
from .scenario import ScenarioConfig, save_scenario

RUN_SCHEMA_VERSION = 1
MODES = ("centralized", "federated")
BASELINE_KINDS = ("all-on", "myopic-oracle")


def run_dir_for(out_dir, scenario_name: str, mode: str, agent_kind: str, seed: int) -> Path:
    return Path(out_dir) / scenario_name / f"{mode}-{agent_kind}" / f"seed_{seed}"


def _mean(metrics: list[EpisodeMetrics], attr: str) -> float:
    return float(np.mean([getattr(m, attr) for m in metrics]))


def _summary_eval_block(metrics: list[EpisodeMetrics]) -> dict:
    return {
        "episodes": len(metrics),
        "mean_reward": _mean(metrics, "mean_reward"),
        "mean_power_w": _mean(metrics, "mean_power_w"),
        "mean_energy_j": _mean(metrics, "energy_j"),
        "mean_unsat_frac": _mean(metrics, "unsat_frac"),
        "mean_on_frac": _mean(metrics, "on_frac"),
    }


def _write_summary(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_experiment(scenario: ScenarioConfig, mode: str, seeds, out_dir,
                   episodes: int | None = None, agent_kind: str | None = None,
                   convergence_window: int = 100, progress_every: int = 0) -> list[Path]:
    """Train per seed, evaluate greedily, and write one run directory per seed."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    scenario = scenario.validate()
    if mode == "federated" and scenario.federated is None and scenario.layout != "composite_1000":
        raise ValueError(
            "federated mode requires a composite layout or a federated block in the scenario"
        )
    kind = agent_kind or scenario.agent.kind
    run_dirs = []
    for seed in seeds:
        run_dir = run_dir_for(out_dir, scenario.name, mode, kind, seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        resolved = replace(
            scenario,
            seed=int(seed),
            episodes=episodes if episodes is not None else scenario.episodes,
            agent=replace(scenario.agent, kind=kind),
        )
        save_scenario(resolved, run_dir / "config.json")
        if mode == "centralized":
            _run_centralized(resolved, run_dir, convergence_window, progress_every)
        else:
            _run_federated(resolved, run_dir, convergence_window, progress_every)
        run_dirs.append(run_dir)
    return run_dirs


def _run_centralized(cfg: ScenarioConfig, run_dir: Path, window: int,
                     progress_every: int) -> None:
    loop = train_centralized(cfg, seed=cfg.seed, episodes=cfg.episodes,
                             agent_kind=cfg.agent.kind, progress_every=progress_every)
    write_metrics_csv(run_dir / "metrics.csv", loop.metrics)
    save_checkpoint(run_dir / "checkpoint.json", loop.agent.networks(),
                    loop.agent.optimizers(), extra={"agent_kind": cfg.agent.kind})
    eval_metrics = evaluate_policy(cfg, loop.agent, cfg.eval_episodes, cfg.seed)
    write_metrics_csv(run_dir / "eval.csv", eval_metrics)
    rewards = [m.mean_reward for m in loop.metrics]
    conv = detect_convergence(rewards, window) if len(rewards) >= 2 * window else None
    _write_summary(run_dir / "summary.json", {
        "schema_version": RUN_SCHEMA_VERSION,
        "scenario": cfg.name,
        "layout": cfg.layout,
        "mode": "centralized",
        "agent_kind": cfg.agent.kind,
        "seed": cfg.seed,
        "episodes": cfg.episodes,
        "convergence": {"episode": conv, "window": window, "band_frac": 0.05},
        "eval": _summary_eval_block(eval_metrics),
    })


def _run_federated(cfg: ScenarioConfig, run_dir: Path, window: int,
                   progress_every: int) -> None:
    trainer = FederatedTrainer(cfg, seed=cfg.seed, episodes=cfg.episodes,
                               agent_kind=cfg.agent.kind)
    result = trainer.run(progress_every=progress_every)
    for j, ms in enumerate(result.region_metrics):
        write_metrics_csv(run_dir / f"region_{j}_metrics.csv", ms)
    # aggregate curve: per-episode means across regions, energy summed
    combined = []
    for ep in range(len(result.region_metrics[0])):
        rows = [ms[ep] for ms in result.region_metrics]
        combined.append(EpisodeMetrics(
            episode=ep,
            mean_reward=float(np.mean([r.mean_reward for r in rows])),
            energy_j=float(np.sum([r.energy_j for r in rows])),
            mean_power_w=float(np.mean([r.mean_power_w for r in rows])),
            unsat_frac=float(np.mean([r.unsat_frac for r in rows])),
            on_frac=float(np.mean([r.on_frac for r in rows])),
            switch_count=int(np.sum([r.switch_count for r in rows])),
        ))
    write_metrics_csv(run_dir / "metrics.csv", combined)
    global_agent = trainer.build_global_agent()
    save_checkpoint(run_dir / "checkpoint.json", global_agent.networks(),
                    extra={"agent_kind": cfg.agent.kind, "rounds": result.rounds,
                           "version": result.final_model.version})
    region_cfgs = cfg.region_scenarios()
    per_region_eval = []
    for j, rcfg in enumerate(region_cfgs):
        ev = evaluate_policy(rcfg, global_agent, cfg.eval_episodes, cfg.seed + j)
        write_metrics_csv(run_dir / f"eval_region_{j}.csv", ev)
        per_region_eval.append(ev)
    rewards = result.mean_rewards.tolist()
    conv = detect_convergence(rewards, window) if len(rewards) >= 2 * window else None
    _write_summary(run_dir / "summary.json", {
        "schema_version": RUN_SCHEMA_VERSION,
        "scenario": cfg.name,
        "layout": cfg.layout,
        "mode": "federated",
        "agent_kind": cfg.agent.kind,
        "seed": cfg.seed,
        "episodes": cfg.episodes,
        "regions": len(region_cfgs),
        "rounds": result.rounds,
        "convergence": {"episode": conv, "window": window, "band_frac": 0.05},
        "eval": {
            "per_region": [_summary_eval_block(ev) for ev in per_region_eval],
            "mean_reward": float(np.mean([_mean(ev, "mean_reward") for ev in per_region_eval])),
            "total_mean_power_w": float(np.sum([_mean(ev, "mean_power_w") for ev in per_region_eval])),
        },
    })


def run_baseline(scenario: ScenarioConfig, kind: str, seed: int | None, out_dir,
                 episodes: int | None = None) -> Path:
    """Roll out a reference policy and write a run directory like run_experiment's."""
    if kind not in BASELINE_KINDS:
        raise ValueError(f"baseline kind must be one of {BASELINE_KINDS}, got {kind!r}")
    scenario = scenario.validate()
    seed = scenario.seed if seed is None else int(seed)
    run_dir = run_dir_for(out_dir, scenario.name, "baseline", kind, seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    resolved = replace(scenario, seed=seed)
    save_scenario(resolved, run_dir / "config.json")
    if kind == "all-on":
        metrics = baseline_all_on(resolved, seed, episodes)
    else:
        metrics = baseline_myopic_oracle(resolved, seed, episodes)
    write_metrics_csv(run_dir / "eval.csv", metrics)
    _write_summary(run_dir / "summary.json", {
        "schema_version": RUN_SCHEMA_VERSION,
        "scenario": resolved.name,
        "layout": resolved.layout,
        "mode": "baseline",
        "agent_kind": kind,
        "seed": seed,
        "eval": _summary_eval_block(metrics),
    })
    return run_dir


def evaluate_run(run_dir, episodes: int | None = None, seed: int | None = None) -> Path:
    """Re-evaluate a stored checkpoint greedily; writes eval.csv (and refreshes the
    summary's eval block) inside the run directory."""
    from .agents import build_agent  # deferred: keeps import graph flat
    from .scenario import load_scenario

    run_dir = Path(run_dir)
    cfg = load_scenario(run_dir / "config.json")
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"{run_dir} has no summary.json; not a run directory")
    summary = json.loads(summary_path.read_text())
    payload = load_checkpoint(run_dir / "checkpoint.json")
    agent_kind = payload["extra"].get("agent_kind", cfg.agent.kind)
    eval_seed = cfg.seed if seed is None else seed

    if summary.get("mode") == "federated":
        base_cfg = cfg.region_scenarios()[0]
    else:
        base_cfg = cfg
    agent = build_agent(base_cfg, np.random.default_rng(0), kind=agent_kind)
    for name, net in agent.networks().items():
        stored = payload["networks"][name]
        net.set_flat_params(stored.get_flat_params())
        stats = stored.get_bn_stats()
        if stats.size:
            net.set_bn_stats(stats)
    metrics = evaluate_policy(base_cfg, agent, episodes or cfg.eval_episodes, eval_seed)
    write_metrics_csv(run_dir / "eval.csv", metrics)
    summary["eval"] = _summary_eval_block(metrics)
    _write_summary(summary_path, summary)
    return run_dir / "eval.csv"
