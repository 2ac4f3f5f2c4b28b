"""Figures and comparison tables regenerated verbatim from run CSVs.

SVG output is deterministic: fixed hash salt, no creation date metadata, and every
plotted value is recomputed from the emitted CSVs (never from in-memory state).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .metrics import moving_average, read_metrics_csv  # noqa: E402

plt.rcParams["svg.hashsalt"] = "oransleep"

SMOOTH_WINDOW = 20


@dataclass
class RunRecord:
    run_dir: Path
    summary: dict
    label: str
    rewards: list[float]
    eval_power_w: list[float]
    eval_reward: list[float]
    eval_energy_j: list[float]


def load_run(run_dir) -> RunRecord:
    """Read one run directory; raises with a precise message on anything missing."""
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"{run_dir}: missing summary.json (not a run directory?)")
    summary = json.loads(summary_path.read_text())
    label = f"{summary['scenario']}/{summary['mode']}-{summary['agent_kind']}"
    metrics_path = run_dir / "metrics.csv"
    rewards = []
    if metrics_path.exists():
        rewards = [m.mean_reward for m in read_metrics_csv(metrics_path)]
    eval_path = run_dir / "eval.csv"
    if not eval_path.exists():
        raise FileNotFoundError(f"{run_dir}: missing eval.csv")
    eval_rows = read_metrics_csv(eval_path)
    return RunRecord(
        run_dir=run_dir,
        summary=summary,
        label=label,
        rewards=rewards,
        eval_power_w=[m.mean_power_w for m in eval_rows],
        eval_reward=[m.mean_reward for m in eval_rows],
        eval_energy_j=[m.energy_j for m in eval_rows],
    )


def _mean(xs) -> float:
    return sum(xs) / len(xs)


def _std(xs) -> float:
    if len(xs) < 2:
        return 0.0
    mu = _mean(xs)
    return (sum((x - mu) ** 2 for x in xs) / (len(xs) - 1)) ** 0.5


def emit_reports(run_dirs, out_dir) -> dict[str, Path]:
    """Write reward_curves.svg, energy_bars.svg and comparison.csv for a set of runs.

    Returns the emitted paths. Regeneration over unchanged inputs is byte-identical.
    """
    run_dirs = [Path(d) for d in run_dirs]
    if not run_dirs:
        raise ValueError("no run directories given")
    records = [load_run(d) for d in run_dirs]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    # training reward curves (smoothed), one line per run
    fig, ax = plt.subplots(figsize=(8, 5))
    plotted = False
    for rec in sorted(records, key=lambda r: (r.label, str(r.run_dir))):
        if len(rec.rewards) >= SMOOTH_WINDOW:
            smooth = moving_average(rec.rewards, SMOOTH_WINDOW)
            ax.plot(range(SMOOTH_WINDOW - 1, len(rec.rewards)), smooth,
                    label=f"{rec.label} seed {rec.summary['seed']}")
            plotted = True
    if plotted:
        ax.set_xlabel("episode")
        ax.set_ylabel(f"mean step reward (window {SMOOTH_WINDOW})")
        ax.legend(fontsize=7)
        curves_path = out_dir / "reward_curves.svg"
        fig.savefig(curves_path, metadata={"Date": None})
        paths["reward_curves"] = curves_path
    plt.close(fig)

    # grouped eval power bars with std whiskers across seeds
    groups: dict[str, list[RunRecord]] = {}
    for rec in records:
        groups.setdefault(rec.label, []).append(rec)
    labels = sorted(groups)
    bar_means = [_mean([_mean(r.eval_power_w) for r in groups[g]]) for g in labels]
    bar_stds = [_std([_mean(r.eval_power_w) for r in groups[g]]) for g in labels]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.bar(range(len(labels)), bar_means, yerr=bar_stds, capsize=4)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=7)
    ax.set_ylabel("mean evaluation power (W)")
    fig.tight_layout()
    bars_path = out_dir / "energy_bars.svg"
    fig.savefig(bars_path, metadata={"Date": None})
    plt.close(fig)
    paths["energy_bars"] = bars_path

    # comparison table: one row per group, traceable to the CSVs
    lines = ["group,seeds,eval_power_w_mean,eval_power_w_std,eval_reward_mean,"
             "eval_energy_j_mean,convergence_episodes"]
    for g in labels:
        recs = sorted(groups[g], key=lambda r: r.summary["seed"])
        per_seed_power = [_mean(r.eval_power_w) for r in recs]
        per_seed_reward = [_mean(r.eval_reward) for r in recs]
        per_seed_energy = [_mean(r.eval_energy_j) for r in recs]
        convs = [str(r.summary.get("convergence", {}).get("episode")) for r in recs]
        lines.append(
            f"{g},{len(recs)},{_mean(per_seed_power)!r},{_std(per_seed_power)!r},"
            f"{_mean(per_seed_reward)!r},{_mean(per_seed_energy)!r},"
            f"{';'.join(convs)}"
        )
    table_path = out_dir / "comparison.csv"
    table_path.write_text("\n".join(lines) + "\n")
    paths["comparison"] = table_path
    return paths
