"""Command line interface: train, fed-train, eval, baseline, report, ttest.

Every subcommand exits 0 only if it ran to completion; config errors, missing
files and failed runs exit 1 with a message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .metrics import welch_t_test
from .runner import evaluate_run, run_baseline, run_experiment
from .scenario import ScenarioError, load_scenario


def _parse_seeds(raw: str) -> list[int]:
    try:
        return [int(s) for s in raw.split(",") if s.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {raw!r}")


def _parse_samples(raw: str) -> list[float]:
    """Comma-separated floats, or @file with one value per line."""
    if raw.startswith("@"):
        path = Path(raw[1:])
        if not path.exists():
            raise argparse.ArgumentTypeError(f"sample file not found: {path}")
        tokens = path.read_text().split()
    else:
        tokens = [t for t in raw.split(",") if t.strip() != ""]
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise argparse.ArgumentTypeError(f"samples must be numbers, got {raw!r}")


def _add_train_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    sub.add_argument("--seeds", type=_parse_seeds, default=None,
                     help="comma-separated seeds (default: the scenario's seed)")
    sub.add_argument("--episodes", type=int, default=None, help="override episode count")
    sub.add_argument("--agent", default=None, choices=("td3", "dqn_single", "dqn_multi"),
                     help="override the scenario's agent kind")
    sub.add_argument("--out", default="runs", help="output directory (default: runs)")
    sub.add_argument("--progress-every", type=int, default=50,
                     help="print a progress line every N episodes (0 = silent)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oransleep",
        description="RAN sleep-mode control experiments: training, baselines, reports.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    train = subs.add_parser("train", help="centralized training runs")
    _add_train_args(train)

    fed = subs.add_parser("fed-train", help="federated training runs")
    _add_train_args(fed)

    ev = subs.add_parser("eval", help="re-evaluate a stored run checkpoint greedily")
    ev.add_argument("--run", required=True, help="run directory written by train/fed-train")
    ev.add_argument("--episodes", type=int, default=None)
    ev.add_argument("--seed", type=int, default=None)

    base = subs.add_parser("baseline", help="reference policies (all-on, myopic oracle)")
    base.add_argument("--scenario", required=True)
    base.add_argument("--kind", required=True, choices=("all-on", "myopic-oracle"))
    base.add_argument("--seed", type=int, default=None)
    base.add_argument("--episodes", type=int, default=None)
    base.add_argument("--out", default="runs")

    rep = subs.add_parser("report", help="figures and comparison tables from run dirs")
    rep.add_argument("--runs", nargs="+", required=True, help="run directories")
    rep.add_argument("--out", default="reports")

    tt = subs.add_parser("ttest", help="Welch's t-test between two samples")
    tt.add_argument("--a", type=_parse_samples, required=True,
                    help="comma-separated values or @file")
    tt.add_argument("--b", type=_parse_samples, required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("train", "fed-train"):
            scenario = load_scenario(args.scenario)
            seeds = args.seeds if args.seeds is not None else [scenario.seed]
            mode = "centralized" if args.command == "train" else "federated"
            dirs = run_experiment(
                scenario, mode, seeds, args.out,
                episodes=args.episodes, agent_kind=args.agent,
                progress_every=args.progress_every,
            )
            for d in dirs:
                print(f"run written: {d}")
        elif args.command == "eval":
            path = evaluate_run(args.run, episodes=args.episodes, seed=args.seed)
            print(f"evaluation written: {path}")
        elif args.command == "baseline":
            scenario = load_scenario(args.scenario)
            d = run_baseline(scenario, args.kind, args.seed, args.out, episodes=args.episodes)
            print(f"baseline written: {d}")
        elif args.command == "report":
            from .reports import emit_reports  # import here: pulls in matplotlib

            paths = emit_reports(args.runs, args.out)
            for name, p in sorted(paths.items()):
                print(f"{name}: {p}")
        elif args.command == "ttest":
            res = welch_t_test(args.a, args.b)
            print(f"t = {res.t_stat:.6g}")
            print(f"dof = {res.dof:.6g}")
            print(f"p (two-sided) = {res.p_value:.6g}")
        else:  # pragma: no cover
            raise ValueError(f"unknown command {args.command!r}")
    except (ScenarioError, ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:  # console_scripts hook
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
