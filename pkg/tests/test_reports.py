"""Report emission tests: SVG figures and the comparison table from run directories."""

import json

import numpy as np
import pytest

from oransleep.metrics import read_metrics_csv
from oransleep.reports import emit_reports, load_run
from oransleep.runner import run_baseline, run_experiment

from conftest import tiny_scenario


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    cfg = tiny_scenario(episodes=25, eval_episodes=3)
    dirs = run_experiment(cfg, "centralized", [1, 2], root)
    return dirs


def test_emit_reports_writes_all_artifacts(two_runs, tmp_path):
    paths = emit_reports(two_runs, tmp_path / "rep")
    assert set(paths) == {"reward_curves", "energy_bars", "comparison"}
    for p in paths.values():
        assert p.exists() and p.stat().st_size > 0
    svg = paths["reward_curves"].read_text()
    assert svg.lstrip().startswith("<?xml")


def test_regeneration_is_byte_identical(two_runs, tmp_path):
    first = emit_reports(two_runs, tmp_path / "r1")
    second = emit_reports(two_runs, tmp_path / "r2")
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes(), key


def test_comparison_values_match_run_csvs(two_runs, tmp_path):
    paths = emit_reports(two_runs, tmp_path / "rep")
    lines = paths["comparison"].read_text().strip().splitlines()
    assert lines[0].startswith("group,seeds,")
    assert len(lines) == 2  # both seeds share one group
    fields = lines[1].split(",")
    assert fields[0] == "tiny/centralized-td3"
    assert int(fields[1]) == 2
    per_seed = []
    for d in two_runs:
        rows = read_metrics_csv(d / "eval.csv")
        per_seed.append(np.mean([r.mean_power_w for r in rows]))
    assert float(fields[2]) == pytest.approx(np.mean(per_seed), abs=1e-9)
    assert float(fields[3]) == pytest.approx(np.std(per_seed, ddof=1), abs=1e-9)


def test_reports_group_runs_by_label(two_runs, tmp_path):
    cfg = tiny_scenario(episodes=25, eval_episodes=3)
    base = run_baseline(cfg, "all-on", 1, tmp_path / "base", episodes=3)
    paths = emit_reports(list(two_runs) + [base], tmp_path / "rep")
    lines = paths["comparison"].read_text().strip().splitlines()
    groups = [ln.split(",")[0] for ln in lines[1:]]
    assert groups == sorted(groups)
    assert "tiny/baseline-all-on" in groups


def test_baseline_only_reports_skip_reward_curves(tmp_path):
    cfg = tiny_scenario(eval_episodes=2)
    base = run_baseline(cfg, "all-on", 3, tmp_path / "base", episodes=2)
    paths = emit_reports([base], tmp_path / "rep")
    assert "reward_curves" not in paths  # no training curve to draw
    assert paths["energy_bars"].exists()


def test_empty_run_list_rejected(tmp_path):
    with pytest.raises(ValueError, match="no run directories"):
        emit_reports([], tmp_path / "rep")


def test_missing_run_dir_errors_precisely(tmp_path):
    missing = tmp_path / "ghost"
    with pytest.raises(FileNotFoundError, match="summary.json"):
        emit_reports([missing], tmp_path / "rep")


def test_run_without_eval_errors_precisely(two_runs, tmp_path):
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "summary.json").write_text(
        json.dumps({"scenario": "x", "mode": "centralized", "agent_kind": "td3",
                    "seed": 0})
    )
    with pytest.raises(FileNotFoundError, match="eval.csv"):
        load_run(broken)


def test_load_run_reads_curves_and_eval(two_runs):
    rec = load_run(two_runs[0])
    assert rec.label == "tiny/centralized-td3"
    assert len(rec.rewards) == 25
    assert len(rec.eval_power_w) == 3
    assert all(p > 0 for p in rec.eval_power_w)


def test_cli_report_subcommand(two_runs, tmp_path, capsys):
    from oransleep.cli import main

    out = tmp_path / "rep"
    code = main(["report", "--runs", *[str(d) for d in two_runs], "--out", str(out)])
    assert code == 0
    assert "comparison:" in capsys.readouterr().out
    assert (out / "comparison.csv").exists()


def test_cli_report_missing_dir_fails(tmp_path, capsys):
    from oransleep.cli import main

    code = main(["report", "--runs", str(tmp_path / "ghost"), "--out", str(tmp_path / "rep")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
