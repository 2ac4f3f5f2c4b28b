"""Runner and CLI tests: run directories, artifact determinism, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from oransleep.cli import main
from oransleep.metrics import read_metrics_csv
from oransleep.nn import load_checkpoint
from oransleep.runner import evaluate_run, run_baseline, run_dir_for, run_experiment
from oransleep.scenario import FederatedParams, load_scenario, save_scenario

from conftest import tiny_scenario


@pytest.fixture()
def cfg():
    return tiny_scenario(episodes=4, eval_episodes=2)


@pytest.fixture()
def fed_cfg():
    return tiny_scenario(
        episodes=4, eval_episodes=2, name="tinyfed",
        federated=FederatedParams(regions=2, aggregation_interval=2),
    )


@pytest.fixture()
def cfg_path(cfg, tmp_path):
    p = tmp_path / "tiny.json"
    save_scenario(cfg, p)
    return p


@pytest.fixture()
def fed_cfg_path(fed_cfg, tmp_path):
    p = tmp_path / "tinyfed.json"
    save_scenario(fed_cfg, p)
    return p


# ---- run_experiment ---------------------------------------------------------------


def test_centralized_run_layout_and_artifacts(cfg, tmp_path):
    dirs = run_experiment(cfg, "centralized", [5], tmp_path / "out")
    assert dirs == [tmp_path / "out" / "tiny" / "centralized-td3" / "seed_5"]
    d = dirs[0]
    for name in ("config.json", "metrics.csv", "eval.csv", "checkpoint.json",
                 "summary.json"):
        assert (d / name).exists()
    assert len(read_metrics_csv(d / "metrics.csv")) == 4
    assert len(read_metrics_csv(d / "eval.csv")) == 2
    resolved = load_scenario(d / "config.json")
    assert resolved.seed == 5


def test_repeat_runs_are_byte_identical(cfg, tmp_path):
    d1 = run_experiment(cfg, "centralized", [42], tmp_path / "a")[0]
    d2 = run_experiment(cfg, "centralized", [42], tmp_path / "b")[0]
    for name in ("config.json", "metrics.csv", "eval.csv", "checkpoint.json",
                 "summary.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name


def test_summary_schema_centralized(cfg, tmp_path):
    d = run_experiment(cfg, "centralized", [3], tmp_path / "out")[0]
    doc = json.loads((d / "summary.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["scenario"] == "tiny"
    assert doc["mode"] == "centralized"
    assert doc["agent_kind"] == "td3"
    assert doc["seed"] == 3
    assert doc["episodes"] == 4
    conv = doc["convergence"]
    assert set(conv) == {"episode", "window", "band_frac"}
    assert conv["episode"] is None  # 4 episodes < 2 * window
    ev = doc["eval"]
    assert ev["episodes"] == 2  # evaluation-episode count mirrors the config
    assert ev["mean_power_w"] > 0.0


def test_agent_override_changes_run(cfg, tmp_path):
    d = run_experiment(cfg, "centralized", [1], tmp_path / "out",
                       agent_kind="dqn_single")[0]
    assert d.name == "seed_1" and d.parent.name == "centralized-dqn_single"
    resolved = load_scenario(d / "config.json")
    assert resolved.agent.kind == "dqn_single"
    payload = load_checkpoint(d / "checkpoint.json")
    assert payload["extra"]["agent_kind"] == "dqn_single"
    assert "q_net" in payload["networks"]


def test_episode_override(cfg, tmp_path):
    d = run_experiment(cfg, "centralized", [2], tmp_path / "out", episodes=2)[0]
    assert len(read_metrics_csv(d / "metrics.csv")) == 2
    doc = json.loads((d / "summary.json").read_text())
    assert doc["episodes"] == 2


def test_federated_mode_on_plain_single_rejected(cfg, tmp_path):
    with pytest.raises(ValueError, match="federated"):
        run_experiment(cfg, "federated", [1], tmp_path / "out")


def test_unknown_mode_rejected(cfg, tmp_path):
    with pytest.raises(ValueError, match="mode"):
        run_experiment(cfg, "sequential", [1], tmp_path / "out")


def test_federated_run_artifacts(fed_cfg, tmp_path):
    d = run_experiment(fed_cfg, "federated", [7], tmp_path / "out")[0]
    assert d.parent.name == "federated-td3"
    combined = read_metrics_csv(d / "metrics.csv")
    regions = [read_metrics_csv(d / f"region_{j}_metrics.csv") for j in (0, 1)]
    assert (d / "eval_region_0.csv").exists() and (d / "eval_region_1.csv").exists()
    for ep, row in enumerate(combined):
        per = [r[ep] for r in regions]
        assert row.energy_j == pytest.approx(sum(p.energy_j for p in per))
        assert row.switch_count == sum(p.switch_count for p in per)
        assert row.mean_reward == pytest.approx(np.mean([p.mean_reward for p in per]))
        assert row.mean_power_w == pytest.approx(np.mean([p.mean_power_w for p in per]))
    doc = json.loads((d / "summary.json").read_text())
    assert doc["mode"] == "federated"
    assert doc["regions"] == 2
    assert doc["rounds"] == 2  # 4 episodes / interval 2
    assert len(doc["eval"]["per_region"]) == 2
    assert doc["eval"]["total_mean_power_w"] == pytest.approx(
        sum(b["mean_power_w"] for b in doc["eval"]["per_region"])
    )


def test_federated_repeat_runs_identical(fed_cfg, tmp_path):
    d1 = run_experiment(fed_cfg, "federated", [9], tmp_path / "a")[0]
    d2 = run_experiment(fed_cfg, "federated", [9], tmp_path / "b")[0]
    for name in ("metrics.csv", "region_0_metrics.csv", "checkpoint.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name


# ---- run_baseline -------------------------------------------------------------------


def test_baseline_run_layout(cfg, tmp_path):
    d = run_baseline(cfg, "all-on", 4, tmp_path / "out", episodes=2)
    assert d == tmp_path / "out" / "tiny" / "baseline-all-on" / "seed_4"
    rows = read_metrics_csv(d / "eval.csv")
    assert len(rows) == 2
    assert all(r.on_frac == 1.0 for r in rows)
    doc = json.loads((d / "summary.json").read_text())
    assert doc["mode"] == "baseline"
    assert doc["agent_kind"] == "all-on"


def test_baseline_oracle_kind(cfg, tmp_path):
    d = run_baseline(cfg, "myopic-oracle", 4, tmp_path / "out", episodes=1)
    rows = read_metrics_csv(d / "eval.csv")
    assert len(rows) == 1


def test_baseline_bad_kind(cfg, tmp_path):
    with pytest.raises(ValueError, match="baseline kind"):
        run_baseline(cfg, "random", 4, tmp_path / "out")


# ---- evaluate_run ---------------------------------------------------------------------


def test_evaluate_run_regenerates_eval(cfg, tmp_path):
    d = run_experiment(cfg, "centralized", [6], tmp_path / "out")[0]
    original = (d / "eval.csv").read_bytes()
    (d / "eval.csv").unlink()
    path = evaluate_run(d)
    assert path == d / "eval.csv"
    assert path.read_bytes() == original


def test_evaluate_run_episode_override_updates_summary(cfg, tmp_path):
    d = run_experiment(cfg, "centralized", [6], tmp_path / "out")[0]
    evaluate_run(d, episodes=3)
    assert len(read_metrics_csv(d / "eval.csv")) == 3
    doc = json.loads((d / "summary.json").read_text())
    assert doc["eval"]["episodes"] == 3


def test_evaluate_run_federated_checkpoint(fed_cfg, tmp_path):
    d = run_experiment(fed_cfg, "federated", [8], tmp_path / "out")[0]
    path = evaluate_run(d, episodes=2)
    assert len(read_metrics_csv(path)) == 2


def test_evaluate_run_rejects_non_run_dir(cfg, tmp_path):
    d = tmp_path / "notarun"
    d.mkdir()
    save_scenario(cfg, d / "config.json")
    with pytest.raises(FileNotFoundError, match="summary.json"):
        evaluate_run(d)


# ---- CLI ------------------------------------------------------------------------------


def cli(*argv):
    return main([str(a) for a in argv])


def test_cli_train_and_rerun_identical(cfg_path, tmp_path, capsys):
    out_a, out_b = tmp_path / "ra", tmp_path / "rb"
    assert cli("train", "--scenario", cfg_path, "--seeds", "5",
               "--out", out_a, "--progress-every", "0") == 0
    assert "run written:" in capsys.readouterr().out
    assert cli("train", "--scenario", cfg_path, "--seeds", "5",
               "--out", out_b, "--progress-every", "0") == 0
    d_a = run_dir_for(out_a, "tiny", "centralized", "td3", 5)
    d_b = run_dir_for(out_b, "tiny", "centralized", "td3", 5)
    assert (d_a / "metrics.csv").read_bytes() == (d_b / "metrics.csv").read_bytes()
    assert (d_a / "eval.csv").read_bytes() == (d_b / "eval.csv").read_bytes()


def test_cli_train_multiple_seeds(cfg_path, tmp_path):
    out = tmp_path / "runs"
    assert cli("train", "--scenario", cfg_path, "--seeds", "1,2",
               "--episodes", "2", "--out", out, "--progress-every", "0") == 0
    for s in (1, 2):
        assert run_dir_for(out, "tiny", "centralized", "td3", s).exists()


def test_cli_fed_train_on_single_fails(cfg_path, tmp_path, capsys):
    code = cli("fed-train", "--scenario", cfg_path, "--out", tmp_path / "o",
               "--progress-every", "0")
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_cli_fed_train_succeeds(fed_cfg_path, tmp_path):
    out = tmp_path / "runs"
    assert cli("fed-train", "--scenario", fed_cfg_path, "--seeds", "3",
               "--out", out, "--progress-every", "0") == 0
    d = run_dir_for(out, "tinyfed", "federated", "td3", 3)
    assert (d / "region_1_metrics.csv").exists()


def test_cli_eval_subcommand(cfg_path, tmp_path, capsys):
    out = tmp_path / "runs"
    cli("train", "--scenario", cfg_path, "--seeds", "4", "--out", out,
        "--progress-every", "0")
    d = run_dir_for(out, "tiny", "centralized", "td3", 4)
    assert cli("eval", "--run", d, "--episodes", "1") == 0
    assert "evaluation written:" in capsys.readouterr().out
    assert len(read_metrics_csv(d / "eval.csv")) == 1


def test_cli_baseline_subcommand(cfg_path, tmp_path, capsys):
    assert cli("baseline", "--scenario", cfg_path, "--kind", "all-on",
               "--episodes", "1", "--out", tmp_path / "o") == 0
    assert "baseline written:" in capsys.readouterr().out


def test_cli_baseline_unknown_kind_exits_2(cfg_path, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli("baseline", "--scenario", cfg_path, "--kind", "random",
            "--out", tmp_path / "o")
    assert exc.value.code == 2


def test_cli_missing_scenario_file(tmp_path, capsys):
    assert cli("train", "--scenario", tmp_path / "nope.json",
               "--out", tmp_path / "o") == 1
    assert "error:" in capsys.readouterr().err


def test_cli_bad_seed_list_exits_2(cfg_path, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli("train", "--scenario", cfg_path, "--seeds", "1,x", "--out", tmp_path / "o")
    assert exc.value.code == 2


def test_cli_ttest_inline(capsys):
    assert cli("ttest", "--a", "0,0,0,0,1", "--b", "10,10,10,10,11") == 0
    out = capsys.readouterr().out
    assert "t = " in out and "dof = " in out and "p (two-sided) = " in out


def test_cli_ttest_from_file(tmp_path, capsys):
    f = tmp_path / "a.txt"
    f.write_text("1.0\n2.0\n3.0\n")
    assert cli("ttest", "--a", f"@{f}", "--b", "1,2,4") == 0
    assert "p (two-sided)" in capsys.readouterr().out


def test_cli_ttest_missing_file_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli("ttest", "--a", f"@{tmp_path / 'missing.txt'}", "--b", "1,2")
    assert exc.value.code == 2


def test_cli_ttest_degenerate_samples(capsys):
    assert cli("ttest", "--a", "2,2,2", "--b", "3,3,3") == 1
    assert "error:" in capsys.readouterr().err


def test_cli_module_entrypoint_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "oransleep.cli", "ttest", "--a", "1,2,3", "--b", "4,5,6"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "t = " in proc.stdout
