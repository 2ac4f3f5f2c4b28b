"""RAN sleep-mode energy control: simulator, DRL agents, federated training, harness."""

from .agents import (
    DqnAgent,
    ReplayBuffer,
    Td3Agent,
    TrainingLoop,
    Transition,
    apply_single_action,
    decode_multi_action,
    epsilon_linear,
    evaluate_policy,
    train_centralized,
)
from .baselines import baseline_all_on, baseline_myopic_oracle, myopic_best_modes
from .channel import (
    ChannelParams,
    LinkGain,
    achievable_rate,
    los_probability,
    path_loss_los,
    path_loss_nlos,
    sample_gain_matrix,
    sample_link,
    snr_per_prb,
)
from .environment import (
    NetworkState,
    RadioUnit,
    SleepModeEnv,
    StepOutcome,
    UserEquipment,
    compute_reward,
)
from .federated import FederatedTrainer, GlobalModel, fedavg
from .metrics import (
    EpisodeMetrics,
    detect_convergence,
    moving_average,
    read_metrics_csv,
    welch_t_test,
    welch_t_test_from_stats,
    write_metrics_csv,
)
from .nn import Adam, LayerSpec, MlpNetwork, build_mlp, load_checkpoint, save_checkpoint, soft_update
from .runner import evaluate_run, run_baseline, run_experiment
from .scenario import ScenarioConfig, ScenarioError, load_bundled_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ChannelParams",
    "DqnAgent",
    "EpisodeMetrics",
    "FederatedTrainer",
    "GlobalModel",
    "LayerSpec",
    "LinkGain",
    "MlpNetwork",
    "NetworkState",
    "RadioUnit",
    "ReplayBuffer",
    "ScenarioConfig",
    "ScenarioError",
    "SleepModeEnv",
    "StepOutcome",
    "Td3Agent",
    "TrainingLoop",
    "Transition",
    "UserEquipment",
    "achievable_rate",
    "apply_single_action",
    "baseline_all_on",
    "baseline_myopic_oracle",
    "build_mlp",
    "compute_reward",
    "decode_multi_action",
    "detect_convergence",
    "epsilon_linear",
    "evaluate_policy",
    "evaluate_run",
    "fedavg",
    "load_bundled_scenario",
    "load_checkpoint",
    "load_scenario",
    "los_probability",
    "moving_average",
    "myopic_best_modes",
    "path_loss_los",
    "path_loss_nlos",
    "read_metrics_csv",
    "run_baseline",
    "run_experiment",
    "sample_gain_matrix",
    "sample_link",
    "save_checkpoint",
    "snr_per_prb",
    "soft_update",
    "train_centralized",
    "welch_t_test",
    "welch_t_test_from_stats",
    "write_metrics_csv",
]
