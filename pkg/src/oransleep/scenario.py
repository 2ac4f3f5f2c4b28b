"""Experiment configuration: JSON schema, validation, layouts and region splitting."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ChannelParams

LAYOUTS = ("single_500", "single_1000", "composite_1000")
AGENT_KINDS = ("td3", "dqn_single", "dqn_multi")
COMPOSITE_SUBREGIONS = 4
COMPOSITE_RUS_PER_SUBREGION = 6


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario configs."""


@dataclass(frozen=True)
class PowerParams:
    p_active_w: float = 20.0
    p_sleep_w: float = 5.0
    p_tx_w: float = 1.0
    v_trans_w: float = 3.0
    pa_efficiency: float = 0.5
    charge_both_transitions: bool = False


@dataclass(frozen=True)
class RewardWeights:
    power: float = 1.0
    qos: float = 5.0


@dataclass(frozen=True)
class MobilityParams:
    speed_avg_mps: float = 2.0
    speed_std_mps: float = 0.5


@dataclass(frozen=True)
class AgentParams:
    kind: str = "td3"
    hidden_layers: tuple[int, ...] = (512, 256, 128)
    dqn_hidden_layers: tuple[int, ...] = (512, 384, 256, 128)
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    dqn_lr: float = 1e-4
    gamma: float = 0.99
    tau: float = 0.01
    batch_size: int = 128
    buffer_capacity: int = 50000
    sigma_explore: float = 0.1
    sigma_target: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_frac: float = 0.6
    store_continuous_actions: bool = False


@dataclass(frozen=True)
class FederatedParams:
    regions: int = 4
    aggregation_interval: int = 10
    granularity: str = "episodes"
    weights: tuple[float, ...] | None = None
    include_bn_stats: bool = True
    reset_optimizers: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated description of one experiment: geometry, radio, agent, schedule."""

    name: str
    layout: str
    num_rus: int
    num_ues: int
    area_side_m: float
    episode_length: int = 200
    episodes: int = 2000
    eval_episodes: int = 20
    seed: int = 42
    rate_req_bps: float = 3e6
    rate_norm_multiple: float = 2.0
    prbs_per_ru: int = 100
    time_step_s: float = 1.0
    channel: ChannelParams = field(default_factory=ChannelParams)
    power: PowerParams = field(default_factory=PowerParams)
    reward: RewardWeights = field(default_factory=RewardWeights)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    agent: AgentParams = field(default_factory=AgentParams)
    federated: FederatedParams | None = None
    ru_positions: tuple[tuple[float, float], ...] | None = None

    # ---- derived quantities -------------------------------------------------

    @property
    def observation_dim(self) -> int:
        return 3 * self.num_ues + 2 * self.num_rus

    @property
    def p_max_w(self) -> float:
        """Normalization constant for the power penalty: M * (P_active + P_TX)."""
        return self.num_rus * (self.power.p_active_w + self.power.p_tx_w)

    def subregion_origins(self) -> list[tuple[float, float]]:
        half = self.area_side_m / 2.0
        return [(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)]

    def ru_layout(self) -> np.ndarray:
        """RU coordinates, shape (M, 2): explicit list, or grid(s) filling the area."""
        if self.ru_positions is not None:
            return np.asarray(self.ru_positions, dtype=float)
        if self.layout == "composite_1000":
            half = self.area_side_m / 2.0
            blocks = [
                _grid_positions(COMPOSITE_RUS_PER_SUBREGION, half) + np.asarray(o)
                for o in self.subregion_origins()
            ]
            return np.concatenate(blocks, axis=0)
        return _grid_positions(self.num_rus, self.area_side_m)

    def ue_home(self, ue_index: int) -> tuple[np.ndarray, float]:
        """Rectangle (origin, side) a UE lives in; the whole area unless composite."""
        if self.layout == "composite_1000":
            per = self.num_ues // COMPOSITE_SUBREGIONS
            region = min(ue_index // per, COMPOSITE_SUBREGIONS - 1)
            origin = self.subregion_origins()[region]
            return np.asarray(origin, dtype=float), self.area_side_m / 2.0
        return np.zeros(2), self.area_side_m

    def region_scenarios(self) -> list["ScenarioConfig"]:
        """Per-region configs for federated training.

        composite_1000 splits into its four 500 m subregions (local coordinates);
        single layouts with a `federated` block replicate themselves per region.
        """
        if self.layout == "composite_1000":
            count = COMPOSITE_SUBREGIONS
            return [
                replace(
                    self,
                    name=f"{self.name}-region{j}",
                    layout="single_500",
                    num_rus=COMPOSITE_RUS_PER_SUBREGION,
                    num_ues=self.num_ues // COMPOSITE_SUBREGIONS,
                    area_side_m=self.area_side_m / 2.0,
                    federated=None,
                    ru_positions=None,
                )
                for j in range(count)
            ]
        if self.federated is None:
            raise ScenarioError("region split requires a composite layout or a federated block")
        return [
            replace(self, name=f"{self.name}-region{j}", federated=None)
            for j in range(self.federated.regions)
        ]

    # ---- validation and (de)serialization ------------------------------------

    def validate(self) -> "ScenarioConfig":
        if self.layout not in LAYOUTS:
            raise ScenarioError(f"layout: must be one of {LAYOUTS}, got {self.layout!r}")
        if self.num_rus < 1:
            raise ScenarioError("num_rus: must be >= 1")
        if self.num_ues < 1:
            raise ScenarioError("num_ues: must be >= 1")
        if self.area_side_m <= 0:
            raise ScenarioError("area_side_m: must be > 0")
        if self.episode_length < 1:
            raise ScenarioError("episode_length: must be >= 1")
        if self.episodes < 1:
            raise ScenarioError("episodes: must be >= 1")
        if self.eval_episodes < 1:
            raise ScenarioError("eval_episodes: must be >= 1")
        if self.rate_req_bps <= 0:
            raise ScenarioError("rate_req_bps: must be > 0")
        if self.rate_norm_multiple <= 0:
            raise ScenarioError("rate_norm_multiple: must be > 0")
        if self.prbs_per_ru < 1:
            raise ScenarioError("prbs_per_ru: must be >= 1")
        if self.time_step_s <= 0:
            raise ScenarioError("time_step_s: must be > 0")
        if self.agent.kind not in AGENT_KINDS:
            raise ScenarioError(f"agent.kind: must be one of {AGENT_KINDS}, got {self.agent.kind!r}")
        if self.agent.kind == "dqn_multi" and self.num_rus > 16:
            raise ScenarioError("agent.kind: dqn_multi enumerates 2^M actions and needs num_rus <= 16")
        if not 0 <= self.agent.epsilon_decay_frac <= 1:
            raise ScenarioError("agent.epsilon_decay_frac: must lie in [0, 1]")
        if self.agent.policy_delay < 1:
            raise ScenarioError("agent.policy_delay: must be >= 1")
        if self.agent.batch_size < 1 or self.agent.buffer_capacity < self.agent.batch_size:
            raise ScenarioError("agent: need batch_size >= 1 and buffer_capacity >= batch_size")
        if self.layout == "composite_1000":
            if self.num_rus != COMPOSITE_SUBREGIONS * COMPOSITE_RUS_PER_SUBREGION:
                raise ScenarioError(
                    "num_rus: composite_1000 is four 500 m subregions of "
                    f"{COMPOSITE_RUS_PER_SUBREGION} RUs each, so num_rus must be "
                    f"{COMPOSITE_SUBREGIONS * COMPOSITE_RUS_PER_SUBREGION}"
                )
            if self.num_ues % COMPOSITE_SUBREGIONS != 0:
                raise ScenarioError("num_ues: composite_1000 requires num_ues divisible by 4")
        if self.ru_positions is not None:
            pos = np.asarray(self.ru_positions, dtype=float)
            if pos.shape != (self.num_rus, 2):
                raise ScenarioError(f"ru_positions: expected shape ({self.num_rus}, 2), got {pos.shape}")
            if np.any(pos < 0) or np.any(pos > self.area_side_m):
                raise ScenarioError("ru_positions: coordinates must lie inside the area")
        if self.federated is not None:
            fed = self.federated
            if fed.regions < 1:
                raise ScenarioError("federated.regions: must be >= 1")
            if fed.aggregation_interval < 1:
                raise ScenarioError("federated.aggregation_interval: must be >= 1")
            if fed.granularity not in ("episodes", "steps"):
                raise ScenarioError("federated.granularity: must be 'episodes' or 'steps'")
            if self.layout == "composite_1000" and fed.regions != COMPOSITE_SUBREGIONS:
                raise ScenarioError("federated.regions: composite_1000 always splits into 4 subregions")
            if fed.weights is not None and len(fed.weights) != fed.regions:
                raise ScenarioError("federated.weights: need one weight per region")
        return self

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["agent"]["hidden_layers"] = list(self.agent.hidden_layers)
        doc["agent"]["dqn_hidden_layers"] = list(self.agent.dqn_hidden_layers)
        if self.federated is not None and self.federated.weights is not None:
            doc["federated"]["weights"] = list(self.federated.weights)
        if self.ru_positions is not None:
            doc["ru_positions"] = [list(p) for p in self.ru_positions]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        return _parse_scenario(doc)

    @classmethod
    def build(cls, **overrides) -> "ScenarioConfig":
        """Shorthand used by tests: defaults for single_500, override freely."""
        base = {
            "name": overrides.pop("name", "test"),
            "layout": "single_500",
            "num_rus": 6,
            "num_ues": 20,
            "area_side_m": 500.0,
        }
        base.update(overrides)
        return _parse_scenario(base, _pre_dataclassed=True)


def _grid_positions(count: int, side: float) -> np.ndarray:
    """Centers of a cols x rows grid filling a square, row-major, first `count` cells."""
    cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    pts = []
    for idx in range(count):
        r, c = divmod(idx, cols)
        pts.append(((c + 0.5) * side / cols, (r + 0.5) * side / rows))
    return np.asarray(pts, dtype=float)


def _block(doc: dict, key: str, cls, path_defaults: dict | None = None):
    raw = doc.pop(key, None)
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ScenarioError(f"{key}: expected an object")
    raw = dict(raw)
    kwargs = {}
    for f in cls.__dataclass_fields__:
        if f in raw:
            kwargs[f] = raw.pop(f)
    if raw:
        raise ScenarioError(f"unknown key(s) in {key}: {sorted(raw)}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{key}: {exc}") from exc


def _parse_scenario(doc: dict, _pre_dataclassed: bool = False) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario config must be a JSON object")
    doc = dict(doc)
    kwargs: dict = {}

    for req in ("layout", "num_rus", "num_ues", "area_side_m"):
        if req not in doc:
            raise ScenarioError(f"{req}: missing required field")

    def take(key, conv=None):
        if key in doc:
            val = doc.pop(key)
            kwargs[key] = conv(val) if conv is not None and val is not None else val

    take("name", str)
    take("layout", str)
    take("num_rus", int)
    take("num_ues", int)
    take("area_side_m", float)
    take("episode_length", int)
    take("episodes", int)
    take("eval_episodes", int)
    take("seed", int)
    take("rate_req_bps", float)
    take("rate_norm_multiple", float)
    take("prbs_per_ru", int)
    take("time_step_s", float)
    kwargs.setdefault("name", kwargs["layout"])

    if _pre_dataclassed:
        # build(): nested blocks may already be dataclasses
        for key, cls in (("channel", ChannelParams), ("power", PowerParams),
                         ("reward", RewardWeights), ("mobility", MobilityParams),
                         ("agent", AgentParams)):
            val = doc.pop(key, None)
            kwargs[key] = val if val is not None else cls()
        kwargs["federated"] = doc.pop("federated", None)
        kwargs["ru_positions"] = doc.pop("ru_positions", None)
    else:
        try:
            kwargs["channel"] = _block(doc, "channel", ChannelParams)
        except ValueError as exc:
            raise ScenarioError(f"channel: {exc}") from exc
        kwargs["power"] = _block(doc, "power", PowerParams)
        kwargs["reward"] = _block(doc, "reward", RewardWeights)
        kwargs["mobility"] = _block(doc, "mobility", MobilityParams)
        agent = _block(doc, "agent", AgentParams)
        kwargs["agent"] = replace(
            agent,
            hidden_layers=tuple(agent.hidden_layers),
            dqn_hidden_layers=tuple(agent.dqn_hidden_layers),
        )
        fed_raw = doc.pop("federated", None)
        if fed_raw is None:
            kwargs["federated"] = None
        else:
            fed = _block({"federated": fed_raw}, "federated", FederatedParams)
            if fed.weights is not None:
                fed = replace(fed, weights=tuple(float(w) for w in fed.weights))
            kwargs["federated"] = fed
        pos = doc.pop("ru_positions", None)
        kwargs["ru_positions"] = (
            None if pos is None else tuple((float(x), float(y)) for x, y in pos)
        )

    if doc:
        raise ScenarioError(f"unknown key(s) in scenario: {sorted(doc)}")
    cfg = ScenarioConfig(**kwargs)
    return cfg.validate()


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a scenario JSON file; the name defaults to the file stem."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(doc, dict):
        doc.setdefault("name", path.stem)
    return _parse_scenario(doc)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def bundled_scenario_path(name: str) -> Path:
    """Path of a preset shipped inside the package (e.g. 'single_500')."""
    ref = resources.files("oransleep").joinpath("configs", f"{name}.json")
    with resources.as_file(ref) as p:
        return Path(p)


def load_bundled_scenario(name: str) -> ScenarioConfig:
    return load_scenario(bundled_scenario_path(name))
