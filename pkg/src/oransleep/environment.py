"""Sleep-mode control environment: mobility, association, PRB allocation, power, reward.

One step = 1 slot: apply the RU mode vector, advance every UE along its cyclic
edge<->center pattern, redraw all link gains, re-run association and allocation,
then score the slot. The channel stream is independent of the action sequence, so
two policies on the same seed face identical positions and fading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import achievable_rate, sample_gain_matrix, snr_from_gain
from .scenario import ScenarioConfig

RATE_SATISFIED_RTOL = 1e-12


@dataclass
class RadioUnit:
    id: int
    position: np.ndarray
    q_total: int
    p_active_w: float
    p_sleep_w: float
    p_tx_w: float
    v_trans_w: float
    mode: int = 1
    prev_mode: int = 1
    prbs_used: int = 0


@dataclass
class UserEquipment:
    id: int
    position: np.ndarray
    speed_mps: float
    heading_rad: float
    rate_req_bps: float
    rate_actual_bps: float = 0.0
    serving_ru: int | None = None
    prbs_alloc: int = 0
    home_origin: np.ndarray = field(default_factory=lambda: np.zeros(2))
    home_side_m: float = 0.0
    phase_offset: int = 0


@dataclass
class NetworkState:
    rus: list[RadioUnit]
    ues: list[UserEquipment]
    area_side_m: float
    time_step: int = 0


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    power_total_w: float
    unsatisfied_count: int
    done: bool


def compute_reward(power_w: float, unsatisfied: int, k_total: int,
                   w_power: float, w_qos: float, p_max_w: float) -> float:
    """Negative weighted sum of normalized power draw and unsatisfied-UE fraction."""
    if k_total < 1:
        raise ValueError("k_total must be >= 1")
    if p_max_w <= 0:
        raise ValueError("p_max_w must be > 0")
    return -w_power * (power_w / p_max_w) - w_qos * (unsatisfied / k_total)


class SleepModeEnv:
    """Episode simulator driven by binary RU mode vectors."""

    def __init__(self, scenario: ScenarioConfig, rng: np.random.Generator | int | None = None):
        self.cfg = scenario.validate()
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.channel = scenario.channel
        self.episode_length = scenario.episode_length
        self.p_max_w = scenario.p_max_w
        self.state: NetworkState | None = None

    # ---- lifecycle -----------------------------------------------------------

    def reset(self) -> np.ndarray:
        """New episode: RUs all active, UEs placed uniformly in their home rectangles."""
        cfg = self.cfg
        power = cfg.power
        rus = [
            RadioUnit(
                id=m,
                position=np.asarray(pos, dtype=float),
                q_total=cfg.prbs_per_ru,
                p_active_w=power.p_active_w,
                p_sleep_w=power.p_sleep_w,
                p_tx_w=power.p_tx_w,
                v_trans_w=power.v_trans_w,
            )
            for m, pos in enumerate(cfg.ru_layout())
        ]
        ues = []
        for k in range(cfg.num_ues):
            origin, side = cfg.ue_home(k)
            position = origin + self.rng.random(2) * side
            speed = max(self.rng.normal(cfg.mobility.speed_avg_mps, cfg.mobility.speed_std_mps), 0.0)
            heading = self.rng.uniform(0.0, 2.0 * math.pi)
            offset = int(self.rng.integers(0, self.episode_length))
            ues.append(
                UserEquipment(
                    id=k,
                    position=position,
                    speed_mps=speed,
                    heading_rad=heading,
                    rate_req_bps=cfg.rate_req_bps,
                    home_origin=origin,
                    home_side_m=side,
                    phase_offset=offset,
                )
            )
        self.state = NetworkState(rus=rus, ues=ues, area_side_m=cfg.area_side_m)
        self.associate_and_allocate()
        return self.encode_observation()

    def step(self, action) -> StepOutcome:
        gains = self.begin_step()
        return self.complete_step(action, gains)

    def begin_step(self) -> np.ndarray:
        """Advance mobility and draw this slot's (M, K) gain matrix."""
        self._require_state()
        self.move_ues()
        return sample_gain_matrix(self._distances(), self.channel, self.rng)

    def complete_step(self, action, gains: np.ndarray) -> StepOutcome:
        """Apply a mode vector against a drawn gain matrix and score the slot."""
        st = self._require_state()
        modes = self._validate_action(action)
        for ru, a in zip(st.rus, modes):
            ru.prev_mode = ru.mode
            ru.mode = int(a)
        self._apply_allocation(gains)
        power, _ = self.power_total()
        unsat = self.unsatisfied_count()
        reward = compute_reward(
            power, unsat, self.cfg.num_ues,
            self.cfg.reward.power, self.cfg.reward.qos, self.p_max_w,
        )
        st.time_step += 1
        return StepOutcome(
            observation=self.encode_observation(),
            reward=reward,
            power_total_w=power,
            unsatisfied_count=unsat,
            done=st.time_step >= self.episode_length,
        )

    def evaluate_modes(self, modes, gains: np.ndarray) -> tuple[float, int, float]:
        """Score a candidate mode vector on the current snapshot without mutating it.

        Uses the in-effect modes as the previous slot for transition charging.
        Returns (power_w, unsatisfied_count, reward).
        """
        st = self._require_state()
        modes = self._validate_action(modes)
        _, _, per_ru_prbs, _, unsat = self._allocation_core(modes, gains)
        prev = np.array([ru.mode for ru in st.rus])
        power = self._power_for(modes, prev, per_ru_prbs)
        reward = compute_reward(
            power, unsat, self.cfg.num_ues,
            self.cfg.reward.power, self.cfg.reward.qos, self.p_max_w,
        )
        return power, unsat, reward

    # ---- mobility ------------------------------------------------------------

    def move_ues(self) -> None:
        """One slot of the cyclic pattern: half the period aimed at the home center,
        half aimed radially away, with a per-UE phase offset. Positions stay inside
        the home rectangle."""
        st = self._require_state()
        period = self.episode_length
        half = period / 2.0
        dt = self.cfg.time_step_s
        for ue in st.ues:
            if ue.speed_mps <= 0.0:
                continue
            step_len = ue.speed_mps * dt
            phase = (st.time_step + ue.phase_offset) % period
            center = ue.home_origin + 0.5 * ue.home_side_m
            delta = center - ue.position
            dist = float(np.hypot(delta[0], delta[1]))
            if phase < half:  # inbound
                if dist <= step_len:
                    ue.position = center.copy()
                else:
                    direction = delta / dist
                    ue.position = ue.position + step_len * direction
                    ue.heading_rad = math.atan2(direction[1], direction[0])
            else:  # outbound
                if dist > 1e-9:
                    direction = -delta / dist
                    ue.heading_rad = math.atan2(direction[1], direction[0])
                else:
                    direction = np.array([math.cos(ue.heading_rad), math.sin(ue.heading_rad)])
                lo = ue.home_origin
                hi = ue.home_origin + ue.home_side_m
                ue.position = np.clip(ue.position + step_len * direction, lo, hi)

    # ---- association, allocation, scoring -------------------------------------

    def associate_and_allocate(self) -> None:
        """Redraw all link gains and rebuild associations/allocations in place."""
        self._require_state()
        gains = sample_gain_matrix(self._distances(), self.channel, self.rng)
        self._apply_allocation(gains)

    def _allocation_core(self, modes: np.ndarray, gains: np.ndarray):
        """Pure allocation pass for a candidate mode vector.

        Association: each UE attaches to the active RU with the highest sampled
        gain (ties to the lowest RU id). Allocation: per RU in ascending UE id,
        grant the minimum PRBs meeting the rate requirement, partial at capacity.
        Returns (serving, grants, per_ru_prbs, rates, unsatisfied_count).
        """
        st = self.state
        cfg = self.cfg
        n_ues = cfg.num_ues
        n_rus = cfg.num_rus
        req = np.array([ue.rate_req_bps for ue in st.ues])
        serving = np.full(n_ues, -1, dtype=int)
        grants = np.zeros(n_ues, dtype=np.int64)
        rates = np.zeros(n_ues)
        per_ru = np.zeros(n_rus, dtype=np.int64)
        active = modes.astype(bool)
        if active.any():
            masked = np.where(active[:, None], gains, -np.inf)
            serving = masked.argmax(axis=0)
            gain_serving = gains[serving, np.arange(n_ues)]
            snr = snr_from_gain(gain_serving, cfg.power.p_tx_w, cfg.prbs_per_ru, self.channel)
            rate_one = achievable_rate(1, snr, self.channel)
            needed = np.maximum(np.ceil(req / rate_one - 1e-9), 1.0).astype(np.int64)
            for m in np.flatnonzero(active):
                mine = np.flatnonzero(serving == m)  # ascending UE id
                if mine.size == 0:
                    continue
                cum = np.minimum(np.cumsum(needed[mine]), cfg.prbs_per_ru)
                grants[mine] = np.diff(np.concatenate(([0], cum)))
                per_ru[m] = cum[-1]
            rates = grants * rate_one
        unsat = int(np.sum(rates < req * (1.0 - RATE_SATISFIED_RTOL)))
        return serving, grants, per_ru, rates, unsat

    def _apply_allocation(self, gains: np.ndarray) -> None:
        st = self.state
        modes = np.array([ru.mode for ru in st.rus])
        serving, grants, per_ru, rates, _ = self._allocation_core(modes, gains)
        for k, ue in enumerate(st.ues):
            attached = serving[k] >= 0
            ue.serving_ru = int(serving[k]) if attached else None
            ue.prbs_alloc = int(grants[k])
            ue.rate_actual_bps = float(rates[k])
        for m, ru in enumerate(st.rus):
            ru.prbs_used = int(per_ru[m])

    def _power_for(self, modes: np.ndarray, prev_modes: np.ndarray,
                   per_ru_prbs: np.ndarray) -> float:
        cfg = self.cfg.power
        load = per_ru_prbs / self.cfg.prbs_per_ru
        fixed = np.where(modes == 1, cfg.p_active_w, cfg.p_sleep_w)
        data = modes * (cfg.p_tx_w / cfg.pa_efficiency) * load
        flips = np.abs(modes - prev_modes) if cfg.charge_both_transitions else np.maximum(modes - prev_modes, 0)
        trans = flips * cfg.v_trans_w
        return float(np.sum(fixed + data + trans))

    def power_total(self) -> tuple[float, np.ndarray]:
        """Current slot's draw: (total W, per-RU W). Sleeping RUs burn only P_sleep;
        active ones add PA load proportional to PRB usage; waking adds the transition
        charge (both directions if configured)."""
        st = self._require_state()
        cfg = self.cfg.power
        per = np.zeros(len(st.rus))
        for i, ru in enumerate(st.rus):
            fixed = ru.p_active_w if ru.mode == 1 else ru.p_sleep_w
            data = ru.mode * (ru.p_tx_w / cfg.pa_efficiency) * (ru.prbs_used / ru.q_total)
            if cfg.charge_both_transitions:
                flips = abs(ru.mode - ru.prev_mode)
            else:
                flips = max(ru.mode - ru.prev_mode, 0)
            per[i] = fixed + data + flips * ru.v_trans_w
        return float(per.sum()), per

    def unsatisfied_count(self) -> int:
        st = self._require_state()
        return sum(
            1 for ue in st.ues
            if ue.rate_actual_bps < ue.rate_req_bps * (1.0 - RATE_SATISFIED_RTOL)
        )

    def encode_observation(self) -> np.ndarray:
        """Flat float64 vector in [0,1]: K normalized rates, M modes, M loads, 2K positions."""
        st = self._require_state()
        cfg = self.cfg
        rates = np.array([
            min(ue.rate_actual_bps / (cfg.rate_norm_multiple * ue.rate_req_bps), 1.0)
            for ue in st.ues
        ])
        modes = np.array([float(ru.mode) for ru in st.rus])
        loads = np.array([ru.prbs_used / ru.q_total for ru in st.rus])
        positions = np.concatenate([ue.position / cfg.area_side_m for ue in st.ues])
        return np.concatenate([rates, modes, loads, positions])

    # ---- helpers ---------------------------------------------------------------

    def current_modes(self) -> np.ndarray:
        st = self._require_state()
        return np.array([ru.mode for ru in st.rus], dtype=int)

    def switch_on_count(self) -> int:
        """RUs that woke up this slot (0 -> 1 flips)."""
        st = self._require_state()
        return sum(1 for ru in st.rus if ru.mode == 1 and ru.prev_mode == 0)

    def _distances(self) -> np.ndarray:
        st = self.state
        ru_pos = np.array([ru.position for ru in st.rus])
        ue_pos = np.array([ue.position for ue in st.ues])
        diff = ru_pos[:, None, :] - ue_pos[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def _validate_action(self, action) -> np.ndarray:
        arr = np.asarray(action)
        if arr.shape != (self.cfg.num_rus,):
            raise ValueError(f"action must have shape ({self.cfg.num_rus},), got {arr.shape}")
        as_int = arr.astype(int)
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("action entries must be 0 or 1")
        return as_int

    def _require_state(self) -> NetworkState:
        if self.state is None:
            raise RuntimeError("environment not reset")
        return self.state
