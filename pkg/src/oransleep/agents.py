"""Replay buffer, the two DQN action codings, TD3 with thresholded actions, training loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .environment import SleepModeEnv
from .metrics import EpisodeMetrics
from .nn import Adam, MlpNetwork, build_mlp, soft_update
from .scenario import AgentParams, ScenarioConfig

EVAL_STREAM_TAG = 101


@dataclass(frozen=True)
class Transition:
    """One interaction record as stored in the replay buffer."""

    state: np.ndarray
    action: np.ndarray | int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_shape: tuple[int, ...] = (),
                 action_dtype=np.float64):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, *action_shape), dtype=action_dtype)
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._dones = np.zeros(capacity)
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def add(self, state, action, reward: float, next_state, done: bool) -> None:
        i = self._head
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_states[i] = next_state
        self._dones[i] = float(done)
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample with replacement; requires at least batch_size records."""
        if batch_size > self._size:
            raise ValueError(f"buffer holds {self._size} transitions, need {batch_size}")
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._dones[idx],
        )


def decode_multi_action(action: int, num_rus: int) -> np.ndarray:
    """Map an action index onto a full mode vector; RU 0 is the most significant bit."""
    if not 0 <= action < 2**num_rus:
        raise ValueError(f"action {action} outside [0, {2**num_rus})")
    return np.array([(action >> (num_rus - 1 - i)) & 1 for i in range(num_rus)], dtype=int)


def apply_single_action(current_modes, action: int, num_rus: int) -> np.ndarray:
    """Toggle-one coding: a < M switches RU a on, a >= M switches RU a - M off."""
    if not 0 <= action < 2 * num_rus:
        raise ValueError(f"action {action} outside [0, {2 * num_rus})")
    modes = np.asarray(current_modes, dtype=int).copy()
    if modes.shape != (num_rus,):
        raise ValueError("current_modes must have one entry per RU")
    if action < num_rus:
        modes[action] = 1
    else:
        modes[action - num_rus] = 0
    return modes


def epsilon_linear(episode: int, total_episodes: int, start: float = 1.0,
                   end: float = 0.05, decay_frac: float = 0.6) -> float:
    """Linear decay from start to end over the first decay_frac of training."""
    span = max(int(total_episodes * decay_frac), 1)
    if episode >= span:
        return end
    return start + (end - start) * (episode / span)


class DqnAgent:
    """Q-learning over a discrete action catalogue (toggle-one or full bitmap)."""

    def __init__(self, obs_dim: int, num_rus: int, variant: str,
                 params: AgentParams, rng: np.random.Generator):
        if variant not in ("single", "multi"):
            raise ValueError("variant must be 'single' or 'multi'")
        if variant == "multi" and num_rus > 16:
            raise ValueError("multi-action DQN enumerates 2^M actions; num_rus must be <= 16")
        self.variant = variant
        self.num_rus = num_rus
        self.obs_dim = obs_dim
        self.num_actions = 2 * num_rus if variant == "single" else 2**num_rus
        self.params = params
        self.gamma = params.gamma
        self.tau = params.tau
        self.batch_size = params.batch_size
        self.epsilon = params.epsilon_start
        self.q_net = build_mlp(obs_dim, params.dqn_hidden_layers, self.num_actions, "linear", rng)
        self.q_target = self.q_net.clone()
        self.optimizer = Adam(self.q_net.num_params, params.dqn_lr)

    def action_space(self) -> int:
        return self.num_actions

    def set_episode(self, episode: int, total_episodes: int) -> None:
        self.epsilon = epsilon_linear(
            episode, total_episodes,
            self.params.epsilon_start, self.params.epsilon_end, self.params.epsilon_decay_frac,
        )

    def select_action(self, obs, explore: bool, rng: np.random.Generator | None) -> int:
        if explore:
            if rng is None:
                raise ValueError("exploration requires an rng")
            if rng.random() < self.epsilon:
                return int(rng.integers(self.num_actions))
        q = self.q_net.forward(np.asarray(obs, dtype=float))
        return int(np.argmax(q))  # ties resolve to the lowest index

    def modes_for_action(self, action: int, current_modes) -> np.ndarray:
        if self.variant == "single":
            return apply_single_action(current_modes, action, self.num_rus)
        return decode_multi_action(action, self.num_rus)

    def learn(self, buffer: ReplayBuffer, rng: np.random.Generator) -> float:
        """One TD step on a uniform batch; soft-refreshes the target net."""
        s, a, r, s2, d = buffer.sample(self.batch_size, rng)
        a = a.astype(int)
        q_next = self.q_target.forward(s2)
        targets = r + self.gamma * (1.0 - d) * q_next.max(axis=1)
        self.q_net.training = True
        q = self.q_net.forward(s)
        picked = q[np.arange(len(a)), a]
        diff = picked - targets
        loss = float(np.mean(diff**2))
        upstream = np.zeros_like(q)
        upstream[np.arange(len(a)), a] = 2.0 * diff / len(a)
        grads, _ = self.q_net.backward(upstream)
        self.q_net.training = False
        self.q_net.set_flat_params(self.optimizer.step(self.q_net.get_flat_params(), grads))
        soft_update(self.q_target, self.q_net, self.tau)
        return loss

    def networks(self) -> dict[str, MlpNetwork]:
        return {"q_net": self.q_net}

    def target_networks(self) -> dict[str, MlpNetwork]:
        return {"q_net": self.q_target}

    def optimizers(self) -> dict[str, Adam]:
        return {"q_net": self.optimizer}


class Td3Agent:
    """Twin-critic deterministic policy gradient with a 0.5 threshold on the actor head.

    The actor emits per-RU sigmoids; the environment sees the thresholded bits
    (strictly greater than 0.5 turns an RU on). Critic 1 supplies the actor gradient
    through the continuous head.
    """

    def __init__(self, obs_dim: int, num_rus: int, params: AgentParams,
                 rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.num_rus = num_rus
        self.params = params
        self.gamma = params.gamma
        self.tau = params.tau
        self.batch_size = params.batch_size
        self.sigma_explore = params.sigma_explore
        self.sigma_target = params.sigma_target
        self.noise_clip = params.noise_clip
        self.policy_delay = params.policy_delay
        self.actor = build_mlp(obs_dim, params.hidden_layers, num_rus, "sigmoid", rng,
                               first_layer_bn=True)
        self.critic1 = build_mlp(obs_dim + num_rus, params.hidden_layers, 1, "linear", rng)
        self.critic2 = build_mlp(obs_dim + num_rus, params.hidden_layers, 1, "linear", rng)
        self.actor_target = self.actor.clone()
        self.critic1_target = self.critic1.clone()
        self.critic2_target = self.critic2.clone()
        self.actor_opt = Adam(self.actor.num_params, params.actor_lr)
        self.critic1_opt = Adam(self.critic1.num_params, params.critic_lr)
        self.critic2_opt = Adam(self.critic2.num_params, params.critic_lr)
        self.update_count = 0

    def set_episode(self, episode: int, total_episodes: int) -> None:
        pass  # exploration noise is constant

    @staticmethod
    def threshold(continuous) -> np.ndarray:
        """Binary modes from the continuous head: strictly above 0.5 switches on."""
        return (np.asarray(continuous) > 0.5).astype(int)

    def select_action(self, obs, explore: bool,
                      rng: np.random.Generator | None) -> tuple[np.ndarray, np.ndarray]:
        """Returns (continuous action with exploration noise, thresholded binary modes)."""
        mu = self.actor.forward(np.asarray(obs, dtype=float))
        cont = np.array(mu, dtype=float)
        if explore and self.sigma_explore > 0.0:
            if rng is None:
                raise ValueError("exploration requires an rng")
            cont = cont + rng.normal(0.0, self.sigma_explore, size=cont.shape)
        return cont, self.threshold(cont)

    def _smoothing_noise(self, shape, rng: np.random.Generator) -> np.ndarray:
        noise = rng.normal(0.0, self.sigma_target, size=shape)
        return np.clip(noise, -self.noise_clip, self.noise_clip)

    def compute_targets(self, rewards, next_states, dones,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Clipped-double-Q targets: y = r + gamma (1-d) min_i Q'_i(s', f(mu'(s') + eps))."""
        mu2 = self.actor_target.forward(next_states)
        next_actions = self.threshold(mu2 + self._smoothing_noise(mu2.shape, rng)).astype(float)
        x2 = np.concatenate([next_states, next_actions], axis=1)
        q1 = self.critic1_target.forward(x2)[:, 0]
        q2 = self.critic2_target.forward(x2)[:, 0]
        y = rewards + self.gamma * (1.0 - dones) * np.minimum(q1, q2)
        return y, next_actions

    def learn(self, buffer: ReplayBuffer, rng: np.random.Generator) -> tuple[float, float | None]:
        """One critic update (both critics); actor and targets every policy_delay calls."""
        s, a, r, s2, d = buffer.sample(self.batch_size, rng)
        batch = len(r)
        y, _ = self.compute_targets(r, s2, d, rng)
        x = np.concatenate([s, a.astype(float)], axis=1)
        critic_losses = []
        for critic, opt in ((self.critic1, self.critic1_opt), (self.critic2, self.critic2_opt)):
            critic.training = True
            q = critic.forward(x)[:, 0]
            diff = q - y
            critic_losses.append(float(np.mean(diff**2)))
            grads, _ = critic.backward((2.0 * diff / batch)[:, None])
            critic.training = False
            critic.set_flat_params(opt.step(critic.get_flat_params(), grads))
        self.update_count += 1
        actor_loss = None
        if self.update_count % self.policy_delay == 0:
            self.actor.training = True
            mu = self.actor.forward(s)
            self.critic1.training = True
            q = self.critic1.forward(np.concatenate([s, mu], axis=1))[:, 0]
            actor_loss = float(-np.mean(q))
            _, dinput = self.critic1.backward(np.full((batch, 1), -1.0 / batch))
            self.critic1.training = False
            d_action = dinput[:, self.obs_dim:]
            actor_grads, _ = self.actor.backward(d_action)
            self.actor.training = False
            self.actor.set_flat_params(self.actor_opt.step(self.actor.get_flat_params(), actor_grads))
            soft_update(self.actor_target, self.actor, self.tau)
            soft_update(self.critic1_target, self.critic1, self.tau)
            soft_update(self.critic2_target, self.critic2, self.tau)
        return float(np.mean(critic_losses)), actor_loss

    def networks(self) -> dict[str, MlpNetwork]:
        return {"actor": self.actor, "critic1": self.critic1, "critic2": self.critic2}

    def target_networks(self) -> dict[str, MlpNetwork]:
        return {"actor": self.actor_target, "critic1": self.critic1_target,
                "critic2": self.critic2_target}

    def optimizers(self) -> dict[str, Adam]:
        return {"actor": self.actor_opt, "critic1": self.critic1_opt,
                "critic2": self.critic2_opt}


def build_agent(scenario: ScenarioConfig, rng: np.random.Generator, kind: str | None = None):
    kind = kind or scenario.agent.kind
    obs_dim = scenario.observation_dim
    if kind == "td3":
        return Td3Agent(obs_dim, scenario.num_rus, scenario.agent, rng)
    if kind == "dqn_single":
        return DqnAgent(obs_dim, scenario.num_rus, "single", scenario.agent, rng)
    if kind == "dqn_multi":
        return DqnAgent(obs_dim, scenario.num_rus, "multi", scenario.agent, rng)
    raise ValueError(f"unknown agent kind {kind!r}")


def policy_modes(agent, env: SleepModeEnv, obs, explore: bool,
                 rng: np.random.Generator | None):
    """Pick this step's mode vector and the value to store in the replay buffer."""
    if isinstance(agent, Td3Agent):
        cont, binary = agent.select_action(obs, explore, rng)
        stored = cont if agent.params.store_continuous_actions else binary.astype(float)
        return binary, stored
    action = agent.select_action(obs, explore, rng)
    return agent.modes_for_action(action, env.current_modes()), action


class _EpisodeTally:
    __slots__ = ("reward", "power", "unsat", "on", "switches", "steps")

    def __init__(self):
        self.reward = 0.0
        self.power = 0.0
        self.unsat = 0
        self.on = 0
        self.switches = 0
        self.steps = 0

    def add(self, reward: float, power: float, unsat: int, on: int, switches: int) -> None:
        self.reward += reward
        self.power += power
        self.unsat += unsat
        self.on += on
        self.switches += switches
        self.steps += 1

    def finalize(self, episode: int, num_ues: int, num_rus: int, dt: float) -> EpisodeMetrics:
        t = self.steps
        return EpisodeMetrics(
            episode=episode,
            mean_reward=self.reward / t,
            energy_j=self.power * dt,
            mean_power_w=self.power / t,
            unsat_frac=self.unsat / (t * num_ues),
            on_frac=self.on / (t * num_rus),
            switch_count=self.switches,
        )


class TrainingLoop:
    """One agent interacting with one environment; used standalone (centralized)
    and as a federated region. Seed streams for env, init, exploration and replay
    sampling are spawned independently, so disabling learning does not disturb
    the trajectory."""

    def __init__(self, scenario: ScenarioConfig, seed: int | np.random.SeedSequence = 0,
                 episodes: int | None = None, agent_kind: str | None = None):
        self.scenario = scenario.validate()
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        env_ss, init_ss, act_ss, sample_ss = ss.spawn(4)
        self.env = SleepModeEnv(scenario, np.random.default_rng(env_ss))
        self.agent = build_agent(scenario, np.random.default_rng(init_ss), agent_kind)
        self.act_rng = np.random.default_rng(act_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        params = scenario.agent
        if isinstance(self.agent, Td3Agent):
            action_shape: tuple[int, ...] = (scenario.num_rus,)
            action_dtype = np.float64
        else:
            action_shape = ()
            action_dtype = np.int64
        self.buffer = ReplayBuffer(params.buffer_capacity, scenario.observation_dim,
                                   action_shape, action_dtype)
        self.episodes = episodes if episodes is not None else scenario.episodes
        self.learning_enabled = True
        self.metrics: list[EpisodeMetrics] = []
        self._obs: np.ndarray | None = None
        self._tally: _EpisodeTally | None = None
        self._episode_index = 0

    def begin_episode(self) -> None:
        self.agent.set_episode(self._episode_index, self.episodes)
        self._obs = self.env.reset()
        self._tally = _EpisodeTally()

    def step_once(self) -> bool:
        """One interact-store-learn step; returns the episode's done flag."""
        modes, stored = policy_modes(self.agent, self.env, self._obs, True, self.act_rng)
        out = self.env.step(modes)
        self.buffer.add(self._obs, stored, out.reward, out.observation, out.done)
        if self.learning_enabled and len(self.buffer) >= self.agent.batch_size:
            self.agent.learn(self.buffer, self.sample_rng)
        self._tally.add(
            out.reward, out.power_total_w, out.unsatisfied_count,
            int(self.env.current_modes().sum()), self.env.switch_on_count(),
        )
        self._obs = out.observation
        return out.done

    def end_episode(self) -> EpisodeMetrics:
        m = self._tally.finalize(
            self._episode_index, self.scenario.num_ues, self.scenario.num_rus,
            self.scenario.time_step_s,
        )
        self.metrics.append(m)
        self._episode_index += 1
        return m

    def run_episode(self) -> EpisodeMetrics:
        self.begin_episode()
        done = False
        while not done:
            done = self.step_once()
        return self.end_episode()

    def run(self, progress_every: int = 0) -> list[EpisodeMetrics]:
        for ep in range(self.episodes):
            m = self.run_episode()
            if progress_every and (ep + 1) % progress_every == 0:
                print(
                    f"episode {ep + 1}/{self.episodes} "
                    f"reward {m.mean_reward:.4f} power {m.mean_power_w:.2f} W",
                    flush=True,
                )
        return self.metrics


def train_centralized(scenario: ScenarioConfig, seed: int | None = None,
                      episodes: int | None = None, agent_kind: str | None = None,
                      progress_every: int = 0) -> TrainingLoop:
    """Train one agent on one environment; returns the finished loop."""
    loop = TrainingLoop(
        scenario,
        seed=scenario.seed if seed is None else seed,
        episodes=episodes,
        agent_kind=agent_kind,
    )
    loop.run(progress_every=progress_every)
    return loop


def evaluate_policy(scenario: ScenarioConfig, agent, episodes: int | None = None,
                    seed: int | None = None) -> list[EpisodeMetrics]:
    """Greedy rollouts (no exploration noise) on a freshly seeded environment."""
    episodes = episodes if episodes is not None else scenario.eval_episodes
    base = scenario.seed if seed is None else seed
    env = SleepModeEnv(scenario, np.random.default_rng(np.random.SeedSequence([base, EVAL_STREAM_TAG])))
    results = []
    for ep in range(episodes):
        obs = env.reset()
        tally = _EpisodeTally()
        done = False
        while not done:
            modes, _ = policy_modes(agent, env, obs, False, None)
            out = env.step(modes)
            tally.add(out.reward, out.power_total_w, out.unsatisfied_count,
                      int(env.current_modes().sum()), env.switch_on_count())
            obs = out.observation
            done = out.done
        results.append(tally.finalize(ep, scenario.num_ues, scenario.num_rus, scenario.time_step_s))
    return results
