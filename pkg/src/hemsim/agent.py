"""Actor-critic training with replay memory and target networks, plus greedy rollouts.

Training runs day-long episodes over the training window, cycling the start
day round-robin.  Exploration substitutes a uniform random action with
probability xi, which stays at 1 until the replay memory can fill and then
decays linearly to a floor.  Once the memory holds a full mini-batch, every
slot performs one critic regression step toward the target-network Bellman
value, one ascent step on the sampled policy gradient, and a soft update of
both targets.

States enter the networks normalized to [0, 1]^7; actions are stored in the
memory in normalized form (storage channel / max rate, HVAC channel / max
power), unclipped, exactly as the actor emits them.
"""

from __future__ import annotations

import math
from contextlib import nullcontext
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .env import Action, EnvState, HomeConfig, RawAction, reset, step
from .nn import Mlp, MlpSpec, NumericError, adam_update, backward, forward, init_mlp, soft_update
from .traces import HOURS_PER_DAY, N_STATE_CHANNELS, NormStats, TraceSet, compute_norm_stats, preprocess


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults are the full-scale study settings.

    ``desk_scale`` gives a configuration sized for quick runs: fewer episodes
    with the replay capacity and exploration decay rescaled so the schedule
    keeps its shape (full exploration until the memory can fill, then a
    linear decay to the floor).
    """

    episodes: int = 3000
    slots_per_episode: int = 24
    batch_size: int = 120
    buffer_size: int = 24000
    gamma: float = 0.995
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    explore_decay: float = 0.0005
    explore_floor: float = 0.1
    actor_hidden: tuple[int, ...] = (300, 600)
    critic_hidden: tuple[int, ...] = (300, 600, 600, 600)
    seed: int = 0
    # Batch-120 hidden-width-600 GEMMs are too small for BLAS threading to
    # pay off; 0 leaves the library default.
    blas_threads: int = 1

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")
        if self.batch_size > self.buffer_size:
            raise ValueError("batch_size cannot exceed buffer_size")
        if self.slots_per_episode <= 0 or HOURS_PER_DAY % self.slots_per_episode != 0:
            raise ValueError("slots_per_episode must divide 24")
        if self.episodes <= 0:
            raise ValueError("episodes must be positive")
        if not 0 <= self.explore_floor <= 1:
            raise ValueError("explore_floor must be in [0, 1]")

    @classmethod
    def desk_scale(cls, episodes: int = 500, seed: int = 0, **overrides) -> "TrainConfig":
        kwargs = dict(episodes=episodes, buffer_size=2400, explore_decay=0.003, seed=seed)
        kwargs.update(overrides)
        return cls(**kwargs)


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring of transitions in flat float64 arrays."""

    def __init__(self, capacity: int, state_dim: int = N_STATE_CHANNELS, action_dim: int = 2):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.empty((capacity, state_dim))
        self.actions = np.empty((capacity, action_dim))
        self.rewards = np.empty(capacity)
        self.next_states = np.empty((capacity, state_dim))
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def push(self, s_norm, action_norm, reward: float, s_next_norm) -> None:
        if not math.isfinite(reward):
            raise NumericError(f"non-finite reward {reward}")
        i = self.inserted % self.capacity
        self.states[i] = s_norm
        self.actions[i] = action_norm
        self.rewards[i] = reward
        self.next_states[i] = s_next_norm
        self.inserted += 1

    def sample(self, k: int, rng: np.random.Generator) -> Batch:
        n = len(self)
        if n < k:
            raise ValueError(f"buffer holds {n} transitions, need {k}")
        idx = rng.integers(0, n, size=k)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


def exploration_prob(episode: int, config: TrainConfig) -> float:
    """Probability of acting randomly: 1 until the memory can fill
    (buffer_size / slots_per_episode episodes), then linear decay to the floor."""
    if episode < 0:
        raise ValueError("episode must be >= 0")
    fill_episodes = config.buffer_size / config.slots_per_episode
    xi = 1.0 - config.explore_decay * max(0.0, episode - fill_episodes)
    return min(1.0, max(config.explore_floor, xi))


def make_actor(config: TrainConfig, seed: int) -> Mlp:
    spec = MlpSpec((N_STATE_CHANNELS, *config.actor_hidden, 2),
                   output_activations=("tanh", "sigmoid"), seed=seed)
    return init_mlp(spec)


def make_critic(config: TrainConfig, seed: int) -> Mlp:
    spec = MlpSpec((N_STATE_CHANNELS + 2, *config.critic_hidden, 1),
                   output_activations=("identity",), seed=seed)
    return init_mlp(spec)


def scale_action(a_norm, home: HomeConfig) -> Action:
    """Normalized network output -> physical action."""
    return Action(float(a_norm[0]) * home.ess_kw_scale, float(a_norm[1]) * home.hvac_max_kw)


def select_action_train(actor: Mlp, s_norm: np.ndarray, episode: int,
                        rng: np.random.Generator, config: TrainConfig,
                        home: HomeConfig):
    """Exploration branch-switch: with probability xi draw a uniform random
    normalized action, otherwise use the actor.  Returns the physical action
    and the normalized form that goes into the replay memory."""
    xi = exploration_prob(episode, config)
    if rng.uniform(0.0, 1.0) > xi:
        a_norm, _ = forward(actor, s_norm)
        a_norm = np.asarray(a_norm, dtype=np.float64)
    else:
        scale = home.ess_kw_scale
        if scale > 0:
            f_norm = rng.uniform(-home.discharge_max_kw / scale, home.charge_max_kw / scale)
        else:
            f_norm = 0.0
        a_norm = np.array([f_norm, rng.uniform(0.0, 1.0)])
    return scale_action(a_norm, home), a_norm


def critic_update(critic: Mlp, critic_target: Mlp, actor_target: Mlp,
                  batch: Batch, config: TrainConfig) -> float:
    """One mean-squared-error step toward the target-network Bellman values.

    Targets use only the target networks, so zeroing those decouples the
    regression from the online weights entirely."""
    a_next, _ = forward(actor_target, batch.next_states)
    q_next, _ = forward(critic_target, np.hstack([batch.next_states, a_next]))
    y = batch.rewards + config.gamma * q_next[:, 0]
    q, cache = forward(critic, np.hstack([batch.states, batch.actions]))
    err = q[:, 0] - y
    loss = float(np.mean(err * err))
    if not math.isfinite(loss):
        raise NumericError(f"critic loss is {loss}")
    k = len(batch.rewards)
    grads, _ = backward(critic, cache, (2.0 / k) * err[:, None], need_input_grad=False)
    adam_update(critic, grads, config.critic_lr)
    return loss


def actor_update(actor: Mlp, critic: Mlp, batch: Batch, config: TrainConfig) -> None:
    """Ascend the sampled policy gradient: push actor outputs in the
    direction that raises the critic's value at a = actor(s)."""
    a, cache_a = forward(actor, batch.states)
    _, cache_c = forward(critic, np.hstack([batch.states, a]))
    k = batch.states.shape[0]
    d_q = np.full((k, 1), -1.0 / k)   # minimize -mean Q
    _, d_in = backward(critic, cache_c, d_q, need_param_grads=False)
    d_a = np.ascontiguousarray(d_in[:, batch.states.shape[1]:])
    grads, _ = backward(actor, cache_a, d_a, need_input_grad=False)
    adam_update(actor, grads, config.actor_lr)


@dataclass(frozen=True)
class TrainReport:
    episode_rewards: np.ndarray
    moving_avg: np.ndarray           # mean of the trailing 50 episodes
    actor: Mlp
    critic: Mlp
    norm_stats: NormStats
    config: TrainConfig


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    out = np.empty_like(values, dtype=np.float64)
    csum = np.cumsum(values, dtype=np.float64)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def train(traces: TraceSet, home: HomeConfig, config: TrainConfig,
          train_slots: Optional[int] = None) -> TrainReport:
    """Run the full training loop; deterministic for a fixed config seed."""
    limits = threadpool_limits(limits=config.blas_threads, user_api="blas") \
        if config.blas_threads > 0 else nullcontext()
    with limits:
        return _train_loop(traces, home, config, train_slots)


def _train_loop(traces: TraceSet, home: HomeConfig, config: TrainConfig,
                train_slots: Optional[int]) -> TrainReport:
    if train_slots is None:
        train_slots = traces.horizon_len
    if train_slots < HOURS_PER_DAY or train_slots % HOURS_PER_DAY or train_slots > traces.horizon_len:
        raise ValueError(f"train_slots {train_slots} must be whole days within the trace")
    n_days = train_slots // HOURS_PER_DAY
    stats = compute_norm_stats(traces.window(0, train_slots), home)

    root = np.random.default_rng(config.seed)
    actor = make_actor(config, int(root.integers(0, 2**63 - 1)))
    critic = make_critic(config, int(root.integers(0, 2**63 - 1)))
    explore_rng = np.random.default_rng(int(root.integers(0, 2**63 - 1)))
    sample_rng = np.random.default_rng(int(root.integers(0, 2**63 - 1)))
    env_rng = np.random.default_rng(int(root.integers(0, 2**63 - 1)))
    actor_target = actor.copy()
    critic_target = critic.copy()

    buf = ReplayBuffer(config.buffer_size)
    rewards = np.empty(config.episodes)
    for ep in range(config.episodes):
        state = reset(home, traces, (ep % n_days) * HOURS_PER_DAY)
        s_norm = preprocess(state, stats)
        total = 0.0
        for slot in range(config.slots_per_episode):
            try:
                raw, a_norm = select_action_train(actor, s_norm, ep, explore_rng, config, home)
                outcome = step(state, raw, traces, home, env_rng)
                s_next_norm = preprocess(outcome.next_state, stats)
                buf.push(s_norm, a_norm, outcome.reward, s_next_norm)
                if len(buf) >= config.batch_size:
                    batch = buf.sample(config.batch_size, sample_rng)
                    critic_update(critic, critic_target, actor_target, batch, config)
                    actor_update(actor, critic, batch, config)
                    soft_update(critic_target, critic, config.tau)
                    soft_update(actor_target, actor, config.tau)
            except NumericError as exc:
                raise NumericError(f"episode {ep}, slot {slot}: {exc}") from exc
            total += outcome.reward
            state = outcome.next_state
            s_norm = s_next_norm
        rewards[ep] = total

    return TrainReport(rewards, moving_average(rewards, 50), actor, critic, stats, config)


@dataclass(frozen=True)
class EpisodeLog:
    """Per-slot record of one rollout, plus the totals the studies compare."""

    slot: np.ndarray
    hour: np.ndarray
    price: np.ndarray
    solar_kw: np.ndarray
    demand_kw: np.ndarray
    ess_kw: np.ndarray
    hvac_kw: np.ndarray
    grid_kw: np.ndarray
    ess_kwh: np.ndarray       # stored energy after the slot
    indoor_f: np.ndarray      # indoor temperature after the slot
    energy_cost: np.ndarray
    wear_cost: np.ndarray
    discomfort: np.ndarray
    reward: np.ndarray

    @property
    def total_cost(self) -> float:
        """Energy cost plus battery wear over the window, in dollars."""
        return float(self.energy_cost.sum() + self.wear_cost.sum())

    @property
    def total_discomfort(self) -> float:
        """Accumulated degrees outside the comfort band (degF * slots)."""
        return float(self.discomfort.sum())

    @property
    def total_reward(self) -> float:
        return float(self.reward.sum())


PolicyFn = Callable[[EnvState], RawAction]


def rollout(policy: PolicyFn, traces: TraceSet, home: HomeConfig,
            start_slot: int, n_slots: int,
            rng: Optional[np.random.Generator] = None) -> EpisodeLog:
    """Drive any state->action policy through the environment and log it."""
    if n_slots <= 0 or start_slot + n_slots > traces.horizon_len:
        raise ValueError(f"window [{start_slot}, {start_slot + n_slots}) outside horizon {traces.horizon_len}")
    state = reset(home, traces, start_slot)
    cols = {name: np.empty(n_slots) for name in (
        "price", "solar_kw", "demand_kw", "ess_kw", "hvac_kw", "grid_kw",
        "ess_kwh", "indoor_f", "energy_cost", "wear_cost", "discomfort", "reward")}
    slots = np.arange(start_slot, start_slot + n_slots)
    for i in range(n_slots):
        raw = policy(state)
        out = step(state, raw, traces, home, rng)
        cols["price"][i] = state.price_buy
        cols["solar_kw"][i] = state.solar_kw
        cols["demand_kw"][i] = state.demand_kw
        cols["ess_kw"][i] = out.action.ess_kw
        cols["hvac_kw"][i] = out.action.hvac_kw
        cols["grid_kw"][i] = out.grid_kw
        cols["ess_kwh"][i] = out.next_state.ess_kwh
        cols["indoor_f"][i] = out.next_state.indoor_f
        cols["energy_cost"][i] = out.energy_cost
        cols["wear_cost"][i] = out.wear_cost
        cols["discomfort"][i] = out.discomfort
        cols["reward"][i] = out.reward
        state = out.next_state
    return EpisodeLog(slot=slots, hour=slots % HOURS_PER_DAY, **cols)


def greedy_policy(actor: Mlp, stats: NormStats, home: HomeConfig) -> PolicyFn:
    """Noise-free policy: scale the actor's normalized output to physical units."""

    def policy(state: EnvState) -> RawAction:
        a_norm, _ = forward(actor, preprocess(state, stats))
        return scale_action(a_norm, home)

    return policy


def evaluate(actor: Mlp, traces: TraceSet, home: HomeConfig, start_slot: int,
             n_slots: int, stats: NormStats,
             rng: Optional[np.random.Generator] = None) -> EpisodeLog:
    """Greedy rollout of a trained actor over a trace window."""
    return rollout(greedy_policy(actor, stats, home), traces, home, start_slot, n_slots, rng)
