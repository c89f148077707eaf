"""Deep deterministic policy gradient optimizer for the joint design.

Four networks (training/target actor and critic), a FIFO replay buffer,
one-step TD critic updates, deterministic policy-gradient actor updates
driven by the critic's action-input gradient, and soft target tracking.
The agent searches for the beamformer/phase pair with the best instant
sum rate rather than a policy meant to generalize across channels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .env import (
    JointAction,
    SystemConfig,
    build_state,
    decode_action,
    env_step,
    generate_channels,
    init_action,
)
from .metrics import RunSummary, average_reward
from .nn import AdamState, DenseNet, Whitener, adam_step


@dataclass
class Hyperparams:
    """Training hyper-parameters.

    The defaults are the full-scale settings; experiment drivers shrink
    ``episodes``/``steps_per_episode`` to desk scale.  ``exploration_std``
    is the per-component std of the Gaussian noise added to the raw actor
    output (set it to 0 for the purely deterministic policy), annealed by
    ``exploration_decay`` once per episode.
    """

    gamma: float = 0.99
    mu_c: float = 0.001
    mu_a: float = 0.001
    tau_c: float = 0.001
    tau_a: float = 0.001
    lambda_c: float = 1e-5
    lambda_a: float = 1e-5
    buffer_capacity: int = 100_000
    episodes: int = 5000
    steps_per_episode: int = 20_000
    minibatch: int = 16
    sync_every: int = 1
    exploration_std: float = 0.25
    exploration_decay: float = 0.995
    warmup_steps: int | None = None
    hidden_width: int | None = None
    # the policy gradient flows through the target critic by default;
    # flip this to use the training critic instead
    actor_grad_uses_target_critic: bool = True
    early_stop: bool = False
    early_stop_window: int = 2000
    early_stop_min_improve: float = 1e-4

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        if not (0.0 < self.tau_c <= 1.0 and 0.0 < self.tau_a <= 1.0):
            raise ValueError("tau must lie in (0, 1]")
        if self.minibatch > self.buffer_capacity:
            raise ValueError("minibatch cannot exceed buffer capacity")
        for name in ("buffer_capacity", "episodes", "steps_per_episode",
                     "minibatch", "sync_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.warmup_steps is None:
            self.warmup_steps = 2 * self.minibatch


@dataclass
class Experience:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring of experiences with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = int(capacity)
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._cursor = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def push(self, s, a, r, s_next) -> None:
        i = self._cursor
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s_next
        self._cursor = (i + 1) % self.capacity
        self._count = min(self._count + 1, self.capacity)

    def sample(self, size: int, rng: np.random.Generator):
        if self._count < 1:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._count, size=size)
        return self._s[idx], self._a[idx], self._r[idx], self._s2[idx]


def _hidden_width(cfg: SystemConfig, override: int | None) -> int:
    """Smallest power of two strictly above the widest interface of either
    network (the critic sees state and action together)."""
    if override is not None:
        return int(override)
    widest = max(cfg.state_dim + cfg.action_dim, cfg.action_dim, 1)
    return 1 << int(widest).bit_length()


@dataclass
class EpisodeLog:
    rewards: np.ndarray
    best_reward: float
    best_action: JointAction
    channels: object = field(repr=False, default=None)


class Agent:
    """Training state bundle: the four networks, their optimizers, the
    input whitener, the replay buffer and the best action seen so far."""

    def __init__(self, cfg: SystemConfig, hyper: Hyperparams, rng: np.random.Generator):
        self.cfg = cfg
        self.hyper = hyper
        width = _hidden_width(cfg, hyper.hidden_width)
        ds, da = cfg.state_dim, cfg.action_dim
        self.actor_train = DenseNet((ds, width, width, da), head="tanh", rng=rng)
        self.critic_train = DenseNet((ds, width, width, 1), head="linear",
                                     aux_dim=da, aux_layer=1, rng=rng)
        # targets start as exact copies of the training twins
        self.actor_target = self.actor_train.clone()
        self.critic_target = self.critic_train.clone()
        self.opt_a = AdamState.for_params(self.actor_train.parameters(),
                                          base_lr=hyper.mu_a, decay=hyper.lambda_a)
        self.opt_c = AdamState.for_params(self.critic_train.parameters(),
                                          base_lr=hyper.mu_c, decay=hyper.lambda_c)
        self.whitener = Whitener(ds)
        self.buffer = ReplayBuffer(hyper.buffer_capacity, ds, da)
        self.best_reward = -np.inf
        self.best_action: JointAction | None = None
        self.exploration_std_current = hyper.exploration_std
        self.total_steps = 0

    # ------------------------------------------------------------------
    def select_action(self, state: np.ndarray, rng: np.random.Generator,
                      explore: bool = True):
        """Raw actor output (plus exploration noise) and its feasible
        decoding.  The raw vector is what gets stored and learned from;
        the decoded action is what the environment executes."""
        s = self.whitener.apply(state)
        raw = self.actor_train.forward(s, train=False)
        if explore and self.exploration_std_current > 0.0:
            raw = raw + rng.normal(0.0, self.exploration_std_current, size=raw.shape)
        return raw, decode_action(raw, self.cfg)

    def critic_target_value(self, r, s_next):
        """Bootstrapped TD target ``r + gamma * q_target(s', actor_target(s'))``."""
        s2 = self.whitener.apply(np.atleast_2d(s_next))
        a2 = self.actor_target.forward(s2, train=False)
        q2 = self.critic_target.forward(s2, aux=a2, train=False)
        y = np.asarray(r, dtype=float) + self.hyper.gamma * q2.ravel()
        return float(y[0]) if np.isscalar(r) else y

    def update_critic(self, batch) -> float:
        """One Adam step on the training critic against the TD targets.
        Returns the pre-step mean squared TD error."""
        s, a, r, s2 = batch
        w = self.hyper.minibatch
        if s.shape[0] != w:
            raise ValueError(f"expected a minibatch of {w}, got {s.shape[0]}")
        y = self.critic_target_value(r, s2)
        sw = self.whitener.apply(s)
        q, cache = self.critic_train.forward(sw, aux=a, train=True, want_cache=True)
        err = q.ravel() - y
        loss = float(np.mean(err ** 2))
        grads, _, _ = self.critic_train.backward(cache, (2.0 / w) * err[:, None])
        adam_step(self.critic_train.parameters(), grads, self.opt_c)
        return loss

    def update_actor(self, states) -> float:
        """Ascend the batch-mean critic value of the actor's own actions.
        The critic only supplies the action gradient; its parameters stay
        untouched.  Returns the pre-step objective."""
        w = states.shape[0] if states.ndim == 2 else 1
        if w != self.hyper.minibatch:
            raise ValueError(f"expected a minibatch of {self.hyper.minibatch}, got {w}")
        sw = self.whitener.apply(states)
        a_pred, cache_a = self.actor_train.forward(sw, train=True, want_cache=True)
        critic = (self.critic_target if self.hyper.actor_grad_uses_target_critic
                  else self.critic_train)
        q, cache_q = critic.forward(sw, aux=a_pred, train=False, want_cache=True)
        # seed with -1/W so the minimizing Adam step ascends the objective
        _, _, daux = critic.backward(cache_q, np.full((w, 1), -1.0 / w))
        grads, _, _ = self.actor_train.backward(cache_a, daux)
        adam_step(self.actor_train.parameters(), grads, self.opt_a)
        return float(q.mean())

    def soft_update(self) -> None:
        self.critic_target.blend_from(self.critic_train, self.hyper.tau_c)
        self.actor_target.blend_from(self.actor_train, self.hyper.tau_a)

    # ------------------------------------------------------------------
    def run_episode(self, channels, rng: np.random.Generator,
                    steps: int | None = None) -> EpisodeLog:
        """One episode on fixed channels, starting from the identity
        action.  Stores every transition, trains once warm, and tracks
        the best instant reward ever seen."""
        hp = self.hyper
        steps = hp.steps_per_episode if steps is None else int(steps)
        action = init_action(self.cfg)
        state = build_state(action, channels, self.cfg)
        self.whitener.apply(state, update=True)
        rewards = np.zeros(steps)
        best_step = 0
        done = 0
        for t in range(steps):
            raw, action = self.select_action(state, rng)
            reward, nxt = env_step(action, channels, self.cfg)
            self.whitener.apply(nxt, update=True)
            self.buffer.push(state, raw, reward, nxt)
            rewards[t] = reward
            if reward > self.best_reward + hp.early_stop_min_improve:
                best_step = t
            if reward > self.best_reward:
                self.best_reward = reward
                self.best_action = action
            self.total_steps += 1
            if len(self.buffer) >= hp.warmup_steps:
                s, a, r, s2 = self.buffer.sample(hp.minibatch, rng)
                self.update_critic((s, a, r, s2))
                self.update_actor(s)
                if self.total_steps % hp.sync_every == 0:
                    self.soft_update()
            state = nxt
            done = t + 1
            if hp.early_stop and t - best_step >= hp.early_stop_window:
                break
        return EpisodeLog(rewards=rewards[:done], best_reward=self.best_reward,
                          best_action=self.best_action, channels=channels)


def _summarize(agent: Agent, logs: list[EpisodeLog], cfg, hyper, elapsed) -> RunSummary:
    instant = np.concatenate([log.rewards for log in logs])
    return RunSummary(
        instant_rewards=instant,
        average_rewards=average_reward(instant),
        best_sum_rate=agent.best_reward,
        best_action=agent.best_action,
        wall_seconds=elapsed,
        seed=cfg.seed,
        config={"system": vars(cfg).copy(), "hyper": vars(hyper).copy()},
        episodes=logs,
        agent=agent,
    )


def train(cfg: SystemConfig, hyper: Hyperparams, rng: np.random.Generator) -> RunSummary:
    """Full training run: channels are redrawn at the start of every
    episode and the networks persist across episodes."""
    t0 = time.perf_counter()
    agent = Agent(cfg, hyper, rng)
    logs = []
    for ep in range(hyper.episodes):
        agent.exploration_std_current = (
            hyper.exploration_std * hyper.exploration_decay ** ep)
        channels = generate_channels(cfg, rng)
        logs.append(agent.run_episode(channels, rng))
    return _summarize(agent, logs, cfg, hyper, time.perf_counter() - t0)


def optimize_for_channels(cfg: SystemConfig, hyper: Hyperparams, channels,
                          rng: np.random.Generator) -> RunSummary:
    """Per-realization variant of :func:`train`: every episode reuses the
    same given channels, so the run optimizes one fading draw."""
    t0 = time.perf_counter()
    agent = Agent(cfg, hyper, rng)
    logs = []
    for ep in range(hyper.episodes):
        agent.exploration_std_current = (
            hyper.exploration_std * hyper.exploration_decay ** ep)
        logs.append(agent.run_episode(channels, rng))
    return _summarize(agent, logs, cfg, hyper, time.perf_counter() - t0)
