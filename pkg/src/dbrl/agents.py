"""Deep agents for continuous control under decision budgets.

Building blocks:

* ``ReplayBuffer``      uniform ring buffer over fixed-width transitions
* ``Td3Core``           twin-critic deterministic actor learner
* ``DqnLearner``        small discrete Q-head (used for the gate and for
                        learned repeat lengths)

Agents implementing the episode protocol from :mod:`dbrl.core`:

* ``td3``      one decision per step
* ``td3_ea``   every chosen action committed for a fixed number of steps
* ``temporl``  learned per-decision repeat length (skip Q-network)
* ``tla``      layered agent: slow actor every ``tau`` steps, per-step
               fast actor, and a binary gate choosing per window which
               layer drives

Decision and MAC accounting follows the core rule: one decision per
state read that commits actions; each network forward performed while
selecting an action charges its MAC count.  All networks are
input-256-256-output MLPs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .neural import (
    Adam,
    MlpNetwork,
    backward,
    count_macs,
    forward,
    forward_cached,
    load_network,
    mlp_init,
    save_network,
    soft_update,
)

HIDDEN = 256


@dataclass
class DeepParams:
    """Hyperparameters shared by the deep agents.

    Noise scales (`exploration_noise`, `policy_noise`, `noise_clip`) are in
    units of the environment's action bound.
    """

    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 256
    rho: float = 0.005  # soft-update rate for every target network
    exploration_noise: float = 0.1
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    buffer_capacity: int = 1_000_000
    warmup_steps: int = 1_000
    tau: int = 6  # window length (tla), repeat length (td3_ea), max skip (temporl)
    p: float = 1.0  # energy penalty per gated step
    j: float = 1.0  # consistency penalty weight
    gate_epsilon: float = 0.1
    gate_penalty_uses_j: bool = False
    zero_slow_on_fast: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling.

    ``next_state`` may have a different width than ``state`` (the gate
    stores its concatenated input as the state but a raw observation as
    the next state).  ``steps`` records the number of env steps a
    transition spans, for multi-step discounting.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int, next_state_dim: int | None = None):
        nd = state_dim if next_state_dim is None else next_state_dim
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim), np.float32)
        self.actions = np.zeros((self.capacity, action_dim), np.float32)
        self.rewards = np.zeros(self.capacity, np.float32)
        self.next_states = np.zeros((self.capacity, nd), np.float32)
        self.dones = np.zeros(self.capacity, np.float32)
        self.steps = np.ones(self.capacity, np.int32)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, state, action, reward, next_state, done, steps: int = 1) -> None:
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.steps[i] = steps
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
            self.steps[idx],
        )


class Td3Core:
    """Deterministic actor with twin critics, target networks, and
    delayed policy updates."""

    def __init__(self, obs_dim: int, a_dim: int, a_max: float, params: DeepParams, rng: RngStream):
        self.obs_dim = obs_dim
        self.a_dim = a_dim
        self.a_max = float(a_max)
        self.params = params
        self.actor = mlp_init([obs_dim, HIDDEN, HIDDEN, a_dim], rng.substream("actor"), head="tanh", a_max=self.a_max)
        self.critic1 = mlp_init([obs_dim + a_dim, HIDDEN, HIDDEN, 1], rng.substream("critic1"))
        self.critic2 = mlp_init([obs_dim + a_dim, HIDDEN, HIDDEN, 1], rng.substream("critic2"))
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.opt_actor = Adam(lr=params.lr)
        self.opt_critic1 = Adam(lr=params.lr)
        self.opt_critic2 = Adam(lr=params.lr)
        self.train_calls = 0

    def select(self, obs, noise_rng: np.random.Generator | None = None) -> np.ndarray:
        """Policy action; Gaussian exploration noise when a stream is given."""
        a = forward(self.actor, np.asarray(obs, np.float32))
        if noise_rng is not None:
            a = a + noise_rng.normal(0.0, self.params.exploration_noise * self.a_max, size=a.shape)
        return np.clip(a, -self.a_max, self.a_max).astype(np.float32)

    def target_action(self, next_states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Target-policy action with clipped smoothing noise."""
        p = self.params
        a2 = forward(self.actor_target, next_states)
        noise = np.clip(
            rng.normal(0.0, p.policy_noise * self.a_max, size=a2.shape),
            -p.noise_clip * self.a_max,
            p.noise_clip * self.a_max,
        )
        return np.clip(a2 + noise, -self.a_max, self.a_max).astype(np.float32)

    def train_step(self, buffer: ReplayBuffer, rng: np.random.Generator) -> None:
        p = self.params
        if len(buffer) < p.batch_size:
            return
        s, a, r, s2, d, steps = buffer.sample(p.batch_size, rng)
        a2 = self.target_action(s2, rng)
        x2 = np.concatenate([s2, a2], axis=1)
        q1t = forward(self.critic1_target, x2)[:, 0]
        q2t = forward(self.critic2_target, x2)[:, 0]
        gamma_k = (p.gamma ** steps).astype(np.float32)
        y = r + gamma_k * (1.0 - d) * np.minimum(q1t, q2t)
        x = np.concatenate([s, a], axis=1)
        for critic, opt in ((self.critic1, self.opt_critic1), (self.critic2, self.opt_critic2)):
            q, cache = forward_cached(critic, x)
            gy = ((2.0 / p.batch_size) * (q[:, 0] - y)).astype(critic.dtype)
            gw, gb, _ = backward(critic, cache, gy[:, None])
            opt.step(critic, gw, gb)
        self.train_calls += 1
        if self.train_calls % p.policy_delay == 0:
            pi, acache = forward_cached(self.actor, s)
            xq = np.concatenate([s, pi], axis=1)
            _, qcache = forward_cached(self.critic1, xq)
            gq = np.full((p.batch_size, 1), -1.0 / p.batch_size, dtype=self.critic1.dtype)
            _, _, gx = backward(self.critic1, qcache, gq)
            gw, gb, _ = backward(self.actor, acache, gx[:, self.obs_dim :])
            self.opt_actor.step(self.actor, gw, gb)
            soft_update(self.actor_target, self.actor, p.rho)
            soft_update(self.critic1_target, self.critic1, p.rho)
            soft_update(self.critic2_target, self.critic2, p.rho)

    def networks(self) -> dict:
        return {"actor": self.actor, "critic1": self.critic1, "critic2": self.critic2}


class DqnLearner:
    """Q-network over a fixed input with a small discrete output head."""

    def __init__(self, in_dim: int, n_out: int, params: DeepParams, rng: RngStream, epsilon: float):
        self.q = mlp_init([in_dim, HIDDEN, HIDDEN, n_out], rng.substream("q"))
        self.q_target = self.q.copy()
        self.opt = Adam(lr=params.lr)
        self.params = params
        self.n_out = n_out
        self.epsilon = epsilon

    def select(self, x, eps_rng: np.random.Generator | None = None) -> int:
        """Greedy output index; epsilon-random when a stream is given."""
        if eps_rng is not None and eps_rng.random() < self.epsilon:
            return int(eps_rng.integers(self.n_out))
        return int(np.argmax(forward(self.q, np.asarray(x, np.float32))))

    def train_step(self, buffer: ReplayBuffer, next_input_fn, rng: np.random.Generator) -> None:
        """One Q-learning step; bootstrap inputs come from `next_input_fn`,
        which maps the stored next observations to Q-network inputs."""
        p = self.params
        if len(buffer) < p.batch_size:
            return
        s, a, r, s2, d, steps = buffer.sample(p.batch_size, rng)
        x2 = np.asarray(next_input_fn(s2), np.float32)
        qt = forward(self.q_target, x2)
        gamma_k = (p.gamma ** steps).astype(np.float32)
        y = r + gamma_k * (1.0 - d) * qt.max(axis=1)
        q, cache = forward_cached(self.q, s)
        rows = np.arange(p.batch_size)
        idx = a[:, 0].astype(np.int64)
        gy = np.zeros_like(q)
        gy[rows, idx] = ((2.0 / p.batch_size) * (q[rows, idx] - y)).astype(q.dtype)
        gw, gb, _ = backward(self.q, cache, gy)
        self.opt.step(self.q, gw, gb)
        soft_update(self.q_target, self.q, p.rho)


def _obs_dim(env) -> int:
    return int(env.obs_dim)


def _random_action(rng: np.random.Generator, a_dim: int, a_max: float) -> np.ndarray:
    return rng.uniform(-a_max, a_max, size=a_dim).astype(np.float32)


class Td3Agent:
    """Per-step continuous control; one decision and one actor forward per step."""

    def __init__(self, env, params: DeepParams, rng: RngStream):
        spec = env.action_spec
        self.params = params
        self.core = Td3Core(_obs_dim(env), spec.dim, spec.a_max, params, rng.child("td3"))
        self.buffer = ReplayBuffer(params.buffer_capacity, _obs_dim(env), spec.dim)
        self._explore = rng.substream("explore")
        self._train = rng.substream("train")
        self._warmup = rng.substream("warmup")
        self.env_steps = 0
        self.actor_macs = count_macs(self.core.actor)

    def _warming_up(self, mode: str) -> bool:
        return mode == "train" and self.env_steps < self.params.warmup_steps

    def begin_episode(self, mode):
        pass

    def wants_decision(self, t) -> bool:
        return True

    def act(self, obs, t, mode):
        if self._warming_up(mode):
            return _random_action(self._warmup, self.core.a_dim, self.core.a_max), 0
        noise = self._explore if mode == "train" else None
        return self.core.select(obs, noise), self.actor_macs

    def observe(self, tr):
        self.buffer.add(tr.state, tr.action, tr.reward, tr.next_state, tr.done)
        self.env_steps += 1
        if self.env_steps >= self.params.warmup_steps:
            self.core.train_step(self.buffer, self._train)

    def end_episode(self):
        pass

    def networks(self) -> dict:
        return self.core.networks()


class Td3EaAgent:
    """Td3 whose every decision commits the chosen action for `tau` steps.

    Learns on macro transitions (window-start state, action, summed reward,
    window-end state), one train step per env step once the buffer can
    fill a batch.
    """

    def __init__(self, env, params: DeepParams, rng: RngStream):
        spec = env.action_spec
        self.params = params
        self.repeat_k = int(params.tau)
        if self.repeat_k < 1:
            raise ValueError("repeat length must be >= 1")
        self.core = Td3Core(_obs_dim(env), spec.dim, spec.a_max, params, rng.child("td3_ea"))
        self.buffer = ReplayBuffer(params.buffer_capacity, _obs_dim(env), spec.dim)
        self._explore = rng.substream("explore")
        self._train = rng.substream("train")
        self._warmup = rng.substream("warmup")
        self.env_steps = 0
        self.actor_macs = count_macs(self.core.actor)
        self._reset_window()

    def _reset_window(self):
        self._action = None
        self._w_state = None
        self._w_reward = 0.0
        self._w_steps = 0

    def _warming_up(self, mode: str) -> bool:
        return mode == "train" and self.env_steps < self.params.warmup_steps

    def begin_episode(self, mode):
        self._reset_window()

    def wants_decision(self, t) -> bool:
        return t % self.repeat_k == 0

    def act(self, obs, t, mode):
        if self.wants_decision(t):
            if self._warming_up(mode):
                self._action = _random_action(self._warmup, self.core.a_dim, self.core.a_max)
                return self._action, 0
            noise = self._explore if mode == "train" else None
            self._action = self.core.select(obs, noise)
            return self._action, self.actor_macs
        return self._action, 0

    def observe(self, tr):
        if self._w_state is None:
            self._w_state = tr.state
        self._w_reward += tr.reward
        self._w_steps += 1
        self.env_steps += 1
        if self._w_steps == self.repeat_k or tr.done or tr.truncated:
            self.buffer.add(self._w_state, self._action, self._w_reward, tr.next_state, tr.done)
            self._reset_window()
        if self.env_steps >= self.params.warmup_steps:
            self.core.train_step(self.buffer, self._train)

    def end_episode(self):
        self._reset_window()

    def networks(self) -> dict:
        return self.core.networks()


class SkipTd3Agent:
    """Continuous actor plus a learned per-decision repeat length.

    At each decision point the actor picks an action and a skip Q-network
    (inputs: observation concatenated with that action, `tau` outputs) picks
    how many steps to repeat it.  The actor learns from per-step transitions;
    the skip head learns from the discounted k-step return with a gamma^k
    bootstrap.
    """

    def __init__(self, env, params: DeepParams, rng: RngStream):
        spec = env.action_spec
        self.params = params
        self.max_skip = int(params.tau)
        if self.max_skip < 1:
            raise ValueError("max skip must be >= 1")
        obs_dim = _obs_dim(env)
        self.core = Td3Core(obs_dim, spec.dim, spec.a_max, params, rng.child("td3"))
        self.skip = DqnLearner(obs_dim + spec.dim, self.max_skip, params, rng.child("skip"), params.gate_epsilon)
        self.buffer = ReplayBuffer(params.buffer_capacity, obs_dim, spec.dim)
        self.skip_buffer = ReplayBuffer(params.buffer_capacity, obs_dim + spec.dim, 1, next_state_dim=obs_dim)
        self._explore = rng.substream("explore")
        self._skip_eps = rng.substream("skip-eps")
        self._train = rng.substream("train")
        self._warmup = rng.substream("warmup")
        self.env_steps = 0
        self.actor_macs = count_macs(self.core.actor)
        self.skip_macs = count_macs(self.skip.q)
        self._reset_segment()

    def _reset_segment(self):
        self._action = None
        self._remaining = 0
        self._k = 0
        self._seg_state = None
        self._seg_reward = 0.0
        self._seg_steps = 0

    def _warming_up(self, mode: str) -> bool:
        return mode == "train" and self.env_steps < self.params.warmup_steps

    def begin_episode(self, mode):
        self._reset_segment()

    def wants_decision(self, t) -> bool:
        return self._remaining == 0

    def act(self, obs, t, mode):
        if self._remaining == 0:
            if self._warming_up(mode):
                self._action = _random_action(self._warmup, self.core.a_dim, self.core.a_max)
                self._k = 1 + int(self._warmup.integers(self.max_skip))
                macs = 0
            else:
                noise = self._explore if mode == "train" else None
                self._action = self.core.select(obs, noise)
                eps = self._skip_eps if mode == "train" else None
                x = np.concatenate([np.asarray(obs, np.float32), self._action])
                self._k = 1 + self.skip.select(x, eps)
                macs = self.actor_macs + self.skip_macs
            self._remaining = self._k
            self._seg_state = np.asarray(obs, np.float32)
            self._seg_reward = 0.0
            self._seg_steps = 0
            self._remaining -= 1
            return self._action, macs
        self._remaining -= 1
        return self._action, 0

    def observe(self, tr):
        p = self.params
        self.buffer.add(tr.state, tr.action, tr.reward, tr.next_state, tr.done)
        self._seg_reward += (p.gamma**self._seg_steps) * tr.reward
        self._seg_steps += 1
        self.env_steps += 1
        if self._remaining == 0 or tr.done or tr.truncated:
            x = np.concatenate([self._seg_state, np.asarray(self._action, np.float32)])
            self.skip_buffer.add(x, [self._k - 1], self._seg_reward, tr.next_state, tr.done, steps=self._seg_steps)
            self._remaining = 0  # force a fresh decision after an interrupted segment
        if self.env_steps >= p.warmup_steps:
            self.core.train_step(self.buffer, self._train)
            self.skip.train_step(self.skip_buffer, self._next_skip_input, self._train)

    def _next_skip_input(self, next_states: np.ndarray) -> np.ndarray:
        a2 = forward(self.core.actor_target, next_states)
        return np.concatenate([next_states, a2], axis=1)

    def end_episode(self):
        self._reset_segment()

    def networks(self) -> dict:
        nets = self.core.networks()
        nets["skip"] = self.skip.q
        return nets


class LayeredDeepAgent:
    """Two-timescale control with a learned per-window gate.

    Every ``tau`` steps one decision reads the state and produces: a slow
    action (held for the window), a gate bit, and -- when the gate opens --
    the first fast action.  While the gate is open the fast actor runs (and
    is charged) every step.  Reward shaping:

    * fast, per step:   R - g * j * |a_slow - a_fast| / a_max
    * slow, per window: sum(R) - p * g * elapsed - j * g * sum(|a_slow - a_fast|) / a_max
    * gate, per window: sum(R) - p * g * elapsed   (rate j instead of p when
      ``gate_penalty_uses_j``)

    ``gate_override`` pins the gate for diagnostics (0 = always slow,
    1 = always fast).
    """

    def __init__(self, env, params: DeepParams, rng: RngStream, gate_override: int | None = None):
        spec = env.action_spec
        if params.tau < 2:
            raise ValueError("window length must be >= 2")
        if params.p < 0 or params.j < 0:
            raise ValueError("penalties must be nonnegative")
        self.params = params
        self.tau = int(params.tau)
        self.gate_override = gate_override
        obs_dim = _obs_dim(env)
        self.obs_dim = obs_dim
        self.a_dim = spec.dim
        self.a_max = spec.a_max
        self.slow = Td3Core(obs_dim, spec.dim, spec.a_max, params, rng.child("slow"))
        self.fast = Td3Core(obs_dim, spec.dim, spec.a_max, params, rng.child("fast"))
        self.gate = DqnLearner(obs_dim + spec.dim, 2, params, rng.child("gate"), params.gate_epsilon)
        self.slow_buffer = ReplayBuffer(params.buffer_capacity, obs_dim, spec.dim)
        self.fast_buffer = ReplayBuffer(params.buffer_capacity, obs_dim, spec.dim)
        self.gate_buffer = ReplayBuffer(params.buffer_capacity, obs_dim + spec.dim, 1, next_state_dim=obs_dim)
        self._slow_explore = rng.substream("slow-explore")
        self._fast_explore = rng.substream("fast-explore")
        self._gate_eps = rng.substream("gate-eps")
        self._train = rng.substream("train")
        self._warmup = rng.substream("warmup")
        self.env_steps = 0
        self.slow_macs = count_macs(self.slow.actor)
        self.fast_macs = count_macs(self.fast.actor)
        self.gate_macs = count_macs(self.gate.q)
        self._warmup_gate = 0
        self._reset_window()

    def _reset_window(self):
        self._a_slow = None
        self._g = 0
        self._w_state = None
        self._w_reward = 0.0
        self._w_consistency = 0.0
        self._w_steps = 0

    def _warming_up(self, mode: str) -> bool:
        return mode == "train" and self.env_steps < self.params.warmup_steps

    def begin_episode(self, mode):
        self._reset_window()

    def wants_decision(self, t) -> bool:
        return t % self.tau == 0 or self._g == 1

    def act(self, obs, t, mode):
        macs = 0
        boundary = t % self.tau == 0
        if boundary:
            if self._warming_up(mode):
                self._a_slow = _random_action(self._warmup, self.a_dim, self.a_max)
                # alternate the gate so every buffer sees data before training
                self._g = self._warmup_gate
                self._warmup_gate = 1 - self._warmup_gate
            else:
                noise = self._slow_explore if mode == "train" else None
                self._a_slow = self.slow.select(obs, noise)
                x = np.concatenate([np.asarray(obs, np.float32), self._a_slow])
                eps = self._gate_eps if mode == "train" else None
                self._g = self.gate.select(x, eps)
                macs += self.slow_macs + self.gate_macs
            if self.gate_override is not None:
                self._g = int(self.gate_override)
        if self._g == 1:
            if self._warming_up(mode):
                return _random_action(self._warmup, self.a_dim, self.a_max), macs
            noise = self._fast_explore if mode == "train" else None
            return self.fast.select(obs, noise), macs + self.fast_macs
        return self._a_slow, macs

    def observe(self, tr):
        p = self.params
        if self._w_state is None:
            self._w_state = np.asarray(tr.state, np.float32)
        g = self._g
        consistency = 0.0
        if g == 1:
            diff = np.abs(np.asarray(self._a_slow) - np.asarray(tr.action))
            consistency = float(np.mean(diff)) / self.a_max
        self.fast_buffer.add(tr.state, tr.action, tr.reward - g * p.j * consistency, tr.next_state, tr.done)
        self._w_reward += tr.reward
        self._w_consistency += consistency
        self._w_steps += 1
        self.env_steps += 1
        if self._w_steps == self.tau or tr.done or tr.truncated:
            self._flush_window(tr)
        if self.env_steps >= p.warmup_steps:
            self.fast.train_step(self.fast_buffer, self._train)
            self.slow.train_step(self.slow_buffer, self._train)
            self.gate.train_step(self.gate_buffer, self._next_gate_input, self._train)

    def _flush_window(self, tr):
        p = self.params
        g = self._g
        elapsed = self._w_steps
        slow_action = self._a_slow
        if p.zero_slow_on_fast and g == 1:
            slow_action = np.zeros(self.a_dim, np.float32)
        slow_reward = self._w_reward - p.p * g * elapsed - p.j * g * self._w_consistency
        self.slow_buffer.add(self._w_state, slow_action, slow_reward, tr.next_state, tr.done)
        gate_rate = p.j if p.gate_penalty_uses_j else p.p
        gate_reward = self._w_reward - gate_rate * g * elapsed
        gate_input = np.concatenate([self._w_state, np.asarray(self._a_slow, np.float32)])
        self.gate_buffer.add(gate_input, [g], gate_reward, tr.next_state, tr.done)
        self._reset_window()

    def _next_gate_input(self, next_states: np.ndarray) -> np.ndarray:
        a2 = forward(self.slow.actor_target, next_states)
        return np.concatenate([next_states, a2], axis=1)

    def end_episode(self):
        self._reset_window()

    def networks(self) -> dict:
        nets = {}
        for prefix, core in (("slow", self.slow), ("fast", self.fast)):
            for name, net in core.networks().items():
                nets[f"{prefix}_{name}"] = net
        nets["gate"] = self.gate.q
        return nets


AGENTS = {
    "td3": Td3Agent,
    "td3_ea": Td3EaAgent,
    "temporl": SkipTd3Agent,
    "tla": LayeredDeepAgent,
}


def make_deep_agent(algo: str, env, params: DeepParams, rng: RngStream):
    if algo not in AGENTS:
        raise ValueError(f"unknown deep algorithm {algo!r} (have {sorted(AGENTS)})")
    return AGENTS[algo](env, params, rng)


def save_agent(agent, out_dir) -> None:
    """Write one checkpoint file per constituent network."""
    os.makedirs(out_dir, exist_ok=True)
    for name, net in agent.networks().items():
        save_network(os.path.join(out_dir, f"{name}.npz"), net)


def load_agent_networks(agent, out_dir) -> None:
    """Restore constituent networks (and refresh targets) from a checkpoint."""
    for name in list(agent.networks()):
        path = os.path.join(out_dir, f"{name}.npz")
        loaded = load_network(path)
        _assign_network(agent, name, loaded)


def _assign_network(agent, name: str, net: MlpNetwork) -> None:
    if isinstance(agent, LayeredDeepAgent):
        if name == "gate":
            agent.gate.q = net
            agent.gate.q_target = net.copy()
            return
        prefix, attr = name.split("_", 1)
        core = getattr(agent, prefix)
    elif name == "skip" and isinstance(agent, SkipTd3Agent):
        agent.skip.q = net
        agent.skip.q_target = net.copy()
        return
    else:
        core, attr = agent.core, name
    setattr(core, attr, net)
    setattr(core, f"{attr}_target", net.copy())
