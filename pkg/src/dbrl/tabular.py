"""Tabular agents for the gridworlds.

Three learners share the episode protocol from :mod:`dbrl.core`:

* ``qlearn``     one decision per step, plain Q-learning
* ``qlearn_ea``  every chosen action committed for ``tau`` steps
* ``tla_tab``    layered agent: a slow table committing one action per
                 ``tau``-step window, a per-step fast table, and a gate
                 table choosing per window which layer drives

The layered agent charges ONE decision at a window boundary (one state
read produces slow action, gate bit, and, when the gate opens, the
first fast action) and one per step only while the gate is open.  Slow
and gate tables are updated once per window with the window's summed
reward minus the energy penalty ``p * elapsed`` when the gate was open;
the fast table is updated every step from whatever action actually ran.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import DecisionBudget, RngStream, run_episode
from .grids import N_ACTIONS, GridEnv, GridWorld


@dataclass
class TabularParams:
    alpha: float = 0.1
    gamma: float = 1.0
    eps_start: float = 1.0
    eps_final: float = 0.05
    episodes: int = 2000
    tau: int = 4
    p: float = 1.0  # energy penalty per gated step (layered agent)
    gate_penalty_uses_j: bool = False  # alternative shaping: charge j instead of p
    j: float = 0.0


def epsilon_schedule(params: TabularParams, episode: int) -> float:
    """Linear decay over the first half of training, then flat."""
    half = max(1, params.episodes // 2)
    frac = min(1.0, episode / half)
    return params.eps_start + frac * (params.eps_final - params.eps_start)


def q_update(table, s, a, r, s2, done, alpha, gamma) -> float:
    """One Q-learning backup; returns the new Q value."""
    target = r if done else r + gamma * float(np.max(table[s2]))
    table[s, a] += alpha * (target - table[s, a])
    return float(table[s, a])


def _greedy(row) -> int:
    return int(np.argmax(row))


def _eps_greedy(row, eps, rng) -> int:
    if rng.random() < eps:
        return int(rng.integers(len(row)))
    return _greedy(row)


class QLearnAgent:
    """Per-step epsilon-greedy Q-learning."""

    def __init__(self, n_states: int, params: TabularParams, rng: RngStream):
        self.q = np.zeros((n_states, N_ACTIONS))
        self.params = params
        self.eps = params.eps_start
        self._explore = rng.substream("explore")

    def begin_episode(self, mode):
        pass

    def wants_decision(self, t):
        return True

    def act(self, obs, t, mode):
        if mode == "train":
            return _eps_greedy(self.q[obs], self.eps, self._explore), 0
        return _greedy(self.q[obs]), 0

    def observe(self, tr):
        q_update(self.q, tr.state, tr.action, tr.reward, tr.next_state, tr.done, self.params.alpha, self.params.gamma)

    def end_episode(self):
        pass


class QLearnEaAgent:
    """Q-learning whose every decision commits an action for tau steps.

    Learns on macro transitions: (window start state, action, summed
    reward, window end state).
    """

    def __init__(self, n_states: int, params: TabularParams, rng: RngStream):
        self.q = np.zeros((n_states, N_ACTIONS))
        self.params = params
        self.eps = params.eps_start
        self._explore = rng.substream("explore")
        self._reset_window()

    def _reset_window(self):
        self._action = 0
        self._w_state = None
        self._w_reward = 0.0
        self._w_steps = 0

    def begin_episode(self, mode):
        self._reset_window()

    def wants_decision(self, t):
        return t % self.params.tau == 0

    def act(self, obs, t, mode):
        if self.wants_decision(t):
            if mode == "train":
                self._action = _eps_greedy(self.q[obs], self.eps, self._explore)
            else:
                self._action = _greedy(self.q[obs])
        return self._action, 0

    def observe(self, tr):
        if self._w_state is None:
            self._w_state = tr.state
        self._w_reward += tr.reward
        self._w_steps += 1
        if self._w_steps == self.params.tau or tr.done or tr.truncated:
            q_update(
                self.q,
                self._w_state,
                self._action,
                self._w_reward,
                tr.next_state,
                tr.done,
                self.params.alpha,
                self.params.gamma,
            )
            self._reset_window()

    def end_episode(self):
        self._reset_window()


class TlaTabularAgent:
    """Two-timescale tabular agent with a learned per-window gate."""

    def __init__(self, n_states: int, params: TabularParams, rng: RngStream):
        self.slow = np.zeros((n_states, N_ACTIONS))
        self.fast = np.zeros((n_states, N_ACTIONS))
        self.gate = np.zeros((n_states, N_ACTIONS, 2))  # keyed by (state, slow action)
        self.params = params
        self.eps = params.eps_start
        self._explore = rng.substream("explore")
        self._reset_window()

    def _reset_window(self):
        self._slow_action = 0
        self._g = 0
        self._w_state = None
        self._w_reward = 0.0
        self._w_steps = 0

    def begin_episode(self, mode):
        self._reset_window()

    def _boundary(self, t) -> bool:
        return t % self.params.tau == 0

    def wants_decision(self, t):
        return self._boundary(t) or self._g == 1

    def act(self, obs, t, mode):
        train = mode == "train"
        if self._boundary(t):
            if train:
                self._slow_action = _eps_greedy(self.slow[obs], self.eps, self._explore)
                self._g = _eps_greedy(self.gate[obs, self._slow_action], self.eps, self._explore)
            else:
                self._slow_action = _greedy(self.slow[obs])
                self._g = _greedy(self.gate[obs, self._slow_action])
        if self._g == 1:
            if train:
                return _eps_greedy(self.fast[obs], self.eps, self._explore), 0
            return _greedy(self.fast[obs]), 0
        return self._slow_action, 0

    def observe(self, tr):
        p = self.params
        if self._w_state is None:
            self._w_state = tr.state
        self._w_reward += tr.reward
        self._w_steps += 1
        # the fast table learns from every executed step
        q_update(self.fast, tr.state, tr.action, tr.reward, tr.next_state, tr.done, p.alpha, p.gamma)
        if self._w_steps == p.tau or tr.done or tr.truncated:
            penalty_rate = p.j if p.gate_penalty_uses_j else p.p
            shaped = self._w_reward - p.p * self._g * self._w_steps
            gate_shaped = self._w_reward - penalty_rate * self._g * self._w_steps
            q_update(self.slow, self._w_state, self._slow_action, shaped, tr.next_state, tr.done, p.alpha, p.gamma)
            s2 = tr.next_state
            next_slow = _greedy(self.slow[s2])
            target = gate_shaped if tr.done else gate_shaped + p.gamma * float(np.max(self.gate[s2, next_slow]))
            self.gate[self._w_state, self._slow_action, self._g] += p.alpha * (
                target - self.gate[self._w_state, self._slow_action, self._g]
            )
            self._reset_window()

    def end_episode(self):
        self._reset_window()


AGENTS = {
    "qlearn": QLearnAgent,
    "qlearn_ea": QLearnEaAgent,
    "tla_tab": TlaTabularAgent,
}


def make_tabular_agent(algo: str, n_states: int, params: TabularParams, rng: RngStream):
    if algo not in AGENTS:
        raise ValueError(f"unknown tabular algorithm {algo!r} (have {sorted(AGENTS)})")
    return AGENTS[algo](n_states, params, rng)


@dataclass
class TabularRun:
    """Training record for one trial."""

    eval_episodes: list  # episode index at each eval point
    eval_returns: list
    eval_decisions: list
    final_return: float
    final_decisions: int
    final_trace: object


def greedy_rollout(env: GridEnv, agent) -> tuple[float, int, object]:
    budget = DecisionBudget(env.decision_limit)
    trace = run_episode(env, agent, budget=budget, mode="eval")
    return trace.total_return, trace.decisions, trace


def train_tabular(
    world: GridWorld,
    algo: str,
    params: TabularParams,
    seed: int,
    eval_every: int = 20,
) -> TabularRun:
    env = GridEnv(world)
    rng = RngStream(seed)
    agent = make_tabular_agent(algo, world.n_cells, params, rng)
    eps_log, ret_log, dec_log = [], [], []
    for ep in range(params.episodes):
        agent.eps = epsilon_schedule(params, ep)
        run_episode(env, agent, budget=DecisionBudget(env.decision_limit), mode="train")
        if ep % eval_every == 0 or ep == params.episodes - 1:
            ret, dec, _ = greedy_rollout(env, agent)
            eps_log.append(ep)
            ret_log.append(ret)
            dec_log.append(dec)
    final_return, final_decisions, final_trace = greedy_rollout(env, agent)
    return TabularRun(eps_log, ret_log, dec_log, final_return, final_decisions, final_trace)


def run_trials(
    world: GridWorld,
    algo: str,
    params: TabularParams,
    n_trials: int = 20,
    seed0: int = 0,
) -> list[TabularRun]:
    return [train_tabular(world, algo, replace(params), seed0 + k) for k in range(n_trials)]
