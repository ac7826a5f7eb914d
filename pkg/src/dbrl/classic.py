"""Continuous-control environments with pinned dynamics.

Both tasks follow the public classic-control definitions exactly
(constants below), computed in float64.  The decision-bound wrapper
adds a per-episode decision budget to any environment; running out of
decisions simply ends the episode (no penalty), which the episode loop
treats as truncation.
"""

from __future__ import annotations

import numpy as np

from .accel import maybe_jit
from .core import ActionSpec

# pendulum constants
PEND_G = 10.0
PEND_M = 1.0
PEND_L = 1.0
PEND_DT = 0.05
PEND_MAX_TORQUE = 2.0
PEND_MAX_SPEED = 8.0
PEND_STEPS = 200

# mountain car constants
MC_MIN_POS = -1.2
MC_MAX_POS = 0.6
MC_MAX_SPEED = 0.07
MC_POWER = 0.0015
MC_GRAVITY = 0.0025
MC_GOAL_POS = 0.45
MC_GOAL_VEL = 0.0
MC_STEPS = 999


@maybe_jit
def angle_normalize(x):
    """Wrap an angle into [-pi, pi)."""
    return ((x + np.pi) % (2.0 * np.pi)) - np.pi


@maybe_jit
def pendulum_step(th, thdot, u):
    """One semi-implicit Euler step; returns (th', thdot', reward).

    The cost is charged on the pre-step state and the applied torque.
    """
    u = min(max(u, -PEND_MAX_TORQUE), PEND_MAX_TORQUE)
    cost = angle_normalize(th) ** 2 + 0.1 * thdot**2 + 0.001 * (u * u)
    thdot = thdot + (3.0 * PEND_G / (2.0 * PEND_L) * np.sin(th) + 3.0 / (PEND_M * PEND_L**2) * u) * PEND_DT
    thdot = min(max(thdot, -PEND_MAX_SPEED), PEND_MAX_SPEED)
    th = th + thdot * PEND_DT
    return th, thdot, -cost


@maybe_jit
def mountaincar_step(pos, vel, force):
    """One step; returns (pos', vel', reward, done).

    Keeps the reference quirk of zeroing velocity when the car pins
    against the left wall.
    """
    force = min(max(force, -1.0), 1.0)
    vel = vel + force * MC_POWER - MC_GRAVITY * np.cos(3.0 * pos)
    vel = min(max(vel, -MC_MAX_SPEED), MC_MAX_SPEED)
    pos = pos + vel
    pos = min(max(pos, MC_MIN_POS), MC_MAX_POS)
    if pos == MC_MIN_POS and vel < 0.0:
        vel = 0.0
    done = pos >= MC_GOAL_POS and vel >= MC_GOAL_VEL
    reward = -0.1 * force * force
    if done:
        reward = reward + 100.0
    return pos, vel, reward, done


class PendulumEnv:
    """Torque-limited pendulum swing-up; 200-step episodes, never 'done'."""

    action_spec = ActionSpec("continuous", dim=1, a_max=PEND_MAX_TORQUE)
    obs_dim = 3
    max_steps = PEND_STEPS
    exhaustion_penalty = 0.0
    decision_limit = None
    name = "pendulum"
    reward_range = (-2000.0, 0.0)  # for normalized area-under-curve

    def __init__(self, seed: int | None = None):
        self._rng = np.random.default_rng(seed)
        self.th = 0.0
        self.thdot = 0.0

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        r = rng if rng is not None else self._rng
        self.th = r.uniform(-np.pi, np.pi)
        self.thdot = r.uniform(-1.0, 1.0)
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([np.cos(self.th), np.sin(self.th), self.thdot])

    def step(self, action):
        u = float(np.asarray(action).reshape(-1)[0])
        self.th, self.thdot, reward = pendulum_step(self.th, self.thdot, u)
        return self._obs(), float(reward), False, False


class MountainCarEnv:
    """Underpowered car; reach the right hilltop within 999 steps."""

    action_spec = ActionSpec("continuous", dim=1, a_max=1.0)
    obs_dim = 2
    max_steps = MC_STEPS
    exhaustion_penalty = 0.0
    decision_limit = None
    name = "mountaincar"
    reward_range = (-100.0, 100.0)

    def __init__(self, seed: int | None = None):
        self._rng = np.random.default_rng(seed)
        self.pos = 0.0
        self.vel = 0.0

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        r = rng if rng is not None else self._rng
        self.pos = r.uniform(-0.6, -0.4)
        self.vel = 0.0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([self.pos, self.vel])

    def step(self, action):
        force = float(np.asarray(action).reshape(-1)[0])
        self.pos, self.vel, reward, done = mountaincar_step(self.pos, self.vel, force)
        return self._obs(), float(reward), bool(done), False


class DecisionBoundWrapper:
    """Adds a per-episode decision budget to an environment.

    The budget is enforced by the episode loop; this wrapper only
    declares the limit and forwards everything else.
    """

    exhaustion_penalty = 0.0

    def __init__(self, env, decision_limit: int):
        if decision_limit < 1:
            raise ValueError("decision limit must be >= 1")
        self.env = env
        self.decision_limit = int(decision_limit)

    def __getattr__(self, item):
        return getattr(self.env, item)

    def reset(self, rng=None):
        return self.env.reset(rng)

    def step(self, action):
        return self.env.step(action)


def wrap_decision_bound(env, decision_limit: int) -> DecisionBoundWrapper:
    return DecisionBoundWrapper(env, decision_limit)
