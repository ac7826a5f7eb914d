"""Core contracts for decision-bounded episodic control.

A *decision* is one read of the environment state that commits one or
more actions.  Episodes may carry a budget of decisions; agents that
commit multi-step plans spend fewer decisions per step.  The episode
loop here owns all decision and compute (MAC) accounting so that every
agent/environment pair is measured identically.

Environment protocol (duck-typed):
    reset(rng) -> obs
    step(action) -> (obs, reward, done, truncated)
    action_spec : ActionSpec
    max_steps : int
    exhaustion_penalty : float   (0 when running out of decisions is a plain stop)
    decision_limit : int | None

Agent protocol:
    begin_episode(mode)
    wants_decision(t) -> bool    (must be deterministic given the agent's committed plan)
    act(obs, t, mode) -> (action, macs)
    observe(transition)          (train mode only; called once per step, one step delayed)
    end_episode()                (train mode only)
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ActionSpec:
    """Shape of an environment's action space."""

    kind: str  # "discrete" | "continuous"
    n: int = 0  # number of discrete actions
    dim: int = 0  # continuous action dimension
    a_max: float = 0.0  # symmetric continuous bound: actions live in [-a_max, a_max]^dim

    def __post_init__(self):
        if self.kind == "discrete":
            if self.n < 1:
                raise ValueError("discrete spec needs n >= 1")
        elif self.kind == "continuous":
            if self.dim < 1 or not (self.a_max > 0):
                raise ValueError("continuous spec needs dim >= 1 and a_max > 0")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")


@dataclass
class Transition:
    """One environment step as seen by a learner."""

    state: object
    action: object
    reward: float
    next_state: object
    done: bool = False
    truncated: bool = False


@dataclass
class DecisionBudget:
    """Per-episode allowance of decisions."""

    limit: int | None
    used: int = 0

    def __post_init__(self):
        if self.limit is not None and self.limit < 1:
            raise ValueError("decision limit must be >= 1 (or None for unbounded)")

    @property
    def exhausted(self) -> bool:
        return self.limit is not None and self.used >= self.limit

    @property
    def remaining(self) -> int | None:
        return None if self.limit is None else self.limit - self.used


def charge_decision(budget: DecisionBudget | None) -> bool:
    """Spend one decision.  Returns False when the budget is exhausted."""
    if budget is None:
        return True
    if budget.exhausted:
        return False
    budget.used += 1
    return True


def budget_for(env) -> DecisionBudget | None:
    """Fresh budget matching the environment's decision limit, if any."""
    limit = getattr(env, "decision_limit", None)
    return None if limit is None else DecisionBudget(limit)


TRACE_COLUMNS = ("step", "reward", "decision", "macs", "done", "truncated")


@dataclass
class EpisodeTrace:
    """Per-step record of one episode.

    ``rewards`` include any exhaustion penalty folded into the final
    step, so ``total_return`` is a plain sum.  ``decisions`` flags the
    steps on which the agent read the state (charged against a budget
    when one is active).
    """

    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    decision_flags: list = field(default_factory=list)
    macs: list = field(default_factory=list)
    done: bool = False
    truncated: bool = False
    exhausted: bool = False
    exhaustion_penalty: float = 0.0

    def append_step(self, action, reward: float, decision: bool, macs: int) -> None:
        self.actions.append(action)
        self.rewards.append(float(reward))
        self.decision_flags.append(bool(decision))
        self.macs.append(int(macs))

    def fold_exhaustion(self, penalty: float) -> None:
        self.exhausted = True
        self.exhaustion_penalty = float(penalty)
        if penalty:
            self.rewards[-1] += penalty
            self.done = True
        else:
            self.truncated = True

    @property
    def steps(self) -> int:
        return len(self.rewards)

    @property
    def total_return(self) -> float:
        return float(sum(self.rewards))

    @property
    def decisions(self) -> int:
        return int(sum(self.decision_flags))

    @property
    def total_macs(self) -> int:
        return int(sum(self.macs))

    def action_array(self) -> np.ndarray:
        """Actions as a (T, dim) float array (discrete ids become a column)."""
        arr = np.asarray(self.actions, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        return arr

    # --- serialization -------------------------------------------------
    def to_csv(self, path_or_buf) -> None:
        """Write one row per step.

        Floats are written with ``repr`` so parsing them back yields the
        exact same values.  Terminal flags ride on the final row.
        """
        arr = self.action_array()
        header = list(TRACE_COLUMNS[:1]) + [f"a{i}" for i in range(arr.shape[1])] + list(TRACE_COLUMNS[1:])
        own = isinstance(path_or_buf, (str, bytes))
        f = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(f)
            w.writerow(header)
            last = self.steps - 1
            for t in range(self.steps):
                row = [t]
                row += [repr(float(v)) for v in arr[t]]
                row.append(repr(self.rewards[t]))
                row.append(int(self.decision_flags[t]))
                row.append(self.macs[t])
                row.append(int(self.done) if t == last else 0)
                row.append(int(self.truncated) if t == last else 0)
                w.writerow(row)
        finally:
            if own:
                f.close()

    @classmethod
    def from_csv(cls, path_or_buf) -> "EpisodeTrace":
        own = isinstance(path_or_buf, (str, bytes))
        f = open(path_or_buf, newline="") if own else path_or_buf
        try:
            rows = list(csv.reader(f))
        finally:
            if own:
                f.close()
        header, rows = rows[0], rows[1:]
        n_act = sum(1 for h in header if h.startswith("a") and h[1:].isdigit())
        tr = cls()
        for row in rows:
            acts = [float(v) for v in row[1 : 1 + n_act]]
            action = acts[0] if n_act == 1 else np.array(acts)
            tr.append_step(action, float(row[1 + n_act]), bool(int(row[2 + n_act])), int(row[3 + n_act]))
        if rows:
            tr.done = bool(int(rows[-1][4 + n_act]))
            tr.truncated = bool(int(rows[-1][5 + n_act]))
        return tr

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv_string(cls, text: str) -> "EpisodeTrace":
        return cls.from_csv(io.StringIO(text))


def discounted_return(rewards, gamma: float = 1.0) -> float:
    """Sum of gamma^t * r_t."""
    total = 0.0
    g = 1.0
    for r in rewards:
        total += g * float(r)
        g *= gamma
    return total


class RngStream:
    """Splittable random source with named, order-independent substreams.

    Each name maps to an independent ``np.random.Generator`` derived
    from (seed, sha256(name)), so adding or reordering substream users
    never perturbs the others.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def substream(self, name: str) -> np.random.Generator:
        digest = hashlib.sha256(name.encode("utf-8")).digest()
        key = (
            int.from_bytes(digest[0:4], "little"),
            int.from_bytes(digest[4:8], "little"),
        )
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=key))

    def child(self, name: str) -> "RngStream":
        """A derived stream namespace (e.g. one per constituent network)."""
        digest = hashlib.sha256(name.encode("utf-8")).digest()
        mixed = (self.seed << 32) ^ int.from_bytes(digest[:8], "little")
        return RngStream(mixed)


def run_episode(
    env,
    agent,
    budget: DecisionBudget | None = None,
    max_steps: int | None = None,
    rng: np.random.Generator | None = None,
    mode: str = "eval",
    on_step=None,
) -> EpisodeTrace:
    """Run one episode, accounting decisions and MACs uniformly.

    When the agent asks for a decision and the budget is spent, the
    episode ends: with a nonzero ``env.exhaustion_penalty`` (gridworlds)
    the final transition is amended to a penalized terminal; otherwise
    it is a plain truncation.  Learner callbacks run one step late so
    that amendment can happen before the transition is consumed.
    """
    train = mode == "train"
    obs = env.reset(rng)
    agent.begin_episode(mode)
    trace = EpisodeTrace()
    penalty = float(getattr(env, "exhaustion_penalty", 0.0))
    cap = int(max_steps if max_steps is not None else env.max_steps)
    pending: Transition | None = None
    t = 0
    while t < cap:
        wants = agent.wants_decision(t)
        if wants and budget is not None and budget.exhausted:
            if pending is not None:
                trace.fold_exhaustion(penalty)
                pending.reward += penalty
                if penalty:
                    pending.done = True
                else:
                    pending.truncated = True
            else:
                trace.exhausted = True
            break
        if pending is not None and train:
            agent.observe(pending)
        if pending is not None:
            pending = None
        if wants:
            charge_decision(budget)
        action, macs = agent.act(obs, t, mode)
        nxt, reward, done, truncated = env.step(action)
        trace.append_step(action, reward, wants, macs)
        pending = Transition(obs, action, float(reward), nxt, done, truncated)
        obs = nxt
        t += 1
        if on_step is not None:
            on_step(t, trace)
        if done or truncated:
            trace.done = done
            trace.truncated = truncated
            break
    else:
        if pending is not None and not (pending.done or pending.truncated):
            pending.truncated = True
            trace.truncated = True
    if train:
        if pending is not None:
            agent.observe(pending)
        agent.end_episode()
    return trace
