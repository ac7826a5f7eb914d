"""Deterministic gridworlds with per-episode decision budgets.

Cells are integer ids (row-major).  Actions are 0=up, 1=right, 2=down,
3=left; moving into a wall or off the grid keeps the agent in place.
Every move costs -1; reaching the goal ends the episode.  Running out
of decisions before the goal ends the episode with the world's
exhaustion penalty.

Worlds serialize to a plain text format: '#' wall, 'S' start, 'G' goal,
'.' open floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ActionSpec

N_ACTIONS = 4
ACTION_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left
ACTION_NAMES = ("up", "right", "down", "left")

STEP_REWARD = -1.0


@dataclass
class GridWorld:
    walls: np.ndarray  # (H, W) bool
    start: tuple[int, int]  # (row, col)
    goal: tuple[int, int]
    decision_limit: int
    exhaustion_penalty: float
    name: str = "grid"

    def __post_init__(self):
        h, w = self.walls.shape
        for label, (r, c) in (("start", self.start), ("goal", self.goal)):
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"{label} outside the grid")
            if self.walls[r, c]:
                raise ValueError(f"{label} is inside a wall")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        if self.decision_limit < 1:
            raise ValueError("decision limit must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return self.walls.shape

    @property
    def n_cells(self) -> int:
        return int(self.walls.size)

    def cell_id(self, rc: tuple[int, int]) -> int:
        return rc[0] * self.walls.shape[1] + rc[1]

    def cell_rc(self, cell: int) -> tuple[int, int]:
        w = self.walls.shape[1]
        return divmod(cell, w)

    @property
    def start_id(self) -> int:
        return self.cell_id(self.start)

    @property
    def goal_id(self) -> int:
        return self.cell_id(self.goal)


def grid_step(world: GridWorld, cell: int, action: int) -> tuple[int, float, bool]:
    """One move.  Blocked moves bounce in place; every move costs -1."""
    r, c = world.cell_rc(cell)
    dr, dc = ACTION_DELTAS[action]
    nr, nc = r + dr, c + dc
    h, w = world.walls.shape
    if not (0 <= nr < h and 0 <= nc < w) or world.walls[nr, nc]:
        nr, nc = r, c
    nxt = nr * w + nc
    return nxt, STEP_REWARD, nxt == world.goal_id


class GridEnv:
    """Episode-protocol wrapper around a GridWorld."""

    action_spec = ActionSpec("discrete", n=N_ACTIONS)

    def __init__(self, world: GridWorld):
        self.world = world
        self.decision_limit = world.decision_limit
        self.exhaustion_penalty = world.exhaustion_penalty
        # no live episode can pass 4*limit+4 steps (4-step plans, >=1
        # decision per plan), so this cap only guards against bugs
        self.max_steps = 4 * (world.decision_limit + 2)
        self.name = world.name
        # loose but guaranteed bounds on any episode return, for
        # normalized area-under-curve reporting
        self.reward_range = (world.exhaustion_penalty - float(self.max_steps), 0.0)
        self.cell = world.start_id

    @property
    def obs_dim(self) -> int:
        return self.world.n_cells

    def reset(self, rng=None) -> int:
        self.cell = self.world.start_id
        return self.cell

    def step(self, action):
        self.cell, reward, done = grid_step(self.world, self.cell, int(action))
        return self.cell, reward, done, False


# --- text format --------------------------------------------------------


def render_grid(world: GridWorld) -> str:
    h, w = world.walls.shape
    rows = []
    for r in range(h):
        row = []
        for c in range(w):
            if (r, c) == world.start:
                row.append("S")
            elif (r, c) == world.goal:
                row.append("G")
            elif world.walls[r, c]:
                row.append("#")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows) + "\n"


def parse_grid(
    text: str,
    decision_limit: int,
    exhaustion_penalty: float,
    name: str = "grid",
) -> GridWorld:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    width = max(len(ln) for ln in lines)
    walls = np.zeros((len(lines), width), dtype=bool)
    start = goal = None
    for r, ln in enumerate(lines):
        for c in range(width):
            ch = ln[c] if c < len(ln) else "#"
            if ch == "#":
                walls[r, c] = True
            elif ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
            elif ch != ".":
                raise ValueError(f"bad grid character {ch!r} at row {r}, col {c}")
    if start is None or goal is None:
        raise ValueError("grid needs exactly one S and one G")
    return GridWorld(walls, start, goal, decision_limit, exhaustion_penalty, name)


def load_grid(path, decision_limit: int, exhaustion_penalty: float, name: str = "grid") -> GridWorld:
    with open(path) as f:
        return parse_grid(f.read(), decision_limit, exhaustion_penalty, name)


def save_grid(path, world: GridWorld) -> None:
    with open(path, "w") as f:
        f.write(render_grid(world))


# --- built-in worlds ------------------------------------------------------


def _weave_text(leg_in: int, drop: int, leg_out: int, overshoot: int) -> str:
    """Layout text for an S-shaped course: right, down a side passage, right.

    The top corridor continues ``overshoot`` cells past the passage before
    dead-ending.  With a positive overshoot the passage column is not a
    multiple of four and has no wall to bounce on, so an agent that commits
    every action for four steps overshoots the passage going right, overshoots
    it again coming back, and can never line up with the turn — only per-step
    control gets through.  Agents mixing four-step commitment on the long legs
    with per-step control at the turn traverse the course with no wasted moves.
    """
    width = max(leg_in + overshoot, leg_in + leg_out) + 1
    top = "S" + "." * (leg_in + overshoot) + "#" * (width - leg_in - overshoot - 1)
    mid = "#" * leg_in + "." + "#" * (width - leg_in - 1)
    bottom = "#" * leg_in + "." * leg_out + "G" + "#" * (width - leg_in - leg_out - 1)
    return "\n".join([top] + [mid] * (drop - 1) + [bottom])


def build_straight(length: int = 30, decision_limit: int = 15) -> GridWorld:
    """A corridor needing `length` moves end to end."""
    if length < 1:
        raise ValueError("length must be >= 1")
    text = "S" + "." * (length - 1) + "G"
    return parse_grid(text, decision_limit, -50.0, name="straight")


def build_slalom(
    decision_limit: int = 15,
    *,
    leg_in: int = 6,
    drop: int = 6,
    leg_out: int = 3,
    overshoot: int = 2,
) -> GridWorld:
    """Two corridors joined by a side passage; 15 moves end to end.

    The passage cannot be entered by an agent locked to four-step commitments
    (see `_weave_text`), so the optimal 15-move traversal requires per-step
    control around the turn.
    """
    if min(leg_in, drop, leg_out) < 1 or overshoot < 0:
        raise ValueError("legs must be >= 1 and overshoot >= 0")
    text = _weave_text(leg_in, drop, leg_out, overshoot)
    return parse_grid(text, decision_limit, -50.0, name="slalom")


def build_combined(
    decision_limit: int = 60,
    *,
    leg_in: int = 18,
    drop: int = 6,
    leg_out: int = 19,
    overshoot: int = 2,
) -> GridWorld:
    """Long straight run into a slalom turn, then a long straight run out.

    Same geometry as the slalom with the legs stretched: a straight section,
    the off-lattice side passage, and another straight section; 43 moves end
    to end."""
    if min(leg_in, drop, leg_out) < 1 or overshoot < 0:
        raise ValueError("legs must be >= 1 and overshoot >= 0")
    text = _weave_text(leg_in, drop, leg_out, overshoot)
    return parse_grid(text, decision_limit, -100.0, name="combined")


def make_grid_env(name: str) -> GridEnv:
    builders = {
        "straight": build_straight,
        "slalom": build_slalom,
        "combined": build_combined,
    }
    if name not in builders:
        raise ValueError(f"unknown grid world {name!r} (have {sorted(builders)})")
    return GridEnv(builders[name]())


# --- macro sets and the exact oracle -------------------------------------


def one_step_macros() -> list[tuple[int, int]]:
    return [(a, 1) for a in range(N_ACTIONS)]


def repeat_macros(k: int) -> list[tuple[int, int]]:
    return [(a, k) for a in range(N_ACTIONS)]


def union_macros(k: int = 4) -> list[tuple[int, int]]:
    return one_step_macros() + repeat_macros(k)


@dataclass
class OracleResult:
    optimal_return: float
    min_decisions: int
    goal_reachable: bool
    values: np.ndarray = field(repr=False)  # (limit+1, n_cells)

    def as_tuple(self) -> tuple[float, int]:
        return (self.optimal_return, self.min_decisions)


def _run_macro(world: GridWorld, cell: int, action: int, repeat: int):
    """Execute a committed plan; stops early at the goal."""
    total = 0.0
    done = False
    for _ in range(repeat):
        cell, r, done = grid_step(world, cell, action)
        total += r
        if done:
            break
    return cell, total, done


def oracle_solve(world: GridWorld, macro_set=None) -> OracleResult:
    """Exact dynamic program over the (cell, decisions-remaining) space.

    Maximizes episode return; among return-optimal plays, reports the
    fewest decisions spent.  Exhausting the budget anywhere but the
    goal costs the world's exhaustion penalty.
    """
    macros = macro_set if macro_set is not None else union_macros()
    n = world.n_cells
    limit = world.decision_limit
    goal = world.goal_id
    open_cells = [cell for cell in range(n) if not world.walls[world.cell_rc(cell)]]

    # transition table per (cell, macro): (next, reward, reached_goal)
    table = {}
    for cell in open_cells:
        if cell == goal:
            continue
        for m_i, (a, k) in enumerate(macros):
            table[(cell, m_i)] = _run_macro(world, cell, a, k)

    values = np.full((limit + 1, n), np.nan)
    mindec = np.zeros((limit + 1, n), dtype=np.int64)
    reach = np.zeros((limit + 1, n), dtype=bool)
    for cell in open_cells:
        values[0, cell] = world.exhaustion_penalty
    values[:, goal] = 0.0
    reach[:, goal] = True

    for d in range(1, limit + 1):
        for cell in open_cells:
            if cell == goal:
                continue
            best = -np.inf
            best_dec = 0
            best_reach = False
            for m_i in range(len(macros)):
                nxt, r, done = table[(cell, m_i)]
                if done:
                    v, dec, rc = r, 1, True
                else:
                    v = r + values[d - 1, nxt]
                    dec = 1 + mindec[d - 1, nxt]
                    rc = reach[d - 1, nxt]
                if v > best or (v == best and (rc, -dec) > (best_reach, -best_dec)):
                    best, best_dec, best_reach = v, dec, rc
            values[d, cell] = best
            mindec[d, cell] = best_dec
            reach[d, cell] = best_reach

    s = world.start_id
    return OracleResult(
        optimal_return=float(values[limit, s]),
        min_decisions=int(mindec[limit, s]),
        goal_reachable=bool(reach[limit, s]),
        values=values,
    )


def shortest_path_length(world: GridWorld) -> int:
    """Breadth-first search distance from start to goal (moves)."""
    from collections import deque

    h, w = world.walls.shape
    dist = np.full((h, w), -1, dtype=np.int64)
    q = deque([world.start])
    dist[world.start] = 0
    while q:
        r, c = q.popleft()
        if (r, c) == world.goal:
            return int(dist[r, c])
        for dr, dc in ACTION_DELTAS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not world.walls[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = dist[r, c] + 1
                q.append((nr, nc))
    return -1
