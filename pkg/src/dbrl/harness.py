"""Experiment orchestration: configs, seeded runs, CSV records, plots.

Layout of an experiment output tree::

    <out>/<env>/<algo>/
        config.yaml              resolved config for the whole experiment
        seed<k>/
            config.yaml          same, echoed per seed
            evalcurve.csv        step,avg_return,avg_decisions,avg_mmacs,jerk,repetition
            final.csv            one-row metric report for this seed
            traces/trace<i>.csv  final evaluation episodes
            checkpoint/          final network/table parameters
            COMPLETE             config hash; presence marks a finished seed

Finished seeds are skipped on re-run, so an interrupted experiment
resumes where it stopped.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from .agents import (
    DeepParams,
    LayeredDeepAgent,
    SkipTd3Agent,
    load_agent_networks,
    make_deep_agent,
    save_agent,
)
from .classic import MountainCarEnv, PendulumEnv, wrap_decision_bound
from .core import DecisionBudget, RngStream, run_episode
from .grids import (
    GridEnv,
    build_combined,
    build_slalom,
    build_straight,
    one_step_macros,
    oracle_solve,
    repeat_macros,
    union_macros,
)
from .metrics import (
    MetricReport,
    action_repetition,
    episode_mmacs,
    jerk,
    seed_metrics,
    summary_table,
)
from .tabular import TabularParams, epsilon_schedule, make_tabular_agent

GRID_ENVS = ("straight", "slalom", "combined")
CLASSIC_ENVS = ("pendulum", "mountaincar", "mountaincar_db")
TABULAR_ALGOS = ("qlearn", "qlearn_ea", "tla_tab")
DEEP_ALGOS = ("td3", "td3_ea", "temporl", "tla")
WINDOWED_ALGOS = ("qlearn_ea", "tla_tab", "td3_ea", "temporl", "tla")

CURVE_HEADER = "step,avg_return,avg_decisions,avg_mmacs,jerk,repetition"

# Per-environment defaults; any field may be overridden in the config.
ENV_DEFAULTS = {
    "straight": dict(episodes=2000, eval_frequency=20, tau=4, p=1.0, j=0.0),
    "slalom": dict(episodes=2000, eval_frequency=20, tau=4, p=1.0, j=0.0),
    "combined": dict(episodes=5000, eval_frequency=20, tau=4, p=1.0, j=0.0),
    "pendulum": dict(max_steps=30_000, eval_frequency=250, warmup_steps=1_000, tau=6, p=1.0, j=1.0),
    "mountaincar": dict(max_steps=100_000, eval_frequency=2_500, warmup_steps=10_000, tau=11, p=1.0, j=1.0),
    # same task under a 200-decision episode budget
    "mountaincar_db": dict(
        max_steps=100_000, eval_frequency=2_500, warmup_steps=10_000, tau=11, p=1.0, j=1.0, decision_limit=200
    ),
}


def default_output_root() -> str:
    return os.environ.get("DBRL_RESULTS", "results")


@dataclass
class ExperimentConfig:
    """One experiment: a single (env, algo, hyperparameters) cell run
    over a list of seeds."""

    env: str
    algo: str
    seeds: list = field(default_factory=lambda: [0])
    tau: int | None = None
    p: float | None = None
    j: float | None = None
    decision_limit: int | None = None
    max_steps: int | None = None  # deep runs: total training env steps
    episodes: int | None = None  # tabular runs: training episodes
    eval_frequency: int | None = None
    eval_episodes: int = 10
    warmup_steps: int | None = None
    parallel: int = 1
    out: str | None = None

    def resolve(self) -> "ExperimentConfig":
        """Fill unset fields from the environment's defaults."""
        if self.env not in ENV_DEFAULTS:
            raise ValueError(f"unknown env {self.env!r} (have {sorted(ENV_DEFAULTS)})")
        merged = asdict(self)
        for key, value in ENV_DEFAULTS[self.env].items():
            if merged.get(key) is None:
                merged[key] = value
        if merged["out"] is None:
            merged["out"] = default_output_root()
        cfg = ExperimentConfig(**merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.env not in GRID_ENVS + CLASSIC_ENVS:
            raise ValueError(f"unknown env {self.env!r}")
        if self.algo not in TABULAR_ALGOS + DEEP_ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.env in GRID_ENVS and self.algo not in TABULAR_ALGOS:
            raise ValueError(f"{self.algo!r} does not run on gridworlds")
        if self.env in CLASSIC_ENVS and self.algo not in DEEP_ALGOS:
            raise ValueError(f"{self.algo!r} does not run on continuous-control tasks")
        if self.algo in WINDOWED_ALGOS and self.tau is not None and self.tau < 2:
            raise ValueError("windowed algorithms need tau >= 2")
        if not self.seeds:
            raise ValueError("seeds must be a non-empty list")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be unique")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.decision_limit is not None and self.decision_limit < 1:
            raise ValueError("decision_limit must be >= 1")
        if self.parallel < 1:
            raise ValueError("parallel must be >= 1")

    def config_hash(self) -> str:
        """Hash of every field that affects a single run's trajectory.

        Seeds, output location, and worker count are excluded: records
        from different seeds of the same cell must share a hash.
        """
        payload = asdict(self)
        for skip in ("seeds", "out", "parallel"):
            payload.pop(skip)
        canon = ",".join(f"{k}={payload[k]!r}" for k in sorted(payload))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    # --- file form -----------------------------------------------------
    def to_yaml(self, path) -> None:
        payload = asdict(self)
        payload["config_hash"] = self.config_hash()
        with open(path, "w") as fh:
            yaml.safe_dump(payload, fh, sort_keys=True)

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            payload = yaml.safe_load(fh)
        payload.pop("config_hash", None)
        return cls(**payload)


_GRID_BUILDERS = {"straight": build_straight, "slalom": build_slalom, "combined": build_combined}


def make_env(cfg: ExperimentConfig):
    if cfg.env in GRID_ENVS:
        builder = _GRID_BUILDERS[cfg.env]
        if cfg.decision_limit is not None:
            return GridEnv(builder(decision_limit=int(cfg.decision_limit)))
        return GridEnv(builder())
    env = PendulumEnv() if cfg.env == "pendulum" else MountainCarEnv()
    if cfg.decision_limit is not None:
        env = wrap_decision_bound(env, int(cfg.decision_limit))
    return env


def _episode_budget(env) -> DecisionBudget | None:
    limit = getattr(env, "decision_limit", None)
    return DecisionBudget(limit) if limit else None


# --------------------------------------------------------------- records


@dataclass
class RunRecord:
    """Everything persisted for one seed of one experiment cell."""

    config_hash: str
    seed: int
    curve: list  # rows of (step, avg_return, avg_decisions, avg_mmacs, jerk, repetition)
    final: MetricReport

    @property
    def curve_steps(self) -> np.ndarray:
        return np.array([row[0] for row in self.curve])

    def curve_column(self, name: str) -> np.ndarray:
        idx = CURVE_HEADER.split(",").index(name)
        return np.array([row[idx] for row in self.curve])


def write_curve(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(CURVE_HEADER + "\n")
        for row in rows:
            step, rest = int(row[0]), row[1:]
            fh.write(",".join([str(step)] + [repr(float(v)) for v in rest]) + "\n")


def read_curve(path) -> list:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CURVE_HEADER:
        raise ValueError(f"unexpected eval-curve header in {path}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append((int(parts[0]),) + tuple(float(v) for v in parts[1:]))
    return rows


def _seed_dir(cfg: ExperimentConfig, seed: int) -> str:
    return os.path.join(cfg.out, cfg.env, cfg.algo, f"seed{seed}")


def load_run_record(seed_dir: str) -> RunRecord:
    cfg = ExperimentConfig.from_yaml(os.path.join(seed_dir, "config.yaml"))
    curve = read_curve(os.path.join(seed_dir, "evalcurve.csv"))
    final = MetricReport.from_csv(os.path.join(seed_dir, "final.csv"))
    seed = int(os.path.basename(seed_dir.rstrip(os.sep)).removeprefix("seed"))
    return RunRecord(cfg.config_hash(), seed, curve, final)


# ----------------------------------------------------------- evaluation


def _eval_stats(traces) -> tuple[float, float, float, float, float]:
    return (
        float(np.mean([tr.total_return for tr in traces])),
        float(np.mean([tr.decisions for tr in traces])),
        float(np.mean([episode_mmacs(tr) for tr in traces])),
        float(np.mean([jerk(tr) for tr in traces])),
        float(np.mean([action_repetition(tr) for tr in traces])),
    )


def _run_evals(eval_env, agent, n: int, rng: np.random.Generator):
    traces = []
    for _ in range(n):
        budget = _episode_budget(eval_env)
        traces.append(run_episode(eval_env, agent, budget=budget, rng=rng, mode="eval"))
    return traces


def _eval_view(agent, env, params: DeepParams):
    """A second agent sharing the trained networks but none of the
    episode state, so evaluation can run while a training episode is
    paused mid-window."""
    slim = replace(params, buffer_capacity=1)
    view = type(agent)(env, slim, RngStream(0))
    if isinstance(agent, LayeredDeepAgent):
        view.slow, view.fast, view.gate = agent.slow, agent.fast, agent.gate
    elif isinstance(agent, SkipTd3Agent):
        view.core, view.skip = agent.core, agent.skip
    else:
        view.core = agent.core
    return view


# ---------------------------------------------------------- single seeds


def _finish_seed(cfg, seed, run_dir, env, rows, final_traces, save_checkpoint):
    returns = [row[1] for row in rows]
    row = seed_metrics(seed, final_traces, returns, env.reward_range)
    report = MetricReport(env=cfg.env, algo=cfg.algo, rows=[row])

    write_curve(os.path.join(run_dir, "evalcurve.csv"), rows)
    report.to_csv(os.path.join(run_dir, "final.csv"))
    trace_dir = os.path.join(run_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    for i, tr in enumerate(final_traces):
        tr.to_csv(os.path.join(trace_dir, f"trace{i:02d}.csv"))
    save_checkpoint(os.path.join(run_dir, "checkpoint"))
    cfg.to_yaml(os.path.join(run_dir, "config.yaml"))
    with open(os.path.join(run_dir, "COMPLETE"), "w") as fh:
        fh.write(cfg.config_hash() + "\n")


def _run_deep_seed(cfg: ExperimentConfig, seed: int) -> None:
    run_dir = _seed_dir(cfg, seed)
    os.makedirs(run_dir, exist_ok=True)
    env = make_env(cfg)
    eval_env = make_env(cfg)
    params = DeepParams(tau=cfg.tau, p=cfg.p, j=cfg.j, warmup_steps=cfg.warmup_steps)
    agent = make_deep_agent(cfg.algo, env, params, RngStream(seed).child(f"{cfg.env}:{cfg.algo}"))
    view = _eval_view(agent, eval_env, params)
    stream = RngStream(seed).child(f"harness:{cfg.env}:{cfg.algo}")
    resets = stream.substream("train-resets")

    rows: list = []
    final_traces: list = []
    state = {"total": 0, "next": cfg.eval_frequency}

    def eval_point(step: int) -> None:
        traces = _run_evals(eval_env, view, cfg.eval_episodes, stream.substream(f"eval-{step}"))
        rows.append((step,) + _eval_stats(traces))
        if step >= cfg.max_steps:
            final_traces.extend(traces)

    def on_step(_t, _trace) -> None:
        state["total"] += 1
        if state["next"] <= cfg.max_steps and state["total"] == state["next"]:
            eval_point(state["next"])
            state["next"] += cfg.eval_frequency

    while state["total"] < cfg.max_steps:
        cap = min(env.max_steps, cfg.max_steps - state["total"])
        run_episode(
            env,
            agent,
            budget=_episode_budget(env),
            max_steps=cap,
            rng=resets,
            mode="train",
            on_step=on_step,
        )
    if not rows or rows[-1][0] < cfg.max_steps:
        eval_point(cfg.max_steps)

    _finish_seed(cfg, seed, run_dir, env, rows, final_traces, lambda d: save_agent(agent, d))


TABULAR_TABLES = {"qlearn": ("q",), "qlearn_ea": ("q",), "tla_tab": ("slow", "fast", "gate")}


def _save_tables(agent, algo: str, ckpt_dir: str) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    arrays = {name: getattr(agent, name) for name in TABULAR_TABLES[algo]}
    np.savez(os.path.join(ckpt_dir, "tables.npz"), **arrays)


def load_tables(agent, algo: str, ckpt_dir: str) -> None:
    with np.load(os.path.join(ckpt_dir, "tables.npz")) as z:
        for name in TABULAR_TABLES[algo]:
            getattr(agent, name)[:] = z[name]


def _run_tabular_seed(cfg: ExperimentConfig, seed: int) -> None:
    run_dir = _seed_dir(cfg, seed)
    os.makedirs(run_dir, exist_ok=True)
    env = make_env(cfg)
    params = TabularParams(tau=cfg.tau, p=cfg.p, j=cfg.j, episodes=cfg.episodes)
    agent = make_tabular_agent(cfg.algo, env.world.n_cells, params, RngStream(seed))

    rows = []
    final_traces: list = []

    def eval_point(step: int) -> list:
        traces = _run_evals(env, agent, cfg.eval_episodes, np.random.default_rng(0))
        rows.append((step,) + _eval_stats(traces))
        return traces

    for ep in range(cfg.episodes):
        agent.eps = epsilon_schedule(params, ep)
        run_episode(env, agent, budget=_episode_budget(env), mode="train")
        last = ep == cfg.episodes - 1
        if (ep + 1) % cfg.eval_frequency == 0 or last:
            traces = eval_point(ep + 1)
            if last:
                final_traces = traces

    _finish_seed(cfg, seed, run_dir, env, rows, final_traces, lambda d: _save_tables(agent, cfg.algo, d))


def _run_seed(cfg: ExperimentConfig, seed: int) -> str:
    run_dir = _seed_dir(cfg, seed)
    marker = os.path.join(run_dir, "COMPLETE")
    if os.path.exists(marker):
        with open(marker) as fh:
            stored = fh.read().strip()
        if stored == cfg.config_hash():
            return run_dir
        raise ValueError(
            f"{run_dir} holds a finished run with a different config "
            f"(hash {stored}); point --out elsewhere or remove it"
        )
    if cfg.algo in TABULAR_ALGOS:
        _run_tabular_seed(cfg, seed)
    else:
        _run_deep_seed(cfg, seed)
    return run_dir


def _seed_worker(payload: dict, seed: int) -> str:
    return _run_seed(ExperimentConfig(**payload), seed)


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Train every seed of the cell (skipping finished ones) and return
    the persisted records."""
    cfg = cfg.resolve()
    cell_dir = os.path.join(cfg.out, cfg.env, cfg.algo)
    os.makedirs(cell_dir, exist_ok=True)
    cfg.to_yaml(os.path.join(cell_dir, "config.yaml"))
    if cfg.parallel > 1 and len(cfg.seeds) > 1:
        payload = asdict(cfg)
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.parallel) as pool:
            dirs = list(pool.map(_seed_worker, [payload] * len(cfg.seeds), cfg.seeds))
    else:
        dirs = [_run_seed(cfg, seed) for seed in cfg.seeds]
    return [load_run_record(d) for d in dirs]


def load_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Load previously persisted records for every finished seed."""
    cfg = cfg.resolve()
    records = []
    for seed in cfg.seeds:
        run_dir = _seed_dir(cfg, seed)
        if os.path.exists(os.path.join(run_dir, "COMPLETE")):
            records.append(load_run_record(run_dir))
    return records


# ---------------------------------------------------------- aggregation


def aggregate_curves(records: list) -> tuple[np.ndarray, dict]:
    """Per-step mean and standard error across seeds.

    All records must come from the same experiment cell (identical
    config hash and evaluation grid).
    """
    if not records:
        raise ValueError("no records to aggregate")
    hashes = {r.config_hash for r in records}
    if len(hashes) > 1:
        raise ValueError(f"records mix configs: {sorted(hashes)}")
    steps = records[0].curve_steps
    for r in records[1:]:
        if not np.array_equal(r.curve_steps, steps):
            raise ValueError("records disagree on evaluation steps")
    out = {}
    for name in CURVE_HEADER.split(",")[1:]:
        data = np.stack([r.curve_column(name) for r in records])
        mean = data.mean(axis=0)
        stderr = data.std(axis=0, ddof=0) / np.sqrt(data.shape[0])
        out[name] = (mean, stderr)
    return steps, out


def _collect_report(records: list, env: str, algo: str) -> MetricReport:
    rows = [row for r in sorted(records, key=lambda r: r.seed) for row in r.final.rows]
    return MetricReport(env=env, algo=algo, rows=rows)


def aggregate_and_plot(groups: list, out_dir: str, env: str) -> dict:
    """Write aggregate CSVs, a two-panel SVG, and a summary table.

    `groups` is a list of (algo, records) pairs for one environment.
    Returns {algo: MetricReport}.
    """
    os.makedirs(out_dir, exist_ok=True)
    reports = {}
    curves = {}
    for algo, records in groups:
        steps, agg = aggregate_curves(records)
        curves[algo] = (steps, agg)
        with open(os.path.join(out_dir, f"aggregate_{algo}.csv"), "w") as fh:
            names = CURVE_HEADER.split(",")[1:]
            fh.write("step," + ",".join(f"{n}_mean,{n}_stderr" for n in names) + "\n")
            for i, step in enumerate(steps):
                cells = [str(int(step))]
                for n in names:
                    mean, err = agg[n]
                    cells += [repr(float(mean[i])), repr(float(err[i]))]
                fh.write(",".join(cells) + "\n")
        reports[algo] = _collect_report(records, env, algo)
    plot_curves(curves, os.path.join(out_dir, f"{env}.svg"), env)
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write(summary_table([reports[a] for a, _ in groups]))
    return reports


def plot_curves(curves: dict, path: str, env: str) -> None:
    """Two panels — return and decisions per episode vs training steps —
    with shaded standard-error bands."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_r, ax_d) = plt.subplots(1, 2, figsize=(11, 4))
    for algo, (steps, agg) in curves.items():
        for ax, name in ((ax_r, "avg_return"), (ax_d, "avg_decisions")):
            mean, err = agg[name]
            (line,) = ax.plot(steps, mean, label=algo)
            if np.any(err > 0):
                ax.fill_between(steps, mean - err, mean + err, alpha=0.25, color=line.get_color())
    ax_r.set_ylabel("average return")
    ax_d.set_ylabel("average decisions per episode")
    for ax in (ax_r, ax_d):
        ax.set_xlabel("training step")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.suptitle(env)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def report(root: str) -> list[str]:
    """Aggregate every finished experiment under `root`; returns the
    paths of the files written."""
    written = []
    for env in sorted(os.listdir(root)):
        env_dir = os.path.join(root, env)
        if not os.path.isdir(env_dir) or env not in ENV_DEFAULTS:
            continue
        groups = []
        for algo in sorted(os.listdir(env_dir)):
            algo_dir = os.path.join(env_dir, algo)
            seed_dirs = [
                os.path.join(algo_dir, d)
                for d in sorted(os.listdir(algo_dir))
                if d.startswith("seed") and os.path.exists(os.path.join(algo_dir, d, "COMPLETE"))
            ]
            if seed_dirs:
                groups.append((algo, [load_run_record(d) for d in seed_dirs]))
        if groups:
            out_dir = os.path.join(root, "reports", env)
            aggregate_and_plot(groups, out_dir, env)
            written.append(out_dir)
    return written


# --------------------------------------------------------------- sweeps


def select_sweep_winner(rows: list) -> dict:
    """Best sweep cell: highest mean return, where every cell within one
    standard deviation of the best is a candidate and the candidate with
    the fewest mean decisions wins."""
    best = max(rows, key=lambda r: r["mean_return"])
    floor = best["mean_return"] - best["std_return"]
    candidates = [r for r in rows if r["mean_return"] >= floor]
    return min(candidates, key=lambda r: r["mean_decisions"])


def sweep(base: ExperimentConfig, taus: list, ps: list, n_seeds: int = 5) -> tuple:
    """Grid search over window length and energy penalty.

    Each cell trains `n_seeds` seeds.  Cells are ranked by mean final
    return; every cell within one standard deviation of the best is a
    candidate, and the candidate with the fewest mean decisions wins.
    Returns ((tau, p), rows) where rows are the per-cell statistics.
    """
    if not taus or not ps:
        raise ValueError("sweep grid must be non-empty")
    base = base.resolve()
    rows = []
    for tau in taus:
        for p in ps:
            cfg = replace(
                base,
                tau=int(tau),
                p=float(p),
                seeds=list(range(n_seeds)),
                out=os.path.join(base.out, "sweep", f"{base.env}_{base.algo}", f"tau{tau}_p{p}"),
            )
            records = run_experiment(cfg)
            rets = np.array([r.final.rows[0].avg_return for r in records])
            decs = np.array([r.final.rows[0].avg_decisions for r in records])
            rows.append(
                {
                    "tau": int(tau),
                    "p": float(p),
                    "mean_return": float(rets.mean()),
                    "std_return": float(rets.std(ddof=0)),
                    "mean_decisions": float(decs.mean()),
                }
            )
    winner = select_sweep_winner(rows)
    for r in rows:
        r["selected"] = r is winner
    sweep_csv = os.path.join(base.out, "sweep", f"{base.env}_{base.algo}", "sweep.csv")
    os.makedirs(os.path.dirname(sweep_csv), exist_ok=True)
    with open(sweep_csv, "w") as fh:
        fh.write("tau,p,mean_return,std_return,mean_decisions,selected\n")
        for r in rows:
            fh.write(
                f"{r['tau']},{r['p']},{r['mean_return']!r},{r['std_return']!r},"
                f"{r['mean_decisions']!r},{int(r['selected'])}\n"
            )
    return (winner["tau"], winner["p"]), rows


# ------------------------------------------------------------- oracles


def oracle_table(env_name: str, decision_limit: int | None = None, repeat_k: int | None = None) -> list[dict]:
    """Exact planning values for a gridworld under several macro sets."""
    cfg = ExperimentConfig(env=env_name, algo="qlearn", decision_limit=decision_limit).resolve()
    world = make_env(cfg).world
    k = repeat_k if repeat_k is not None else (cfg.tau or 4)
    rows = []
    for label, macros in (
        ("one-step", one_step_macros()),
        (f"repeat-{k}", repeat_macros(k)),
        (f"union-{k}", union_macros(k)),
    ):
        res = oracle_solve(world, macros)
        rows.append(
            {
                "macros": label,
                "optimal_return": res.optimal_return,
                "min_decisions": res.min_decisions,
                "goal_reachable": res.goal_reachable,
            }
        )
    return rows


# ------------------------------------------------------- checkpoint eval


def evaluate_checkpoint(run_dir: str, episodes: int = 10, seed: int = 0) -> MetricReport:
    """Rebuild the agent recorded in `run_dir`, load its checkpoint, and
    run fresh deterministic evaluation episodes."""
    cfg = ExperimentConfig.from_yaml(os.path.join(run_dir, "config.yaml"))
    cfg = cfg.resolve()
    env = make_env(cfg)
    ckpt = os.path.join(run_dir, "checkpoint")
    if cfg.algo in TABULAR_ALGOS:
        params = TabularParams(tau=cfg.tau, p=cfg.p, j=cfg.j, episodes=cfg.episodes)
        agent = make_tabular_agent(cfg.algo, env.world.n_cells, params, RngStream(seed))
        load_tables(agent, cfg.algo, ckpt)
    else:
        params = DeepParams(tau=cfg.tau, p=cfg.p, j=cfg.j, warmup_steps=cfg.warmup_steps)
        agent = make_deep_agent(cfg.algo, env, params, RngStream(seed))
        load_agent_networks(agent, ckpt)
    traces = _run_evals(env, agent, episodes, np.random.default_rng(seed))
    returns = [tr.total_return for tr in traces]
    row = seed_metrics(seed, traces, returns, env.reward_range)
    return MetricReport(env=cfg.env, algo=cfg.algo, rows=[row])
