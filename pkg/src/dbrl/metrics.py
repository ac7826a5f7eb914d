"""Evaluation metrics computed from episode traces.

All metrics are pure functions of the recorded trace (or evaluation
curve), so recomputing them from a round-tripped CSV gives bitwise
identical values.  Action metrics treat multi-dimensional actions
per-dimension and average across dimensions.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .core import EpisodeTrace


def action_repetition(trace: EpisodeTrace) -> float:
    """Percentage of steps whose action exactly equals the previous one.

    Exact equality holds precisely when an action was committed/held, so no
    tolerance is involved.  Traces with fewer than two steps score 0.
    """
    a = trace.action_array()
    if a.shape[0] < 2:
        return 0.0
    return float(np.mean(a[1:] == a[:-1]) * 100.0)


def jerk(trace: EpisodeTrace) -> float:
    """Mean absolute change in action between consecutive steps."""
    a = trace.action_array()
    if a.shape[0] < 2:
        return 0.0
    return float(np.mean(np.abs(np.diff(a, axis=0))))


def episode_mmacs(trace: EpisodeTrace) -> float:
    """Millions of multiply-accumulate operations charged over the episode."""
    return float(trace.total_macs) / 1e6


def normalized_auc(eval_returns, r_min: float, r_max: float) -> float:
    """Mean normalized evaluation return over a training curve, in [0, 1]."""
    if not r_min < r_max:
        raise ValueError(f"need r_min < r_max, got ({r_min}, {r_max})")
    curve = np.asarray(eval_returns, dtype=np.float64)
    if curve.size == 0:
        raise ValueError("empty evaluation curve")
    return float(np.mean(np.clip((curve - r_min) / (r_max - r_min), 0.0, 1.0)))


def trace_is_degenerate(trace: EpisodeTrace) -> bool:
    """True when the trace is too short for pairwise action metrics."""
    return trace.steps < 2


@dataclass
class SeedMetrics:
    """Final-policy metrics for one training seed."""

    seed: int
    avg_return: float
    avg_decisions: float
    avg_mmacs: float
    action_repetition_pct: float
    avg_jerk: float
    normalized_auc: float
    degenerate_episodes: int = 0

    COLUMNS = (
        "seed",
        "avg_return",
        "avg_decisions",
        "avg_mmacs",
        "action_repetition_pct",
        "avg_jerk",
        "normalized_auc",
        "degenerate_episodes",
    )


def seed_metrics(
    seed: int,
    traces: list,
    eval_returns,
    reward_range: tuple,
) -> SeedMetrics:
    """Aggregate final evaluation traces plus the training curve for one seed."""
    if not traces:
        raise ValueError("need at least one evaluation trace")
    return SeedMetrics(
        seed=seed,
        avg_return=float(np.mean([t.total_return for t in traces])),
        avg_decisions=float(np.mean([t.decisions for t in traces])),
        avg_mmacs=float(np.mean([episode_mmacs(t) for t in traces])),
        action_repetition_pct=float(np.mean([action_repetition(t) for t in traces])),
        avg_jerk=float(np.mean([jerk(t) for t in traces])),
        normalized_auc=normalized_auc(eval_returns, *reward_range),
        degenerate_episodes=sum(trace_is_degenerate(t) for t in traces),
    )


@dataclass
class MetricReport:
    """Per-seed metrics for one (environment, algorithm) pair."""

    env: str
    algo: str
    rows: list = field(default_factory=list)

    def _mean(self, attr: str) -> float:
        if not self.rows:
            raise ValueError("empty report")
        return float(np.mean([getattr(r, attr) for r in self.rows]))

    @property
    def avg_return(self) -> float:
        return self._mean("avg_return")

    @property
    def avg_decisions(self) -> float:
        return self._mean("avg_decisions")

    @property
    def avg_mmacs(self) -> float:
        return self._mean("avg_mmacs")

    @property
    def action_repetition_pct(self) -> float:
        return self._mean("action_repetition_pct")

    @property
    def avg_jerk(self) -> float:
        return self._mean("avg_jerk")

    @property
    def normalized_auc(self) -> float:
        return self._mean("normalized_auc")

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        buf.write("env,algo," + ",".join(SeedMetrics.COLUMNS) + "\n")
        for r in self.rows:
            cells = [self.env, self.algo] + [repr(getattr(r, c)) for c in SeedMetrics.COLUMNS]
            buf.write(",".join(str(c) for c in cells) + "\n")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv_string())

    @classmethod
    def from_csv_string(cls, text: str) -> "MetricReport":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        expected = ["env", "algo"] + list(SeedMetrics.COLUMNS)
        if header != expected:
            raise ValueError(f"bad metrics header: {header}")
        env = algo = None
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            env, algo = cells[0], cells[1]
            vals = cells[2:]
            rows.append(
                SeedMetrics(
                    seed=int(vals[0]),
                    avg_return=float(vals[1]),
                    avg_decisions=float(vals[2]),
                    avg_mmacs=float(vals[3]),
                    action_repetition_pct=float(vals[4]),
                    avg_jerk=float(vals[5]),
                    normalized_auc=float(vals[6]),
                    degenerate_episodes=int(vals[7]),
                )
            )
        if env is None:
            raise ValueError("metrics CSV has no rows")
        return cls(env=env, algo=algo, rows=rows)

    @classmethod
    def from_csv(cls, path) -> "MetricReport":
        with open(path) as f:
            return cls.from_csv_string(f.read())

    def summary_line(self) -> str:
        return (
            f"{self.env},{self.algo},"
            f"{self.avg_return:.2f},{self.avg_decisions:.2f},{self.avg_mmacs:.4f},"
            f"{self.action_repetition_pct:.2f},{self.avg_jerk:.4f},{self.normalized_auc:.4f}"
        )


SUMMARY_HEADER = "env,algo,avg_return,avg_decisions,avg_mmacs,action_repetition_pct,avg_jerk,normalized_auc"


def summary_table(reports: list) -> str:
    """One aggregate CSV row per report, mirroring the results tables."""
    lines = [SUMMARY_HEADER]
    for rep in reports:
        lines.append(rep.summary_line())
    return "\n".join(lines) + "\n"
